#include "datom/synth.hpp"

#include "datom/conv.hpp"
#include "datom/rng.hpp"

#include <cmath>

namespace datom {

namespace {

// Noise streams live in a separate fork range so the clean content of record
// i does not move when the noise level changes.
constexpr std::uint64_t kNoiseStream = 1ull << 32;

double dataset_rms(const std::vector<Signal>& clean) {
  double acc = 0.0;
  Eigen::Index n = 0;
  for (const auto& c : clean) {
    acc += c.square().sum();
    n += c.size();
  }
  return n ? std::sqrt(acc / static_cast<double>(n)) : 0.0;
}

void add_noise(std::vector<Signal>& xs, const std::vector<Signal>& clean, double sigma, bool relative,
               const Rng& base) {
  const double eff = relative ? sigma * dataset_rms(clean) : sigma;
  if (eff == 0.0) return;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Rng r = base.fork(kNoiseStream + i);
    for (Eigen::Index j = 0; j < xs[i].size(); ++j) xs[i](j) += r.normal(0.0, eff);
  }
}

void check_common(int length, double density, double sigma, const char* what) {
  if (length < 1) throw ConfigError(std::string(what) + ": length must be >= 1");
  if (!(density > 0.0 && density <= 1.0)) throw ConfigError(std::string(what) + ": density must be in (0, 1]");
  if (sigma < 0.0) throw ConfigError(std::string(what) + ": noise_sigma must be >= 0");
}

}  // namespace

void SynthSpec::validate() const {
  check_common(length, activation_density, noise_sigma, "synth");
  if (atoms.empty()) throw ConfigError("synth: needs at least one atom");
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    if (atoms[k].size() < 1) throw ConfigError("synth: atom " + std::to_string(k) + " is empty");
    if (atoms[k].size() > length)
      throw ConfigError("synth: atom " + std::to_string(k) + " longer than signal");
    if (!all_finite(atoms[k])) throw ConfigError("synth: atom " + std::to_string(k) + " not finite");
  }
  if (amp_lo > amp_hi) throw ConfigError("synth: amplitude range inverted");
}

Dataset gen_basic(const SynthSpec& spec, int count, BasicTruth* truth) {
  spec.validate();
  if (count < 1) throw ConfigError("synth: count must be >= 1");
  const Rng base(spec.seed);
  const int n_atoms = static_cast<int>(spec.atoms.size());

  std::vector<Signal> clean(static_cast<std::size_t>(count));
  if (truth) {
    truth->activations.assign(static_cast<std::size_t>(count), {});
    truth->components.assign(static_cast<std::size_t>(count), {});
  }
  for (int i = 0; i < count; ++i) {
    Rng r = base.fork(static_cast<std::uint64_t>(i));
    Signal sum = Signal::Zero(spec.length);
    std::vector<Signal> acts, comps;
    for (int k = 0; k < n_atoms; ++k) {
      Signal z = Signal::Zero(spec.length);
      for (int j = 0; j < spec.length; ++j)
        if (r.bernoulli(spec.activation_density)) z(j) = r.uniform(spec.amp_lo, spec.amp_hi);
      Signal comp = atom_conv(z, spec.atoms[static_cast<std::size_t>(k)]);
      sum += comp;
      if (truth) {
        acts.push_back(std::move(z));
        comps.push_back(std::move(comp));
      }
    }
    clean[static_cast<std::size_t>(i)] = std::move(sum);
    if (truth) {
      truth->activations[static_cast<std::size_t>(i)] = std::move(acts);
      truth->components[static_cast<std::size_t>(i)] = std::move(comps);
    }
  }

  std::vector<Signal> xs = clean;
  add_noise(xs, clean, spec.noise_sigma, spec.noise_relative, base);
  if (truth) truth->clean = std::move(clean);

  Dataset ds;
  ds.samples.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) ds.samples[static_cast<std::size_t>(i)].signal = std::move(xs[static_cast<std::size_t>(i)]);
  ds.validate();
  return ds;
}

void SSVEPSynthSpec::validate() const {
  if (length < 1) throw ConfigError("ssvep synth: length must be >= 1");
  if (!(sampling_rate > 0.0)) throw ConfigError("ssvep synth: sampling_rate must be positive");
  if (flash_response.size() < 1) throw ConfigError("ssvep synth: flash_response is empty");
  if (flash_response.size() > length) throw ConfigError("ssvep synth: flash_response longer than signal");
  if (!all_finite(flash_response)) throw ConfigError("ssvep synth: flash_response not finite");
  if (gain_lo > gain_hi) throw ConfigError("ssvep synth: gain range inverted");
  if (noise_sigma < 0.0) throw ConfigError("ssvep synth: noise_sigma must be >= 0");
}

Dataset gen_ssvep(const SSVEPSynthSpec& spec, const std::vector<double>& class_frequencies,
                  int n_per_class, SSVEPTruth* truth) {
  spec.validate();
  if (class_frequencies.empty()) throw ConfigError("ssvep synth: no class frequencies");
  if (n_per_class < 1) throw ConfigError("ssvep synth: n_per_class must be >= 1");
  for (double f : class_frequencies) {
    if (!(f > 0.0)) throw ConfigError("ssvep synth: frequencies must be positive");
    if (spec.sampling_rate / f < 2.0)
      throw ConfigError("ssvep synth: period of " + std::to_string(f) + " Hz is under 2 samples");
  }
  const Rng base(spec.seed);
  const int n_classes = static_cast<int>(class_frequencies.size());
  const int count = n_classes * n_per_class;

  std::vector<Signal> clean(static_cast<std::size_t>(count));
  Dataset ds;
  ds.samples.resize(static_cast<std::size_t>(count));
  for (int c = 0; c < n_classes; ++c) {
    const double tau = 1.0 / class_frequencies[static_cast<std::size_t>(c)];
    for (int j = 0; j < n_per_class; ++j) {
      const int i = c * n_per_class + j;
      Rng r = base.fork(static_cast<std::uint64_t>(i));
      Signal s = Signal::Zero(spec.length);
      for (long l = 0;; ++l) {
        const double t_sec = static_cast<double>(l) * tau - spec.phase;
        const long idx = std::lround(t_sec * spec.sampling_rate);
        if (idx >= spec.length) break;
        const double g = r.uniform(spec.gain_lo, spec.gain_hi);
        if (idx + spec.flash_response.size() <= 0) continue;
        for (Eigen::Index k = 0; k < spec.flash_response.size(); ++k) {
          const long pos = idx + k;
          if (pos >= 0 && pos < spec.length) s(pos) += g * spec.flash_response(k);
        }
      }
      clean[static_cast<std::size_t>(i)] = s;
      ds.samples[static_cast<std::size_t>(i)].signal = std::move(s);
      ds.samples[static_cast<std::size_t>(i)].label = c + 1;
    }
  }

  std::vector<Signal> xs(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) xs[static_cast<std::size_t>(i)] = ds.samples[static_cast<std::size_t>(i)].signal;
  add_noise(xs, clean, spec.noise_sigma, spec.noise_relative, base);
  for (int i = 0; i < count; ++i) ds.samples[static_cast<std::size_t>(i)].signal = std::move(xs[static_cast<std::size_t>(i)]);
  if (truth) truth->clean = std::move(clean);
  ds.validate();
  return ds;
}

void NoiseMixSpec::validate() const {
  signal.validate();
  if (artifact.size() < 1) throw ConfigError("noise synth: artifact is empty");
  if (artifact.size() > signal.length) throw ConfigError("noise synth: artifact longer than signal");
  if (!all_finite(artifact)) throw ConfigError("noise synth: artifact not finite");
  if (!(event_rate >= 0.0 && event_rate <= 1.0)) throw ConfigError("noise synth: event_rate must be in [0, 1]");
  if (artifact_lo > artifact_hi) throw ConfigError("noise synth: artifact amplitude range inverted");
}

Dataset gen_noise_mixture(const NoiseMixSpec& spec, int count, NoiseTruth* truth) {
  spec.validate();
  // Artifact streams fork from a third range so s and n stay independent.
  constexpr std::uint64_t kArtifactStream = 1ull << 33;
  Dataset ds = gen_basic(spec.signal, count, nullptr);
  const Rng base(spec.signal.seed);
  const int t = spec.signal.length;
  const Eigen::Index alen = spec.artifact.size();

  if (truth) {
    truth->s.resize(static_cast<std::size_t>(count));
    truth->n.resize(static_cast<std::size_t>(count));
  }
  ds.masks.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng r = base.fork(kArtifactStream + static_cast<std::uint64_t>(i));
    Signal n = Signal::Zero(t);
    NoiseMask mask(static_cast<std::size_t>(t), 0);
    for (int j = 0; j < t; ++j) {
      if (!r.bernoulli(spec.event_rate)) continue;
      const double g = r.uniform(spec.artifact_lo, spec.artifact_hi);
      for (Eigen::Index k = 0; k < alen && j + k < t; ++k) {
        n(j + k) += g * spec.artifact(k);
        mask[static_cast<std::size_t>(j + k)] = 1;
      }
    }
    if (truth) {
      truth->s[static_cast<std::size_t>(i)] = ds.samples[static_cast<std::size_t>(i)].signal;
      truth->n[static_cast<std::size_t>(i)] = n;
    }
    ds.samples[static_cast<std::size_t>(i)].signal += n;
    ds.masks[static_cast<std::size_t>(i)] = std::move(mask);
  }
  ds.validate();
  return ds;
}

void ERPSynthSpec::validate() const {
  if (components.empty()) throw ConfigError("erp synth: needs at least one component");
  const Eigen::Index t = components[0].size();
  if (t < 1) throw ConfigError("erp synth: components are empty");
  for (std::size_t p = 0; p < components.size(); ++p) {
    if (components[p].size() != t) throw ConfigError("erp synth: component lengths differ");
    if (!all_finite(components[p])) throw ConfigError("erp synth: component " + std::to_string(p) + " not finite");
  }
  if (gain_ranges.empty()) throw ConfigError("erp synth: needs at least one class");
  for (std::size_t c = 0; c < gain_ranges.size(); ++c) {
    if (gain_ranges[c].size() != components.size())
      throw ConfigError("erp synth: class " + std::to_string(c + 1) + " gain count != component count");
    for (const auto& [lo, hi] : gain_ranges[c])
      if (lo > hi) throw ConfigError("erp synth: class " + std::to_string(c + 1) + " gain range inverted");
  }
  if (noise_sigma < 0.0) throw ConfigError("erp synth: noise_sigma must be >= 0");
}

Dataset gen_erp(const ERPSynthSpec& spec, int n_per_class, ERPTruth* truth) {
  spec.validate();
  if (n_per_class < 1) throw ConfigError("erp synth: n_per_class must be >= 1");
  const Rng base(spec.seed);
  const int n_classes = static_cast<int>(spec.gain_ranges.size());
  const int n_comp = static_cast<int>(spec.components.size());
  const int count = n_classes * n_per_class;
  const Eigen::Index t = spec.components[0].size();

  std::vector<Signal> clean(static_cast<std::size_t>(count));
  Dataset ds;
  ds.samples.resize(static_cast<std::size_t>(count));
  if (truth) truth->gains.assign(static_cast<std::size_t>(count), {});
  for (int c = 0; c < n_classes; ++c)
    for (int j = 0; j < n_per_class; ++j) {
      const int i = c * n_per_class + j;
      Rng r = base.fork(static_cast<std::uint64_t>(i));
      Signal s = Signal::Zero(t);
      std::vector<double> gains(static_cast<std::size_t>(n_comp));
      for (int p = 0; p < n_comp; ++p) {
        const auto& [lo, hi] = spec.gain_ranges[static_cast<std::size_t>(c)][static_cast<std::size_t>(p)];
        gains[static_cast<std::size_t>(p)] = r.uniform(lo, hi);
        s += gains[static_cast<std::size_t>(p)] * spec.components[static_cast<std::size_t>(p)];
      }
      clean[static_cast<std::size_t>(i)] = s;
      ds.samples[static_cast<std::size_t>(i)].signal = std::move(s);
      ds.samples[static_cast<std::size_t>(i)].label = c + 1;
      if (truth) truth->gains[static_cast<std::size_t>(i)] = std::move(gains);
    }

  std::vector<Signal> xs(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) xs[static_cast<std::size_t>(i)] = ds.samples[static_cast<std::size_t>(i)].signal;
  add_noise(xs, clean, spec.noise_sigma, spec.noise_relative, base);
  for (int i = 0; i < count; ++i) ds.samples[static_cast<std::size_t>(i)].signal = std::move(xs[static_cast<std::size_t>(i)]);
  if (truth) truth->clean = std::move(clean);
  ds.validate();
  return ds;
}

namespace {

Signal peak_normalize(Signal v) {
  const double m = v.abs().maxCoeff();
  if (m > 0.0) v /= m;
  return v;
}

}  // namespace

Signal gabor_atom(int length, double cycles, double width, double phase, double center) {
  if (length < 1) throw ConfigError("gabor_atom: length must be >= 1");
  Signal v(length);
  const double c = center * (length - 1);
  const double sigma = width * length * 0.5;
  for (int i = 0; i < length; ++i) {
    const double d = (i - c) / (sigma > 0 ? sigma : 1.0);
    v(i) = std::exp(-0.5 * d * d) *
           std::cos(2.0 * std::numbers::pi * cycles * i / length + phase);
  }
  return peak_normalize(std::move(v));
}

Signal gaussian_bump(int length, double center, double width) {
  if (length < 1) throw ConfigError("gaussian_bump: length must be >= 1");
  Signal v(length);
  const double c = center * (length - 1);
  const double sigma = width * length > 0 ? width * length : 1.0;
  for (int i = 0; i < length; ++i) {
    const double d = (i - c) / sigma;
    v(i) = std::exp(-0.5 * d * d);
  }
  return peak_normalize(std::move(v));
}

Signal biphasic_pulse(int length, double center, double width) {
  if (length < 1) throw ConfigError("biphasic_pulse: length must be >= 1");
  Signal v(length);
  const double c = center * (length - 1);
  const double sigma = width * length > 0 ? width * length : 1.0;
  for (int i = 0; i < length; ++i) {
    const double d = (i - c) / sigma;
    v(i) = -d * std::exp(-0.5 * d * d);
  }
  return peak_normalize(std::move(v));
}

}  // namespace datom
