#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "datom/conv.hpp"
#include "datom/metrics.hpp"
#include "datom/synth.hpp"

#include <cmath>

using namespace datom;

namespace {

SynthSpec basic_spec(double sigma = 0.0) {
  SynthSpec s;
  s.length = 128;
  s.atoms = {gabor_atom(16, 2.0), gaussian_bump(16)};
  s.activation_density = 0.05;
  s.amp_lo = 0.5;
  s.amp_hi = 2.0;
  s.noise_sigma = sigma;
  s.seed = 77;
  return s;
}

}  // namespace

TEST_CASE("noise-free samples equal the activation-atom convolution exactly") {
  BasicTruth truth;
  Dataset ds = gen_basic(basic_spec(0.0), 8, &truth);
  REQUIRE(ds.size() == 8);
  REQUIRE(truth.activations.size() == 8);

  SynthSpec spec = basic_spec(0.0);
  for (int i = 0; i < ds.size(); ++i) {
    const auto iu = static_cast<std::size_t>(i);
    Signal recon = Signal::Zero(spec.length);
    for (std::size_t a = 0; a < spec.atoms.size(); ++a) {
      Signal comp = atom_conv(truth.activations[iu][a], spec.atoms[a]);
      CHECK((comp - truth.components[iu][a]).abs().maxCoeff() < 1e-12);
      recon += comp;
    }
    CHECK((recon - truth.clean[iu]).abs().maxCoeff() < 1e-12);
    CHECK((ds.samples[iu].signal - truth.clean[iu]).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("activations are sparse, non-negative, amplitude-bounded") {
  BasicTruth truth;
  gen_basic(basic_spec(0.0), 20, &truth);
  int active = 0, total = 0;
  for (const auto& sample : truth.activations)
    for (const auto& z : sample)
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        ++total;
        if (z(i) != 0.0) {
          ++active;
          CHECK(z(i) >= 0.5);
          CHECK(z(i) <= 2.0);
        }
      }
  const double density = static_cast<double>(active) / total;
  CHECK(density > 0.02);
  CHECK(density < 0.10);
}

TEST_CASE("same seed, same dataset; different seed, different noise") {
  Dataset a = gen_basic(basic_spec(0.1), 5);
  Dataset b = gen_basic(basic_spec(0.1), 5);
  for (int i = 0; i < 5; ++i)
    CHECK((a.samples[static_cast<std::size_t>(i)].signal - b.samples[static_cast<std::size_t>(i)].signal)
              .abs()
              .maxCoeff() == 0.0);

  SynthSpec other = basic_spec(0.1);
  other.seed = 78;
  Dataset c = gen_basic(other, 5);
  CHECK((a.samples[0].signal - c.samples[0].signal).abs().maxCoeff() > 0.0);
}

TEST_CASE("noise settings leave the clean content untouched") {
  BasicTruth quiet, loud;
  gen_basic(basic_spec(0.0), 5, &quiet);
  Dataset noisy = gen_basic(basic_spec(0.3), 5, &loud);
  for (int i = 0; i < 5; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    CHECK((quiet.clean[iu] - loud.clean[iu]).abs().maxCoeff() == 0.0);
    Signal residual = noisy.samples[iu].signal - loud.clean[iu];
    CHECK(residual.abs().maxCoeff() > 0.0);
  }
}

TEST_CASE("relative noise scales with the clean rms") {
  SynthSpec spec = basic_spec(0.5);
  spec.noise_relative = true;
  spec.length = 512;
  BasicTruth truth;
  Dataset ds = gen_basic(spec, 40, &truth);

  double clean_ss = 0.0, resid_ss = 0.0;
  long n = 0;
  for (int i = 0; i < ds.size(); ++i) {
    const auto iu = static_cast<std::size_t>(i);
    clean_ss += truth.clean[iu].square().sum();
    resid_ss += (ds.samples[iu].signal - truth.clean[iu]).square().sum();
    n += spec.length;
  }
  const double clean_rms = std::sqrt(clean_ss / n);
  const double resid_rms = std::sqrt(resid_ss / n);
  CHECK(resid_rms / clean_rms == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("ssvep flashes land on the stimulus grid") {
  SSVEPSynthSpec spec;
  spec.length = 240;
  spec.sampling_rate = 120.0;
  spec.flash_response = gaussian_bump(12, 0.0, 0.2);  // impulse-ish, peak at index 0
  spec.seed = 5;

  SSVEPTruth truth;
  Dataset ds = gen_ssvep(spec, {6.0, 8.0}, 3, &truth);
  REQUIRE(ds.size() == 6);
  CHECK(ds.samples[0].label == 1);
  CHECK(ds.samples[3].label == 2);
  CHECK(ds.has_labels());

  // Class 1 at 6 Hz, fs = 120: flashes every 20 samples.
  const Signal& x0 = truth.clean[0];
  CHECK(std::abs(x0(0)) > 1e-9);
  for (int flash = 0; flash < 240; flash += 20) CHECK(std::abs(x0(flash)) > 1e-9);

  // Periodicity: the clean signal repeats with the flash period.
  for (int i = 0; i + 20 < 240 - 20; ++i)
    CHECK(x0(i + 20) == doctest::Approx(x0(i)).epsilon(1e-9).scale(1.0));
}

TEST_CASE("ssvep phase shifts the flash grid") {
  SSVEPSynthSpec spec;
  spec.length = 120;
  spec.sampling_rate = 120.0;
  spec.flash_response = gaussian_bump(8, 0.0, 0.2);
  spec.phase = -3.0 / 120.0;  // three samples late
  spec.seed = 6;

  SSVEPTruth truth;
  gen_ssvep(spec, {6.0}, 1, &truth);
  const Signal& x = truth.clean[0];
  CHECK(x.segment(0, 3).abs().maxCoeff() < 1e-12);
  CHECK(std::abs(x(3)) > 1e-9);
}

TEST_CASE("ssvep rejects unreachable stimulus rates") {
  SSVEPSynthSpec spec;
  spec.length = 64;
  spec.sampling_rate = 10.0;
  spec.flash_response = gaussian_bump(8);
  CHECK_THROWS_AS(gen_ssvep(spec, {6.0}, 1), ConfigError);  // fs/f < 2
}

TEST_CASE("noise mixture bookkeeping: x = s + n, mask covers the artifacts") {
  NoiseMixSpec spec;
  spec.signal = basic_spec(0.05);
  spec.signal.length = 256;
  spec.artifact = biphasic_pulse(24);
  spec.event_rate = 0.01;
  spec.artifact_lo = 2.0;
  spec.artifact_hi = 4.0;

  NoiseTruth truth;
  Dataset ds = gen_noise_mixture(spec, 10, &truth);
  REQUIRE(ds.has_masks());
  REQUIRE(truth.s.size() == 10);

  int masked_total = 0;
  for (int i = 0; i < ds.size(); ++i) {
    const auto iu = static_cast<std::size_t>(i);
    CHECK((ds.samples[iu].signal - truth.s[iu] - truth.n[iu]).abs().maxCoeff() < 1e-12);

    // n is zero off the mask, and the mask is exactly the artifact support
    // (padded to the artifact length).
    for (int j = 0; j < spec.signal.length; ++j) {
      if (!ds.masks[iu][static_cast<std::size_t>(j)]) CHECK(truth.n[iu](j) == 0.0);
      masked_total += ds.masks[iu][static_cast<std::size_t>(j)] ? 1 : 0;
    }
  }
  CHECK(masked_total > 0);
}

TEST_CASE("erp gains stay inside the class ranges") {
  ERPSynthSpec spec;
  spec.components = {gaussian_bump(64, 0.3, 0.08), biphasic_pulse(64, 0.6, 0.1)};
  spec.gain_ranges = {{{0.8, 1.2}, {0.0, 0.1}}, {{0.0, 0.1}, {0.8, 1.2}}};
  spec.seed = 9;

  ERPTruth truth;
  Dataset ds = gen_erp(spec, 25, &truth);
  REQUIRE(ds.size() == 50);
  CHECK(ds.samples[0].label == 1);
  CHECK(ds.samples[25].label == 2);

  for (int i = 0; i < ds.size(); ++i) {
    const auto iu = static_cast<std::size_t>(i);
    const auto& g = truth.gains[iu];
    const auto& ranges = spec.gain_ranges[static_cast<std::size_t>(ds.samples[iu].label - 1)];
    for (std::size_t p = 0; p < g.size(); ++p) {
      CHECK(g[p] >= ranges[p].first);
      CHECK(g[p] <= ranges[p].second);
    }
    Signal recon = Signal::Zero(64);
    for (std::size_t p = 0; p < g.size(); ++p) recon += g[p] * spec.components[p];
    CHECK((recon - truth.clean[iu]).abs().maxCoeff() < 1e-12);
    CHECK((ds.samples[iu].signal - truth.clean[iu]).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("waveform helpers are peak-normalized and shaped") {
  Signal g = gabor_atom(32, 3.0);
  CHECK(g.abs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.size() == 32);

  Signal b = gaussian_bump(32);
  CHECK(b.maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b.minCoeff() >= 0.0);

  Signal p = biphasic_pulse(32);
  CHECK(p.abs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.minCoeff() < -0.1);  // genuinely biphasic
}

TEST_CASE("spec validation rejects nonsense") {
  SynthSpec s;
  s.length = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);

  s = basic_spec(0.0);
  s.atoms.clear();
  CHECK_THROWS_AS(gen_basic(s, 1), ConfigError);

  s = basic_spec(0.0);
  s.activation_density = 1.5;
  CHECK_THROWS_AS(gen_basic(s, 1), ConfigError);

  s = basic_spec(0.0);
  s.amp_lo = 2.0;
  s.amp_hi = 1.0;
  CHECK_THROWS_AS(gen_basic(s, 1), ConfigError);
}
