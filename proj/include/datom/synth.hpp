#pragma once

#include "datom/signal.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace datom {

// All generators are deterministic in their seed: record i draws from a
// stream forked as (seed, i), so the dataset is reproducible sample by
// sample. With noise_relative the noise level is noise_sigma times the RMS
// of the whole clean dataset (computed in a first pass), otherwise absolute.

// Sparse activations convolved with known atoms plus white Gaussian noise.
struct SynthSpec {
  int length = 256;
  std::vector<Signal> atoms;
  double activation_density = 0.02;  // per-index Bernoulli probability
  double amp_lo = 1.0, amp_hi = 1.0;
  double noise_sigma = 0.0;
  bool noise_relative = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BasicTruth {
  std::vector<std::vector<Signal>> activations;  // [sample][atom]
  std::vector<std::vector<Signal>> components;
  std::vector<Signal> clean;  // sum of components, noise-free
};

Dataset gen_basic(const SynthSpec& spec, int count, BasicTruth* truth = nullptr);

// Periodic flash responses: class c places the response at l/f_c - phase
// seconds (l = 0, 1, ...), each flash scaled by a uniform gain.
struct SSVEPSynthSpec {
  int length = 256;
  double sampling_rate = 128.0;
  double phase = 0.0;  // seconds
  Signal flash_response;
  double gain_lo = 1.0, gain_hi = 1.0;
  double noise_sigma = 0.0;
  bool noise_relative = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SSVEPTruth {
  std::vector<Signal> clean;
};

// Labels are 1-based class indices, samples ordered class-major.
Dataset gen_ssvep(const SSVEPSynthSpec& spec, const std::vector<double>& class_frequencies,
                  int n_per_class, SSVEPTruth* truth = nullptr);

// x = s + n: s is a gen_basic-style mixture (background noise included), n is
// an artifact waveform dropped at random event onsets; the emitted masks
// cover the artifact support. Seeded by signal.seed.
struct NoiseMixSpec {
  SynthSpec signal;
  Signal artifact;
  double event_rate = 0.005;  // per-index onset probability
  double artifact_lo = 1.0, artifact_hi = 1.0;

  void validate() const;
};

struct NoiseTruth {
  std::vector<Signal> s, n;
};

Dataset gen_noise_mixture(const NoiseMixSpec& spec, int count, NoiseTruth* truth = nullptr);

// Fixed full-length components with class-conditional gains:
// x = sum_p g_p v_p + noise, g_p uniform in gain_ranges[class][p].
struct ERPSynthSpec {
  std::vector<Signal> components;
  std::vector<std::vector<std::pair<double, double>>> gain_ranges;  // [class][component]
  double noise_sigma = 0.0;
  bool noise_relative = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ERPTruth {
  std::vector<std::vector<double>> gains;  // [sample][component]
  std::vector<Signal> clean;
};

Dataset gen_erp(const ERPSynthSpec& spec, int n_per_class, ERPTruth* truth = nullptr);

// Waveform helpers for specs and tests; all peak-normalized to 1.
Signal gabor_atom(int length, double cycles, double width = 0.35, double phase = 0.0,
                  double center = 0.5);
Signal gaussian_bump(int length, double center = 0.5, double width = 0.15);
Signal biphasic_pulse(int length, double center = 0.5, double width = 0.15);

}  // namespace datom
