#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace datom {

// Single-channel series: column of T samples.
using Signal = Eigen::ArrayXd;

// Multi-channel series: T rows, one column per channel. Keeping each channel
// contiguous makes the convolution inner loops plain segment operations.
using MultiSignal = Eigen::ArrayXXd;

// Per-sample artifact annotation, one flag per time index (1 = inside event).
using NoiseMask = std::vector<std::uint8_t>;

// Errors are typed by how the CLI has to report them.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;  // bad spec / config (exit 2)
};
struct CompatibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;  // dataset/model mismatch (exit 3)
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;  // non-finite loss etc. (exit 4)
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;  // unreadable / corrupt file (exit 5)
};

inline bool all_finite(const Eigen::Ref<const Eigen::ArrayXXd>& a) {
  return a.isFinite().all();
}

// Class labels are 1-based; 0 marks an unlabeled sample.
struct LabeledSample {
  Signal signal;
  int label = 0;
};

struct Dataset {
  std::vector<LabeledSample> samples;
  std::vector<NoiseMask> masks;  // empty, or one mask per sample

  int size() const { return static_cast<int>(samples.size()); }
  int length() const { return samples.empty() ? 0 : static_cast<int>(samples[0].signal.size()); }
  bool has_labels() const {
    for (const auto& s : samples)
      if (s.label != 0) return true;
    return false;
  }
  bool has_masks() const { return !masks.empty(); }

  // Uniform lengths, finite samples, mask bookkeeping consistent.
  void validate() const {
    if (samples.empty()) throw ConfigError("dataset: empty");
    const auto t = samples[0].signal.size();
    if (t < 1) throw ConfigError("dataset: sample length must be >= 1");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].signal.size() != t)
        throw ConfigError("dataset: sample " + std::to_string(i) + " length differs");
      if (!all_finite(samples[i].signal))
        throw ConfigError("dataset: sample " + std::to_string(i) + " has non-finite values");
      if (samples[i].label < 0)
        throw ConfigError("dataset: sample " + std::to_string(i) + " has negative label");
    }
    if (!masks.empty()) {
      if (masks.size() != samples.size()) throw ConfigError("dataset: mask count != sample count");
      for (std::size_t i = 0; i < masks.size(); ++i)
        if (masks[i].size() != static_cast<std::size_t>(t))
          throw ConfigError("dataset: mask " + std::to_string(i) + " length differs");
    }
  }
};

}  // namespace datom
