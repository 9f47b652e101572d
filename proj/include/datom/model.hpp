#pragma once

#include "datom/autodiff.hpp"
#include "datom/rng.hpp"
#include "datom/signal.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace datom {

struct ConvLayerSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel_size = 1;
};

// A detector is a stack of causal conv layers, each followed by a ReLU. When
// the last conv has more than one output channel the channels are summed
// before its ReLU, so the series output is always a single non-negative
// channel. With final_scalar the conv stack is followed by a global time sum,
// a dense map to one value, and a ReLU, giving one non-negative scalar.
struct DetectorSpec {
  std::vector<ConvLayerSpec> layers;
  bool final_scalar = false;

  void validate() const;
};

struct DetectorParams {
  DetectorSpec spec;
  std::vector<Parameter> taps;    // one (P x in*out) per layer
  std::vector<Parameter> biases;  // one (out x 1) per layer
  std::optional<Parameter> head_w, head_b;  // final_scalar only
};

struct DetectorAtomPair {
  DetectorParams detector;
  Parameter atom;  // (M x 1), convolved without bias
};

// Initialization draws every entry uniform in (-b, b), b = 1/sqrt(fan_in * P)
// for conv layers (bias included), b = 1/sqrt(M) for atoms, b = 1/sqrt(C) for
// the scalar head. Draw order is fixed: per layer taps then bias, head after
// the last layer, atom last.
DetectorParams init_detector(const std::string& prefix, const DetectorSpec& spec, Rng& rng);
Parameter init_atom(const std::string& id, int atom_len, Rng& rng);
DetectorAtomPair init_pair(const std::string& prefix, const DetectorSpec& spec, int atom_len, Rng& rng);

void collect_parameters(DetectorParams& d, std::vector<Parameter*>& out);

// x -> z: series detector on the tape. With track=false the weights enter as
// plain inputs so no gradient reaches them.
Expr detector_forward(Tape& t, DetectorParams& d, Expr x, bool track);
// z -> component: causal atom convolution, no bias.
Expr atom_forward(Tape& t, Parameter& atom, Expr z, bool track);
// Scalar detector (final_scalar spec).
Expr detector_forward_scalar(Tape& t, DetectorParams& d, Expr x, bool track);

struct BankForward {
  std::vector<Expr> activations;
  std::vector<Expr> components;
  Expr reconstruction;
};
BankForward bank_forward(Tape& t, std::vector<DetectorAtomPair>& pairs, Expr x, bool track);

// Unsupervised / supervised decomposer: x ~ sum_n atom_n * detector_n(x).
struct BasicDecomposer {
  std::vector<DetectorAtomPair> pairs;

  static BasicDecomposer init(int n_pairs, const DetectorSpec& det, int atom_len, Rng& rng);
  std::vector<Parameter*> parameters();
  int atom_length() const { return pairs.empty() ? 0 : static_cast<int>(pairs[0].atom.value.rows()); }
};
BankForward basic_forward(Tape& t, BasicDecomposer& m, Expr x, bool track = true);

// Signal/noise split: the noise bank reads x first, the signal bank reads the
// residual x - n_hat.
struct NoiseDecomposer {
  std::vector<DetectorAtomPair> signal_pairs;
  std::vector<DetectorAtomPair> noise_pairs;

  static NoiseDecomposer init(int n_signal, int n_noise, const DetectorSpec& det, int atom_len, Rng& rng);
  std::vector<Parameter*> parameters();
};
struct NoiseForwardResult {
  BankForward noise;   // n_hat = noise.reconstruction
  BankForward signal;  // s_hat = signal.reconstruction
  Expr n_hat, s_hat;
};
// cross_detach stops gradients between the two estimators: the signal bank
// sees a detached n_hat, so each bank is trained by its own loss alone.
NoiseForwardResult noise_forward(Tape& t, NoiseDecomposer& m, Expr x, bool track = true,
                                 bool cross_detach = false);

// One detector per stimulus class, a single atom shared by all of them.
struct SSVEPDecomposer {
  std::vector<DetectorParams> detectors;
  Parameter atom;

  static SSVEPDecomposer init(int n_classes, const DetectorSpec& det, int atom_len, Rng& rng);
  std::vector<Parameter*> parameters();
  int n_classes() const { return static_cast<int>(detectors.size()); }
};
struct SSVEPForwardResult {
  std::vector<Expr> activations;
  std::vector<Expr> components;
  Expr reconstruction;
};
SSVEPForwardResult ssvep_forward(Tape& t, SSVEPDecomposer& m, Expr x, bool track = true);

// Scalar detectors weighting full-length atoms: x ~ sum_p d_p(x) * a_p.
// Pairs are assigned to classes in contiguous blocks (1-based, like labels).
struct ERPDecomposer {
  std::vector<DetectorAtomPair> pairs;  // detectors are final_scalar
  int num_classes = 1;
  std::vector<int> pair_class;

  static ERPDecomposer init(int n_pairs, int n_classes, const DetectorSpec& det, int input_len, Rng& rng);
  std::vector<Parameter*> parameters();
  int input_length() const { return pairs.empty() ? 0 : static_cast<int>(pairs[0].atom.value.rows()); }
};
struct ERPForwardResult {
  std::vector<Expr> weights;  // scalars d_p(x)
  std::vector<Expr> components;
  Expr reconstruction;
};
ERPForwardResult erp_forward(Tape& t, ERPDecomposer& m, Expr x, bool track = true);

// Atoms whose l2 norm falls below threshold * median(l2 norms of the bank).
std::vector<int> detect_dead_atoms(const std::vector<DetectorAtomPair>& bank, double threshold);

// Revives pair `dead` from pair `donor`: the donor detector weights are
// copied verbatim, the donor atom is split in half time-wise, the dead pair
// taking the first half (padded with zeros) and the donor keeping the second.
// The summed output of the two pairs reproduces the donor's previous output.
void atom_reassign(std::vector<DetectorAtomPair>& bank, int dead, int donor);

enum class Arch { basic, noise, ssvep, erp };
using ModelVariant = std::variant<BasicDecomposer, NoiseDecomposer, SSVEPDecomposer, ERPDecomposer>;

Arch arch_of(const ModelVariant& m);
std::string arch_name(Arch a);
Arch arch_from_name(const std::string& name);
std::vector<Parameter*> parameters(ModelVariant& m);
std::vector<std::vector<DetectorAtomPair>*> reassignable_banks(ModelVariant& m);

// Plain-value decomposition of one signal (no gradients).
struct Decomposition {
  std::vector<std::string> names;  // parallel to components
  std::vector<Signal> components;
  Signal reconstruction;
  std::vector<double> weights;               // erp only
  std::optional<Signal> s_hat, n_hat;        // noise only
};
Decomposition decompose(const ModelVariant& m, const Signal& x);

// Model file: magic "DTMM", version, architecture tag and layer table, then
// every parameter as little-endian float32 in declaration order. Loading
// therefore reproduces a saved model exactly at float32 precision.
void save_model(std::ostream& os, const ModelVariant& m);
void save_model(const std::string& path, const ModelVariant& m);
ModelVariant load_model(std::istream& is);
ModelVariant load_model(const std::string& path);

// Rounds every parameter through float32; save/load is then value-exact.
void quantize_f32(ModelVariant& m);

}  // namespace datom
