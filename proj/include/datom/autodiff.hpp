#pragma once

#include "datom/signal.hpp"

#include <functional>
#include <string>
#include <vector>

namespace datom {

// Trainable tensor. Shape is whatever the owning op expects: atoms and biases
// are (len x 1) columns, convolution taps are (P x C_in*C_out), the scalar
// head weight of a detector is (C x 1).
struct Parameter {
  std::string id;
  Eigen::ArrayXXd value;
  Eigen::ArrayXXd grad;

  Parameter() = default;
  Parameter(std::string name, Eigen::ArrayXXd v)
      : id(std::move(name)), value(std::move(v)), grad(Eigen::ArrayXXd::Zero(value.rows(), value.cols())) {}
  Parameter(std::string name, Eigen::Index rows, Eigen::Index cols)
      : id(std::move(name)),
        value(Eigen::ArrayXXd::Zero(rows, cols)),
        grad(Eigen::ArrayXXd::Zero(rows, cols)) {}

  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
};

class Tape;

// Handle to a tape node; cheap to copy, valid until Tape::reset().
struct Expr {
  Tape* tape = nullptr;
  int node = -1;
};

// Record-and-replay reverse-mode differentiation over the op set below.
// Every value is a dense (rows x cols) array; series are (T x C) with one
// column per channel and scalars are (1 x 1). Backward walks nodes in
// reverse creation order and accumulates (+=) into Parameter::grad, so
// repeated backward calls without zero_grad() add up.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Expr input(Eigen::ArrayXXd v);
  Expr input_signal(const Signal& x);  // column view copy, (T x 1)
  Expr param(Parameter& p);

  // Causal convolution; taps shaped (P x c_in*c_out) as in ConvKernel,
  // bias (c_out x 1) or absent.
  Expr conv1d(Expr x, Expr taps, const Expr* bias, int c_in, int c_out);

  Expr relu(Expr x);
  Expr add(Expr a, Expr b);
  Expr sub(Expr a, Expr b);
  Expr scale(Expr a, double k);
  Expr scalar_mul(Expr s, Expr v);  // s is (1 x 1)
  Expr square(Expr a);
  Expr abs(Expr a);             // subgradient 0 at 0
  Expr sum_all(Expr a);         // -> (1 x 1)
  Expr mean_all(Expr a);        // -> (1 x 1)
  Expr time_sum(Expr a);        // (T x C) -> (1 x C)
  Expr channel_sum(Expr a);     // (T x C) -> (T x 1)
  Expr linear(Expr v, Expr w, Expr b);  // (1 x C) . (C x 1) + (1 x 1)
  Expr mask_keep(Expr a, const NoiseMask& mask, bool keep);  // zero the rest
  Expr detach(Expr a);          // value passes, gradient stops

  const Eigen::ArrayXXd& value(Expr e) const;
  double scalar_value(Expr e) const;

  // Root must be (1 x 1); the root adjoint starts at `seed`.
  void backward(Expr root, double seed = 1.0);

  // Drops all nodes (handles invalidate); keeps allocation capacity.
  void reset();
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  enum class Op {
    kInput,
    kParam,
    kConv,
    kRelu,
    kAdd,
    kSub,
    kScale,
    kScalarMul,
    kSquare,
    kAbs,
    kSumAll,
    kMeanAll,
    kTimeSum,
    kChannelSum,
    kLinear,
    kMaskKeep,
    kDetach,
  };

  struct Node {
    Op op;
    int a = -1, b = -1, c = -1;
    double k = 0.0;
    int c_in = 0, c_out = 0;
    NoiseMask mask;
    bool keep = true;
    Parameter* param = nullptr;
    bool needs_grad = false;
    Eigen::ArrayXXd value;
    Eigen::ArrayXXd adj;
    bool adj_set = false;
  };

  int push(Node n);
  Expr make(Op op, int a, int b, int c, Eigen::ArrayXXd value);
  const Node& at(Expr e) const;
  void accumulate(int target, const Eigen::ArrayXXd& g);
  void check_same_tape(Expr a, Expr b) const;

  std::vector<Node> nodes_;
};

Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(double k, Expr a);
Expr relu(Expr a);
Expr square(Expr a);
Expr abs(Expr a);
Expr sum_all(Expr a);
Expr mean_all(Expr a);
Expr time_sum(Expr a);
Expr channel_sum(Expr a);
Expr detach(Expr a);
Expr scalar_mul(Expr s, Expr v);
Expr linear(Expr v, Expr w, Expr b);
Expr mask_keep(Expr a, const NoiseMask& mask, bool keep);

struct FdCheckOptions {
  double h = 1e-6;
  int max_coords_per_param = 40;  // <= 0 means every coordinate
  std::uint64_t seed = 1;
};

// Verifies analytic gradients against central differences. `loss` must build
// a fresh tape, run backward, and return the loss value, leaving gradients
// accumulated on the given parameters. Returns the maximum over sampled
// coordinates of |analytic - central| / max(1, |analytic|). Gradients are
// zeroed on exit.
double finite_diff_check(const std::function<double()>& loss, const std::vector<Parameter*>& params,
                         const FdCheckOptions& opts = {});

}  // namespace datom
