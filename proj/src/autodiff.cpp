#include "datom/autodiff.hpp"

#include "datom/conv.hpp"
#include "datom/rng.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace datom {

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

const Tape::Node& Tape::at(Expr e) const {
  if (e.tape != this || e.node < 0 || e.node >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("tape: expression does not belong to this tape");
  return nodes_[static_cast<std::size_t>(e.node)];
}

void Tape::check_same_tape(Expr a, Expr b) const {
  at(a);
  at(b);
}

Expr Tape::make(Op op, int a, int b, int c, Eigen::ArrayXXd value) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.c = c;
  n.value = std::move(value);
  n.needs_grad = (a >= 0 && nodes_[static_cast<std::size_t>(a)].needs_grad) ||
                 (b >= 0 && nodes_[static_cast<std::size_t>(b)].needs_grad) ||
                 (c >= 0 && nodes_[static_cast<std::size_t>(c)].needs_grad);
  return Expr{this, push(std::move(n))};
}

Expr Tape::input(Eigen::ArrayXXd v) {
  Node n;
  n.op = Op::kInput;
  n.value = std::move(v);
  return Expr{this, push(std::move(n))};
}

Expr Tape::input_signal(const Signal& x) { return input(x.matrix().array()); }

Expr Tape::param(Parameter& p) {
  Node n;
  n.op = Op::kParam;
  n.param = &p;
  n.value = p.value;
  n.needs_grad = true;
  return Expr{this, push(std::move(n))};
}

Expr Tape::conv1d(Expr x, Expr taps, const Expr* bias, int c_in, int c_out) {
  check_same_tape(x, taps);
  const Node& nx = at(x);
  const Node& nk = at(taps);
  if (nx.value.cols() != c_in) throw ConfigError("conv1d: input channels != c_in");
  if (nk.value.cols() != static_cast<Eigen::Index>(c_in) * c_out)
    throw ConfigError("conv1d: taps must be (P x c_in*c_out)");
  const double* bias_data = nullptr;
  int bias_node = -1;
  if (bias) {
    const Node& nb = at(*bias);
    if (nb.value.rows() != c_out || nb.value.cols() != 1) throw ConfigError("conv1d: bias must be (c_out x 1)");
    bias_data = nb.value.data();
    bias_node = bias->node;
  }
  Eigen::ArrayXXd out;
  causal_conv_into(nx.value, nk.value, c_in, c_out, bias_data, out);
  Expr e = make(Op::kConv, x.node, taps.node, bias_node, std::move(out));
  nodes_.back().c_in = c_in;
  nodes_.back().c_out = c_out;
  return e;
}

Expr Tape::relu(Expr x) { return make(Op::kRelu, x.node, -1, -1, at(x).value.max(0.0)); }

Expr Tape::add(Expr a, Expr b) {
  check_same_tape(a, b);
  if (at(a).value.rows() != at(b).value.rows() || at(a).value.cols() != at(b).value.cols())
    throw std::invalid_argument("add: shape mismatch");
  return make(Op::kAdd, a.node, b.node, -1, at(a).value + at(b).value);
}

Expr Tape::sub(Expr a, Expr b) {
  check_same_tape(a, b);
  if (at(a).value.rows() != at(b).value.rows() || at(a).value.cols() != at(b).value.cols())
    throw std::invalid_argument("sub: shape mismatch");
  return make(Op::kSub, a.node, b.node, -1, at(a).value - at(b).value);
}

Expr Tape::scale(Expr a, double k) {
  Expr e = make(Op::kScale, a.node, -1, -1, k * at(a).value);
  nodes_.back().k = k;
  return e;
}

Expr Tape::scalar_mul(Expr s, Expr v) {
  check_same_tape(s, v);
  if (at(s).value.size() != 1) throw std::invalid_argument("scalar_mul: first operand must be scalar");
  return make(Op::kScalarMul, s.node, v.node, -1, at(s).value(0, 0) * at(v).value);
}

Expr Tape::square(Expr a) { return make(Op::kSquare, a.node, -1, -1, at(a).value.square()); }

Expr Tape::abs(Expr a) { return make(Op::kAbs, a.node, -1, -1, at(a).value.abs()); }

Expr Tape::sum_all(Expr a) {
  Eigen::ArrayXXd out(1, 1);
  out(0, 0) = at(a).value.sum();
  return make(Op::kSumAll, a.node, -1, -1, std::move(out));
}

Expr Tape::mean_all(Expr a) {
  Eigen::ArrayXXd out(1, 1);
  out(0, 0) = at(a).value.mean();
  return make(Op::kMeanAll, a.node, -1, -1, std::move(out));
}

Expr Tape::time_sum(Expr a) {
  Eigen::ArrayXXd out = at(a).value.colwise().sum();
  return make(Op::kTimeSum, a.node, -1, -1, std::move(out));
}

Expr Tape::channel_sum(Expr a) {
  Eigen::ArrayXXd out = at(a).value.rowwise().sum();
  return make(Op::kChannelSum, a.node, -1, -1, std::move(out));
}

Expr Tape::linear(Expr v, Expr w, Expr b) {
  check_same_tape(v, w);
  check_same_tape(v, b);
  const Node& nv = at(v);
  const Node& nw = at(w);
  const Node& nb = at(b);
  if (nv.value.rows() != 1 || nw.value.cols() != 1 || nv.value.cols() != nw.value.rows() ||
      nb.value.size() != 1)
    throw std::invalid_argument("linear: expects (1 x C), (C x 1), (1 x 1)");
  Eigen::ArrayXXd out(1, 1);
  out(0, 0) = (nv.value.matrix() * nw.value.matrix())(0, 0) + nb.value(0, 0);
  return make(Op::kLinear, v.node, w.node, b.node, std::move(out));
}

Expr Tape::mask_keep(Expr a, const NoiseMask& mask, bool keep) {
  const Node& na = at(a);
  if (static_cast<Eigen::Index>(mask.size()) != na.value.rows())
    throw std::invalid_argument("mask_keep: mask length != rows");
  Eigen::ArrayXXd out = na.value;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    if ((mask[static_cast<std::size_t>(i)] != 0) != keep) out.row(i).setZero();
  Expr e = make(Op::kMaskKeep, a.node, -1, -1, std::move(out));
  nodes_.back().mask = mask;
  nodes_.back().keep = keep;
  return e;
}

Expr Tape::detach(Expr a) {
  Node n;
  n.op = Op::kDetach;
  n.value = at(a).value;
  return Expr{this, push(std::move(n))};
}

const Eigen::ArrayXXd& Tape::value(Expr e) const { return at(e).value; }

double Tape::scalar_value(Expr e) const {
  const Node& n = at(e);
  if (n.value.size() != 1) throw std::invalid_argument("scalar_value: node is not scalar");
  return n.value(0, 0);
}

void Tape::accumulate(int target, const Eigen::ArrayXXd& g) {
  Node& n = nodes_[static_cast<std::size_t>(target)];
  if (!n.needs_grad) return;
  if (!n.adj_set) {
    n.adj = g;
    n.adj_set = true;
  } else {
    n.adj += g;
  }
}

void Tape::backward(Expr root, double seed) {
  const Node& r = at(root);
  if (r.value.size() != 1) throw std::invalid_argument("backward: root must be scalar");

  for (auto& n : nodes_) n.adj_set = false;
  if (!nodes_[static_cast<std::size_t>(root.node)].needs_grad) return;  // no parameters involved

  Eigen::ArrayXXd seed_v(1, 1);
  seed_v(0, 0) = seed;
  accumulate(root.node, seed_v);

  for (int i = root.node; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.adj_set || !n.needs_grad) continue;
    const Eigen::ArrayXXd& g = n.adj;
    switch (n.op) {
      case Op::kInput:
      case Op::kDetach:
        break;
      case Op::kParam:
        n.param->grad += g;
        break;
      case Op::kConv: {
        Node& nx = nodes_[static_cast<std::size_t>(n.a)];
        Node& nk = nodes_[static_cast<std::size_t>(n.b)];
        if (nx.needs_grad) {
          if (!nx.adj_set) {
            nx.adj = Eigen::ArrayXXd::Zero(nx.value.rows(), nx.value.cols());
            nx.adj_set = true;
          }
          causal_conv_adjoint_input(g, nk.value, n.c_in, n.c_out, nx.adj);
        }
        if (nk.needs_grad) {
          if (!nk.adj_set) {
            nk.adj = Eigen::ArrayXXd::Zero(nk.value.rows(), nk.value.cols());
            nk.adj_set = true;
          }
          causal_conv_grad_taps(nx.value, g, nk.value.rows(), n.c_in, n.c_out, nk.adj);
        }
        if (n.c >= 0) {
          Node& nb = nodes_[static_cast<std::size_t>(n.c)];
          if (nb.needs_grad) {
            Eigen::ArrayXXd gb(n.c_out, 1);
            for (int co = 0; co < n.c_out; ++co) gb(co, 0) = g.col(co).sum();
            accumulate(n.c, gb);
          }
        }
        break;
      }
      case Op::kRelu:
        accumulate(n.a, (n.value > 0.0).select(g, 0.0));
        break;
      case Op::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::kSub:
        accumulate(n.a, g);
        accumulate(n.b, -g);
        break;
      case Op::kScale:
        accumulate(n.a, n.k * g);
        break;
      case Op::kScalarMul: {
        const Node& ns = nodes_[static_cast<std::size_t>(n.a)];
        const Node& nv = nodes_[static_cast<std::size_t>(n.b)];
        if (ns.needs_grad) {
          Eigen::ArrayXXd gs(1, 1);
          gs(0, 0) = (g * nv.value).sum();
          accumulate(n.a, gs);
        }
        accumulate(n.b, ns.value(0, 0) * g);
        break;
      }
      case Op::kSquare:
        accumulate(n.a, 2.0 * nodes_[static_cast<std::size_t>(n.a)].value * g);
        break;
      case Op::kAbs:
        accumulate(n.a, nodes_[static_cast<std::size_t>(n.a)].value.sign() * g);
        break;
      case Op::kSumAll: {
        const Node& nx = nodes_[static_cast<std::size_t>(n.a)];
        accumulate(n.a, Eigen::ArrayXXd::Constant(nx.value.rows(), nx.value.cols(), g(0, 0)));
        break;
      }
      case Op::kMeanAll: {
        const Node& nx = nodes_[static_cast<std::size_t>(n.a)];
        accumulate(n.a, Eigen::ArrayXXd::Constant(nx.value.rows(), nx.value.cols(),
                                                  g(0, 0) / static_cast<double>(nx.value.size())));
        break;
      }
      case Op::kTimeSum: {
        const Node& nx = nodes_[static_cast<std::size_t>(n.a)];
        Eigen::ArrayXXd gx(nx.value.rows(), nx.value.cols());
        for (Eigen::Index c = 0; c < gx.cols(); ++c) gx.col(c).setConstant(g(0, c));
        accumulate(n.a, gx);
        break;
      }
      case Op::kChannelSum: {
        const Node& nx = nodes_[static_cast<std::size_t>(n.a)];
        Eigen::ArrayXXd gx(nx.value.rows(), nx.value.cols());
        for (Eigen::Index c = 0; c < gx.cols(); ++c) gx.col(c) = g.col(0);
        accumulate(n.a, gx);
        break;
      }
      case Op::kLinear: {
        const Node& nv = nodes_[static_cast<std::size_t>(n.a)];
        const Node& nw = nodes_[static_cast<std::size_t>(n.b)];
        accumulate(n.a, g(0, 0) * nw.value.transpose());
        accumulate(n.b, g(0, 0) * nv.value.transpose());
        accumulate(n.c, g);
        break;
      }
      case Op::kMaskKeep: {
        Eigen::ArrayXXd gx = g;
        for (Eigen::Index r2 = 0; r2 < gx.rows(); ++r2)
          if ((n.mask[static_cast<std::size_t>(r2)] != 0) != n.keep) gx.row(r2).setZero();
        accumulate(n.a, gx);
        break;
      }
    }
  }
}

void Tape::reset() { nodes_.clear(); }

Expr operator+(Expr a, Expr b) { return a.tape->add(a, b); }
Expr operator-(Expr a, Expr b) { return a.tape->sub(a, b); }
Expr operator*(double k, Expr a) { return a.tape->scale(a, k); }
Expr relu(Expr a) { return a.tape->relu(a); }
Expr square(Expr a) { return a.tape->square(a); }
Expr abs(Expr a) { return a.tape->abs(a); }
Expr sum_all(Expr a) { return a.tape->sum_all(a); }
Expr mean_all(Expr a) { return a.tape->mean_all(a); }
Expr time_sum(Expr a) { return a.tape->time_sum(a); }
Expr channel_sum(Expr a) { return a.tape->channel_sum(a); }
Expr detach(Expr a) { return a.tape->detach(a); }
Expr scalar_mul(Expr s, Expr v) { return s.tape->scalar_mul(s, v); }
Expr linear(Expr v, Expr w, Expr b) { return v.tape->linear(v, w, b); }
Expr mask_keep(Expr a, const NoiseMask& mask, bool keep) { return a.tape->mask_keep(a, mask, keep); }

double finite_diff_check(const std::function<double()>& loss, const std::vector<Parameter*>& params,
                         const FdCheckOptions& opts) {
  for (auto* p : params) p->zero_grad();
  loss();
  std::vector<Eigen::ArrayXXd> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad);

  Rng rng(opts.seed);
  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    const Eigen::Index n = p.size();
    std::vector<Eigen::Index> coords;
    if (opts.max_coords_per_param <= 0 || n <= opts.max_coords_per_param) {
      coords.resize(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
    } else {
      std::unordered_set<Eigen::Index> seen;
      while (static_cast<int>(coords.size()) < opts.max_coords_per_param) {
        const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        if (seen.insert(i).second) coords.push_back(i);
      }
    }
    for (const Eigen::Index i : coords) {
      double* cell = p.value.data() + i;
      const double saved = *cell;
      *cell = saved + opts.h;
      const double lp = loss();
      *cell = saved - opts.h;
      const double lm = loss();
      *cell = saved;
      const double central = (lp - lm) / (2.0 * opts.h);
      const double a = analytic[pi].data()[i];
      worst = std::max(worst, std::abs(a - central) / std::max(1.0, std::abs(a)));
    }
  }
  for (auto* p : params) p->zero_grad();
  return worst;
}

}  // namespace datom
