#pragma once

#include "datom/signal.hpp"

namespace datom {

// Kernel of a causal multi-channel convolution, conceptually [C_out, C_in, P].
// Stored as a (P x C_in*C_out) matrix so each tap vector is a contiguous
// column; column index = c_out * C_in + c_in.
struct ConvKernel {
  Eigen::ArrayXXd taps;
  int in_channels = 1;
  int out_channels = 1;

  ConvKernel() = default;
  ConvKernel(int c_in, int c_out, int p)
      : taps(Eigen::ArrayXXd::Zero(p, static_cast<Eigen::Index>(c_in) * c_out)),
        in_channels(c_in),
        out_channels(c_out) {}

  int size() const { return static_cast<int>(taps.rows()); }
  double& at(int c_out, int c_in, int j) { return taps(j, static_cast<Eigen::Index>(c_out) * in_channels + c_in); }
  double at(int c_out, int c_in, int j) const {
    return taps(j, static_cast<Eigen::Index>(c_out) * in_channels + c_in);
  }
};

// out[c,i] = sum_{c'} sum_{j=0}^{P-1} k[c,c',j] x[c',i-j] (+ bias[c]),
// indices i-j < 0 read as zero. Output length equals input length.
inline void causal_conv_into(const Eigen::Ref<const Eigen::ArrayXXd>& x,
                             const Eigen::Ref<const Eigen::ArrayXXd>& taps, int c_in, int c_out,
                             const double* bias, Eigen::ArrayXXd& out) {
  const Eigen::Index t = x.rows();
  const Eigen::Index p = taps.rows();
  out.resize(t, c_out);
  for (int co = 0; co < c_out; ++co) {
    if (bias)
      out.col(co) = bias[co];
    else
      out.col(co).setZero();
    for (int ci = 0; ci < c_in; ++ci) {
      const auto k = taps.col(static_cast<Eigen::Index>(co) * c_in + ci);
      for (Eigen::Index j = 0; j < p && j < t; ++j)
        out.col(co).segment(j, t - j) += k(j) * x.col(ci).segment(0, t - j);
    }
  }
}

inline MultiSignal causal_conv(const MultiSignal& x, const ConvKernel& k,
                               const Eigen::VectorXd* bias = nullptr) {
  if (x.cols() != k.in_channels)
    throw ConfigError("causal_conv: input has " + std::to_string(x.cols()) + " channels, kernel expects " +
                      std::to_string(k.in_channels));
  if (bias && bias->size() != k.out_channels) throw ConfigError("causal_conv: bias size != out channels");
  MultiSignal out;
  causal_conv_into(x, k.taps, k.in_channels, k.out_channels, bias ? bias->data() : nullptr, out);
  return out;
}

// Adjoint of causal_conv_into with respect to the input (a correlation):
// gx[c',i] += sum_c sum_j k[c,c',j] gout[c,i+j].
inline void causal_conv_adjoint_input(const Eigen::Ref<const Eigen::ArrayXXd>& gout,
                                      const Eigen::Ref<const Eigen::ArrayXXd>& taps, int c_in, int c_out,
                                      Eigen::ArrayXXd& gx_accum) {
  const Eigen::Index t = gout.rows();
  const Eigen::Index p = taps.rows();
  for (int co = 0; co < c_out; ++co)
    for (int ci = 0; ci < c_in; ++ci) {
      const auto k = taps.col(static_cast<Eigen::Index>(co) * c_in + ci);
      for (Eigen::Index j = 0; j < p && j < t; ++j)
        gx_accum.col(ci).segment(0, t - j) += k(j) * gout.col(co).segment(j, t - j);
    }
}

// Gradient with respect to the taps: gk[c,c',j] += <gout[c, j:], x[c', :T-j]>.
inline void causal_conv_grad_taps(const Eigen::Ref<const Eigen::ArrayXXd>& x,
                                  const Eigen::Ref<const Eigen::ArrayXXd>& gout, Eigen::Index p,
                                  int c_in, int c_out, Eigen::ArrayXXd& gtaps_accum) {
  const Eigen::Index t = x.rows();
  for (int co = 0; co < c_out; ++co)
    for (int ci = 0; ci < c_in; ++ci)
      for (Eigen::Index j = 0; j < p && j < t; ++j)
        gtaps_accum(j, static_cast<Eigen::Index>(co) * c_in + ci) +=
            (gout.col(co).segment(j, t - j) * x.col(ci).segment(0, t - j)).sum();
}

inline MultiSignal relu(const MultiSignal& x) { return x.max(0.0); }

// Atom reconstruction: single-channel causal convolution, no bias.
inline Signal atom_conv(const Signal& z, const Signal& atom) {
  const Eigen::Index t = z.size();
  Signal out = Signal::Zero(t);
  for (Eigen::Index j = 0; j < atom.size() && j < t; ++j)
    out.segment(j, t - j) += atom(j) * z.segment(0, t - j);
  return out;
}

}  // namespace datom
