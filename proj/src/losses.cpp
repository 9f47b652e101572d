#include "datom/losses.hpp"

#include <stdexcept>

namespace datom {

Expr fidelity_loss(Expr x, Expr x_hat) { return mean_all(square(x - x_hat)); }

Expr supervised_loss(Expr x, int y, int c, Expr recon_c) {
  if (y < 1 || c < 1) throw std::invalid_argument("supervised_loss: class indices are 1-based");
  if (y == c) return fidelity_loss(x, recon_c);
  return mean_all(square(recon_c));
}

Expr sparsity_loss(const std::vector<Expr>& zs, bool normalize) {
  if (zs.empty()) throw std::invalid_argument("sparsity_loss: no activation signals");
  Tape& t = *zs[0].tape;
  Expr total = sum_all(abs(zs[0]));
  Eigen::Index count = t.value(zs[0]).size();
  for (std::size_t i = 1; i < zs.size(); ++i) {
    total = total + sum_all(abs(zs[i]));
    count += t.value(zs[i]).size();
  }
  if (normalize) total = (1.0 / static_cast<double>(count)) * total;
  return total;
}

Expr noise_loss_S(Expr x, Expr s_hat, Expr n_hat) { return mean_all(square(x - (s_hat + n_hat))); }

Expr noise_loss_N(Expr x, Expr n_hat, const NoiseMask& mask, const Expr* s_hat, NoisePhase phase) {
  Tape& t = *x.tape;
  if (static_cast<Eigen::Index>(mask.size()) != t.value(x).rows())
    throw std::invalid_argument("noise_loss_N: mask length != signal length");
  if (phase == NoisePhase::refined && !s_hat)
    throw std::invalid_argument("noise_loss_N: refined phase needs s_hat");

  Eigen::Index inside = 0;
  for (auto m : mask) inside += m ? 1 : 0;
  const Eigen::Index outside = static_cast<Eigen::Index>(mask.size()) - inside;

  Expr loss = x.tape->input(Eigen::ArrayXXd::Zero(1, 1));
  if (inside > 0) {
    Expr target = phase == NoisePhase::refined ? (n_hat + *s_hat) : n_hat;
    Expr res = mask_keep(x - target, mask, true);
    loss = loss + (1.0 / static_cast<double>(inside)) * sum_all(square(res));
  }
  if (outside > 0) {
    Expr res = mask_keep(n_hat, mask, false);
    loss = loss + (1.0 / static_cast<double>(outside)) * sum_all(square(res));
  }
  return loss;
}

Expr ssvep_loss(Expr x, const std::vector<Expr>& components, int y) {
  if (components.empty()) throw std::invalid_argument("ssvep_loss: no components");
  if (y < 1 || y > static_cast<int>(components.size()))
    throw std::invalid_argument("ssvep_loss: target class out of range");
  Expr recon = components[0];
  for (std::size_t l = 1; l < components.size(); ++l) recon = recon + components[l];
  Expr loss = fidelity_loss(x, recon);
  for (std::size_t l = 0; l < components.size(); ++l)
    if (static_cast<int>(l) + 1 != y) loss = loss + mean_all(square(components[l]));
  return loss;
}

namespace {

double eval1(const Signal& a, const Signal& b, Expr (*f)(Expr, Expr)) {
  Tape t;
  return t.scalar_value(f(t.input_signal(a), t.input_signal(b)));
}

}  // namespace

double fidelity_loss(const Signal& x, const Signal& x_hat) { return eval1(x, x_hat, fidelity_loss); }

double supervised_loss(const Signal& x, int y, int c, const Signal& recon_c) {
  Tape t;
  return t.scalar_value(supervised_loss(t.input_signal(x), y, c, t.input_signal(recon_c)));
}

double sparsity_loss(const std::vector<Signal>& zs, bool normalize) {
  Tape t;
  std::vector<Expr> es;
  es.reserve(zs.size());
  for (const auto& z : zs) es.push_back(t.input_signal(z));
  return t.scalar_value(sparsity_loss(es, normalize));
}

double noise_loss_S(const Signal& x, const Signal& s_hat, const Signal& n_hat) {
  Tape t;
  return t.scalar_value(noise_loss_S(t.input_signal(x), t.input_signal(s_hat), t.input_signal(n_hat)));
}

double noise_loss_N(const Signal& x, const Signal& n_hat, const NoiseMask& mask, const Signal* s_hat,
                    NoisePhase phase) {
  Tape t;
  Expr xs = t.input_signal(x);
  Expr ns = t.input_signal(n_hat);
  if (s_hat) {
    Expr ss = t.input_signal(*s_hat);
    return t.scalar_value(noise_loss_N(xs, ns, mask, &ss, phase));
  }
  return t.scalar_value(noise_loss_N(xs, ns, mask, nullptr, phase));
}

double ssvep_loss(const Signal& x, const std::vector<Signal>& components, int y) {
  Tape t;
  std::vector<Expr> es;
  es.reserve(components.size());
  for (const auto& c : components) es.push_back(t.input_signal(c));
  return t.scalar_value(ssvep_loss(t.input_signal(x), es, y));
}

}  // namespace datom
