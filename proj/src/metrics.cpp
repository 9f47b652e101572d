#include "datom/metrics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace datom {

namespace {

void check_lengths(const Signal& x, const Signal& x_hat, const char* what) {
  if (x.size() != x_hat.size()) throw std::invalid_argument(std::string(what) + ": length mismatch");
  if (x.size() == 0) throw std::invalid_argument(std::string(what) + ": empty signal");
}

}  // namespace

double rmse(const Signal& x, const Signal& x_hat) {
  check_lengths(x, x_hat, "rmse");
  return std::sqrt((x - x_hat).square().mean());
}

double mae(const Signal& x, const Signal& x_hat) {
  check_lengths(x, x_hat, "mae");
  return (x - x_hat).abs().mean();
}

double nmae(const Signal& x, const Signal& x_hat) {
  check_lengths(x, x_hat, "nmae");
  const double denom = x.abs().mean();
  if (denom == 0.0) throw NumericError("nmae: reference signal is all zero");
  return (x - x_hat).abs().mean() / denom;
}

Periodogram periodogram(const Signal& x, double sampling_rate) {
  if (x.size() == 0) throw std::invalid_argument("periodogram: empty signal");
  if (!(sampling_rate > 0.0)) throw std::invalid_argument("periodogram: sampling rate must be positive");
  const Eigen::Index t = x.size();
  const Eigen::Index bins = t / 2 + 1;  // k = 0 .. floor(T/2)
  Periodogram p;
  p.frequency.resize(bins);
  p.power.resize(bins);
  const double w = -2.0 * std::numbers::pi / static_cast<double>(t);
  for (Eigen::Index k = 0; k < bins; ++k) {
    double re = 0.0, im = 0.0;
    for (Eigen::Index i = 0; i < t; ++i) {
      const double a = w * static_cast<double>(k) * static_cast<double>(i);
      re += x(i) * std::cos(a);
      im += x(i) * std::sin(a);
    }
    double pw = (re * re + im * im) / (sampling_rate * static_cast<double>(t));
    const bool interior = k != 0 && !(t % 2 == 0 && k == t / 2);
    if (interior) pw *= 2.0;  // fold the conjugate half
    p.frequency(k) = static_cast<double>(k) * sampling_rate / static_cast<double>(t);
    p.power(k) = pw;
  }
  return p;
}

EvalReport evaluate_sample(const Signal& x, const Signal& x_hat, const std::vector<Signal>& components) {
  EvalReport r;
  r.rmse = rmse(x, x_hat);
  r.mae = mae(x, x_hat);
  r.nmae = x.abs().mean() == 0.0 ? std::nan("") : nmae(x, x_hat);
  r.component_rmse.reserve(components.size());
  for (const auto& c : components) r.component_rmse.push_back(rmse(x, c));
  return r;
}

}  // namespace datom
