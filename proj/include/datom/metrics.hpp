#pragma once

#include "datom/signal.hpp"

#include <vector>

namespace datom {

double rmse(const Signal& x, const Signal& x_hat);
double mae(const Signal& x, const Signal& x_hat);

// mean |x - x_hat| / mean |x|; throws NumericError when x is all zero.
double nmae(const Signal& x, const Signal& x_hat);

// One-sided power spectral density of a real series, |DFT|^2 / (fs * T) with
// the interior bins doubled, so sum(power) * fs/T equals mean(x^2). Direct
// O(T^2) transform.
struct Periodogram {
  Eigen::ArrayXd frequency;
  Eigen::ArrayXd power;
};
Periodogram periodogram(const Signal& x, double sampling_rate);

// Reconstruction quality of one decomposed sample. nmae is NaN when the
// original is all zero. component_rmse[k] is rmse(x, components[k]).
struct EvalReport {
  double rmse = 0.0;
  double mae = 0.0;
  double nmae = 0.0;
  std::vector<double> component_rmse;
};
EvalReport evaluate_sample(const Signal& x, const Signal& x_hat, const std::vector<Signal>& components);

}  // namespace datom
