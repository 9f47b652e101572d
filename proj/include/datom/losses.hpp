#pragma once

#include "datom/autodiff.hpp"
#include "datom/signal.hpp"

#include <vector>

namespace datom {

// Two-stage schedule of the artifact estimator objective: before the switch
// epoch the masked residual excludes the signal estimate, afterwards it is
// included (refined form).
enum class NoisePhase { initial, refined };

// mean_i (x[i] - x_hat[i])^2
Expr fidelity_loss(Expr x, Expr x_hat);

// Matching class reconstructs, the others are pushed to zero:
// y == c -> mean (x - recon_c)^2, else mean recon_c^2.
Expr supervised_loss(Expr x, int y, int c, Expr recon_c);

// Plain sum of |z| over every activation signal; with normalize the sum is
// divided by the total entry count.
Expr sparsity_loss(const std::vector<Expr>& zs, bool normalize = false);

// mean (x - (s_hat + n_hat))^2
Expr noise_loss_S(Expr x, Expr s_hat, Expr n_hat);

// Masked mean of the artifact residual plus unmasked mean of n_hat^2; an
// empty partition contributes zero. In the refined phase pass s_hat (detach
// it when the signal bank must not receive this loss's gradient).
Expr noise_loss_N(Expr x, Expr n_hat, const NoiseMask& mask, const Expr* s_hat, NoisePhase phase);

// Reconstruction error of the summed components plus the mean power of every
// non-target component (y is the 1-based target class).
Expr ssvep_loss(Expr x, const std::vector<Expr>& components, int y);

// Value-only forms for reporting and tests.
double fidelity_loss(const Signal& x, const Signal& x_hat);
double supervised_loss(const Signal& x, int y, int c, const Signal& recon_c);
double sparsity_loss(const std::vector<Signal>& zs, bool normalize = false);
double noise_loss_S(const Signal& x, const Signal& s_hat, const Signal& n_hat);
double noise_loss_N(const Signal& x, const Signal& n_hat, const NoiseMask& mask, const Signal* s_hat,
                    NoisePhase phase);
double ssvep_loss(const Signal& x, const std::vector<Signal>& components, int y);

}  // namespace datom
