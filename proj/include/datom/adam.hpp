#pragma once

#include "datom/autodiff.hpp"

#include <cmath>
#include <vector>

namespace datom {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Adam with bias correction. Weight decay enters as an L2 gradient term
// (g += wd * value) before the moment updates, identically for every
// parameter, atoms included.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto* p : params_) {
      m_.push_back(Eigen::ArrayXXd::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Eigen::ArrayXXd::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Parameter& p = *params_[i];
      Eigen::ArrayXXd g = p.grad;
      if (cfg_.weight_decay != 0.0) g += cfg_.weight_decay * p.value;
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.square();
      p.value -= cfg_.lr * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + cfg_.eps);
    }
  }

  // Drops the moment estimates of one parameter. Call after overwriting its
  // value out-of-band (reassignment), so stale momentum does not tear up the
  // fresh weights on the next step.
  void reset_state(const Parameter* p) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i] == p) {
        m_[i].setZero();
        v_[i].setZero();
      }
    }
  }

  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Eigen::ArrayXXd> m_, v_;
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace datom
