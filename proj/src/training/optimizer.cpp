// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mtse/training/optimizer.h"

#include <cmath>

#include "mtse/core/errors.h"

namespace mtse {

double ClipGradNorm(ParameterSet &params, double max_norm) {
  const double norm = params.GradNorm();
  if (norm > max_norm && std::isfinite(norm)) {
    const double scale = max_norm / norm;
    for (const auto &p : params.items()) p->grad *= scale;
  }
  return norm;
}

Adam::Adam(ParameterSet &params, double lr, double weight_decay, double beta1,
           double beta2, double eps)
    : params_(params),
      lr_(lr),
      weight_decay_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {
  for (const auto &p : params_.items()) {
    state_.m.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
    state_.v.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::set_state(State state) {
  MTSE_REQUIRE(state.m.size() == params_.size() && state.v.size() == params_.size(),
               InvalidInput, "optimizer state does not match the parameters");
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const auto &p = params_.items()[k]->value;
    MTSE_REQUIRE(state.m[k].rows() == p.rows() && state.m[k].cols() == p.cols() &&
                     state.v[k].rows() == p.rows() && state.v[k].cols() == p.cols(),
                 InvalidInput, "optimizer state shape mismatch");
  }
  state_ = std::move(state);
}

void Adam::Step() {
  ++state_.step;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(state_.step));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(state_.step));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    ad::Parameter &p = *params_.items()[k];
    ad::Matrix g = p.grad;
    if (weight_decay_ != 0) g += weight_decay_ * p.value;
    state_.m[k] = beta1_ * state_.m[k] + (1 - beta1_) * g;
    state_.v[k] = beta2_ * state_.v[k] + (1 - beta2_) * g.cwiseProduct(g);
    p.value.array() -= lr_ * (state_.m[k].array() / c1) /
                       ((state_.v[k].array() / c2).sqrt() + eps_);
  }
}

bool PlateauScheduler::Step(double value, Adam &optimizer) {
  if (value < best_) {
    best_ = value;
    bad_epochs_ = 0;
    return false;
  }
  if (++bad_epochs_ > patience_) {
    optimizer.set_lr(optimizer.lr() * factor_);
    bad_epochs_ = 0;
    return true;
  }
  return false;
}

}  // namespace mtse
