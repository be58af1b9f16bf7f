// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MTSE_TRAINING_OPTIMIZER_H_
#define MTSE_TRAINING_OPTIMIZER_H_

#include <vector>

#include "mtse/model/parameters.h"

namespace mtse {

// Scales all gradients so the global L2 norm is at most max_norm. Returns
// the norm before clipping.
double ClipGradNorm(ParameterSet &params, double max_norm);

// Adam with L2 weight decay added to the gradient (coupled).
class Adam {
 public:
  struct State {
    long step = 0;
    std::vector<ad::Matrix> m, v;
  };

  Adam(ParameterSet &params, double lr, double weight_decay = 0.0,
       double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void Step();
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  const State &state() const { return state_; }
  void set_state(State state);

 private:
  ParameterSet &params_;
  double lr_, weight_decay_, beta1_, beta2_, eps_;
  State state_;
};

// Multiplies the learning rate by `factor` once the monitored value has not
// strictly improved for more than `patience` consecutive epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double factor, int patience)
      : factor_(factor), patience_(patience) {}
  // Returns true if the rate was reduced.
  bool Step(double value, Adam &optimizer);

  double best() const { return best_; }
  int bad_epochs() const { return bad_epochs_; }
  void Restore(double best, int bad_epochs) {
    best_ = best;
    bad_epochs_ = bad_epochs;
  }

 private:
  double factor_;
  int patience_;
  double best_ = 1e300;
  int bad_epochs_ = 0;
};

}  // namespace mtse

#endif  // MTSE_TRAINING_OPTIMIZER_H_
