// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Batch losses for the three training strategies. Each loss is the batch
// mean of negative SI-SDR; with backward enabled the gradient of that mean
// is accumulated into the model parameters.
//
//   ST : one pass with both auxiliary streams.
//   MTT: three passes (both, enrolment + zero video stream, zero enrolment
//        waveform + video), weighted 1/3 each.
//   MDT: one pass per item with a sampled modality mask; a dropped
//        modality's embedding is replaced by zeros.

#ifndef MTSE_TRAINING_LOSSES_H_
#define MTSE_TRAINING_LOSSES_H_

#include <string>
#include <vector>

#include "mtse/core/random.h"
#include "mtse/datagen/corpus.h"
#include "mtse/model/mtse_model.h"

namespace mtse {

enum class Strategy { kST, kMTT, kMDT };

std::string ToString(Strategy s);
Strategy ParseStrategy(const std::string &name);  // throws ConfigError

struct ModalityMask {
  bool use_audio = true;
  bool use_video = true;
  bool operator==(const ModalityMask &) const = default;
};

inline constexpr ModalityMask kBothModalities{true, true};
inline constexpr ModalityMask kAudioOnly{true, false};
inline constexpr ModalityMask kVideoOnly{false, true};

// {both}, {video only}, {audio only}, each with probability 1/3.
ModalityMask SampleModalityMask(Rng &rng);

using Batch = std::vector<const data::MixtureExample *>;

struct LossBreakdown {
  double total = 0.0;
  std::vector<double> per_item;  // per-item loss (MTT: mean of branches)
  // MTT branch means; for ST/MDT only `av` is set (equal to total).
  double l_av = 0.0, l_a = 0.0, l_v = 0.0;
  // Estimates per item; MTT stores (av, a, v) consecutively.
  std::vector<Eigen::VectorXd> estimates;
  std::vector<ModalityMask> masks;  // MDT only
};

LossBreakdown LossSt(const MtseModel &model, const Batch &batch, bool backward);
LossBreakdown LossMtt(const MtseModel &model, const Batch &batch, bool backward);
LossBreakdown LossMdt(const MtseModel &model, const Batch &batch, Rng &rng,
                      bool backward);
// MDT with the masks given explicitly (one per item).
LossBreakdown LossMdtFixed(const MtseModel &model, const Batch &batch,
                           const std::vector<ModalityMask> &masks,
                           bool backward);

// Dispatches on strategy; `rng` only drives MDT masks.
LossBreakdown StrategyLoss(Strategy strategy, const MtseModel &model,
                           const Batch &batch, Rng &rng, bool backward);

}  // namespace mtse

#endif  // MTSE_TRAINING_LOSSES_H_
