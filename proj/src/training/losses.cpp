// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mtse/training/losses.h"

#include <algorithm>
#include <cctype>

#include "mtse/core/errors.h"
#include "mtse/training/si_sdr.h"

namespace mtse {

namespace {

// Runs one pass, returns -SI-SDR and the estimate; backpropagates `weight`.
double Branch(const MtseModel &model, const data::MixtureExample &ex,
              const AuxInputs &aux, double weight, bool backward,
              Eigen::VectorXd &estimate) {
  ad::Tape tape(backward);
  ForwardOutput out = model.Forward(tape, ex.mixture, aux);
  ad::Var loss = ad::Scale(SiSdr(out.estimate, ex.target.samples), -1.0);
  if (backward) tape.Backward(loss, weight);
  estimate = out.estimate.value().row(0).transpose();
  return loss.value()(0, 0);
}

void RequireBatch(const Batch &batch) {
  MTSE_REQUIRE(!batch.empty(), InvalidInput, "empty training batch");
}

}  // namespace

std::string ToString(Strategy s) {
  switch (s) {
    case Strategy::kST:
      return "ST";
    case Strategy::kMTT:
      return "MTT";
    case Strategy::kMDT:
      return "MDT";
  }
  return "?";
}

Strategy ParseStrategy(const std::string &name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  if (upper == "ST") return Strategy::kST;
  if (upper == "MTT") return Strategy::kMTT;
  if (upper == "MDT") return Strategy::kMDT;
  throw ConfigError("unknown training strategy '" + name + "'");
}

ModalityMask SampleModalityMask(Rng &rng) {
  switch (UniformInt(rng, 0, 2)) {
    case 0:
      return kBothModalities;
    case 1:
      return kVideoOnly;
    default:
      return kAudioOnly;
  }
}

LossBreakdown LossSt(const MtseModel &model, const Batch &batch, bool backward) {
  RequireBatch(batch);
  LossBreakdown r;
  const double w = 1.0 / batch.size();
  for (const auto *ex : batch) {
    AuxInputs aux{&ex->enrolment, &ex->video};
    Eigen::VectorXd est;
    const double l = Branch(model, *ex, aux, w, backward, est);
    r.per_item.push_back(l);
    r.estimates.push_back(std::move(est));
    r.total += l * w;
  }
  r.l_av = r.total;
  return r;
}

LossBreakdown LossMtt(const MtseModel &model, const Batch &batch, bool backward) {
  RequireBatch(batch);
  LossBreakdown r;
  const double w = 1.0 / (3.0 * batch.size());
  const double item_w = 1.0 / batch.size();
  for (const auto *ex : batch) {
    const VideoFeatureStream no_video = ex->video.Zeroed();
    const AudioWaveform no_enrol{Eigen::VectorXd::Zero(ex->enrolment.size()),
                                 ex->enrolment.sample_rate};
    const AuxInputs branches[3] = {{&ex->enrolment, &ex->video},
                                   {&ex->enrolment, &no_video},
                                   {&no_enrol, &ex->video}};
    double l[3];
    for (int b = 0; b < 3; ++b) {
      Eigen::VectorXd est;
      l[b] = Branch(model, *ex, branches[b], w, backward, est);
      r.estimates.push_back(std::move(est));
    }
    r.l_av += l[0] * item_w;
    r.l_a += l[1] * item_w;
    r.l_v += l[2] * item_w;
    r.per_item.push_back((l[0] + l[1] + l[2]) / 3.0);
  }
  r.total = (r.l_av + r.l_a + r.l_v) / 3.0;
  return r;
}

LossBreakdown LossMdtFixed(const MtseModel &model, const Batch &batch,
                           const std::vector<ModalityMask> &masks,
                           bool backward) {
  RequireBatch(batch);
  MTSE_REQUIRE(masks.size() == batch.size(), InvalidInput,
               "one modality mask per batch item required");
  LossBreakdown r;
  const double w = 1.0 / batch.size();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto *ex = batch[i];
    const ModalityMask m = masks[i];
    MTSE_REQUIRE(m.use_audio || m.use_video, InvalidInput,
                 "modality mask drops both modalities");
    AuxInputs aux{&ex->enrolment, &ex->video};
    aux.drop_audio = !m.use_audio;
    aux.drop_video = !m.use_video;
    Eigen::VectorXd est;
    const double l = Branch(model, *ex, aux, w, backward, est);
    r.per_item.push_back(l);
    r.estimates.push_back(std::move(est));
    r.masks.push_back(m);
    r.total += l * w;
  }
  r.l_av = r.total;
  return r;
}

LossBreakdown LossMdt(const MtseModel &model, const Batch &batch, Rng &rng,
                      bool backward) {
  std::vector<ModalityMask> masks;
  for (std::size_t i = 0; i < batch.size(); ++i)
    masks.push_back(SampleModalityMask(rng));
  return LossMdtFixed(model, batch, masks, backward);
}

LossBreakdown StrategyLoss(Strategy strategy, const MtseModel &model,
                           const Batch &batch, Rng &rng, bool backward) {
  switch (strategy) {
    case Strategy::kST:
      return LossSt(model, batch, backward);
    case Strategy::kMTT:
      return LossMtt(model, batch, backward);
    case Strategy::kMDT:
      return LossMdt(model, batch, rng, backward);
  }
  throw ConfigError("unknown strategy");
}

}  // namespace mtse
