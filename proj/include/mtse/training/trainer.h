// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MTSE_TRAINING_TRAINER_H_
#define MTSE_TRAINING_TRAINER_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtse/datagen/corpus.h"
#include "mtse/model/mtse_model.h"
#include "mtse/training/losses.h"

namespace mtse {

struct TrainConfig {
  Strategy strategy = Strategy::kMDT;
  double lr = 5e-4;
  double weight_decay = 1e-5;
  int batch_size = 0;  // 0: 20, or 7 for MTT
  double grad_clip_norm = 5.0;
  int max_epochs = 300;
  int plateau_patience = 5;
  double plateau_factor = 0.5;
  int early_stop_patience = 40;
  bool dynamic_mixing = true;
  std::uint64_t seed = 0;

  int EffectiveBatchSize() const;
  void Validate() const;  // throws ConfigError
};

void to_json(nlohmann::json &j, const TrainConfig &c);
void from_json(const nlohmann::json &j, TrainConfig &c);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double best_val_loss = 0.0;
  double max_grad_norm = 0.0;
  double seconds = 0.0;
};

void to_json(nlohmann::json &j, const EpochRecord &r);
void from_json(const nlohmann::json &j, EpochRecord &r);

struct TrainOptions {
  // When set: history.jsonl, model.ckpt (best weights plus resume state)
  // and, on divergence, divergence_dump.json are written here.
  std::filesystem::path out_dir;
  bool resume = false;
  std::uint64_t init_seed = 0;  // recorded so the model can be rebuilt
  std::function<void(const EpochRecord &)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  double best_val_loss = 0.0;
  int best_epoch = 0;
  std::string stop_reason;
};

// Trains in place and leaves the best-validation weights in `model`.
// Throws TrainingError on a non-finite loss or gradient.
TrainResult Train(MtseModel &model, const TrainConfig &config,
                  const data::Corpus &corpus, const TrainOptions &options = {});

// Strategy loss averaged over a split without gradients; MDT masks are
// drawn from a fixed stream so repeated calls agree.
double ValidationLoss(const MtseModel &model, const TrainConfig &config,
                      const std::vector<data::MixtureExample> &split);

inline constexpr const char *kCheckpointFile = "model.ckpt";
inline constexpr const char *kHistoryFile = "history.jsonl";

}  // namespace mtse

#endif  // MTSE_TRAINING_TRAINER_H_
