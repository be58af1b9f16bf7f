// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mtse/training/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mtse/core/errors.h"
#include "mtse/datagen/io.h"
#include "mtse/training/checkpoint.h"
#include "mtse/training/optimizer.h"

namespace mtse {

namespace {

enum Stream : std::uint64_t { kShuffle = 0x5f, kMasks = 0xa5, kValidation = 0x7a };

struct LoopState {
  int epoch = 0;  // last completed epoch
  double best_val = 1e300;
  int best_epoch = 0;
  int since_best = 0;
  std::vector<EpochRecord> history;
};

void WriteHistory(const std::filesystem::path &dir,
                  const std::vector<EpochRecord> &history) {
  std::string text;
  for (const auto &r : history) text += nlohmann::json(r).dump() + "\n";
  data::WriteFileIfChanged(dir / kHistoryFile, text);
}

Checkpoint MakeCheckpoint(const MtseModel &model, const TrainConfig &config,
                          const TrainOptions &options, const LoopState &state,
                          const std::vector<ad::Matrix> &best, const Adam &adam,
                          const PlateauScheduler &scheduler) {
  Checkpoint ckpt;
  ckpt.meta["model"] = model.config();
  ckpt.meta["train"] = config;
  ckpt.meta["strategy"] = ToString(config.strategy);
  ckpt.meta["init_seed"] = options.init_seed;
  ckpt.meta["resume"] = {{"epoch", state.epoch},
                         {"best_val", state.best_val},
                         {"best_epoch", state.best_epoch},
                         {"since_best", state.since_best},
                         {"lr", adam.lr()},
                         {"adam_step", adam.state().step},
                         {"plateau_best", scheduler.best()},
                         {"plateau_bad", scheduler.bad_epochs()},
                         {"history", state.history}};
  const auto &items = model.params().items();
  for (std::size_t k = 0; k < items.size(); ++k) {
    ckpt.Put("param/" + items[k]->name, best[k]);
    ckpt.Put("resume/param/" + items[k]->name, items[k]->value);
    ckpt.Put("resume/adam_m/" + items[k]->name, adam.state().m[k]);
    ckpt.Put("resume/adam_v/" + items[k]->name, adam.state().v[k]);
  }
  return ckpt;
}

[[noreturn]] void Diverged(const MtseModel &model, const TrainOptions &options,
                           int epoch, int batch_index, const Batch &batch,
                           double loss, double grad_norm) {
  nlohmann::json dump{{"epoch", epoch},
                      {"batch", batch_index},
                      {"loss", std::isfinite(loss) ? nlohmann::json(loss) : nlohmann::json(std::to_string(loss))},
                      {"grad_norm", std::isfinite(grad_norm) ? nlohmann::json(grad_norm)
                                                             : nlohmann::json(std::to_string(grad_norm))}};
  for (const auto *ex : batch) dump["examples"].push_back({{"index", ex->index}, {"target_id", ex->target_id}});
  for (const auto &p : model.params().items())
    dump["params"][p->name] = {{"value_finite", p->value.allFinite()},
                               {"grad_finite", p->grad.allFinite()},
                               {"value_norm", p->value.allFinite() ? p->value.norm() : -1.0}};
  std::string where = "";
  if (!options.out_dir.empty()) {
    const auto path = options.out_dir / "divergence_dump.json";
    data::WriteFileIfChanged(path, dump.dump(2) + "\n");
    where = "; state dumped to " + path.string();
  }
  throw TrainingError("non-finite loss or gradient at epoch " + std::to_string(epoch) +
                      ", batch " + std::to_string(batch_index) + where);
}

}  // namespace

int TrainConfig::EffectiveBatchSize() const {
  if (batch_size > 0) return batch_size;
  return strategy == Strategy::kMTT ? 7 : 20;
}

void TrainConfig::Validate() const {
  if (!(lr > 0) || weight_decay < 0 || batch_size < 0 || !(grad_clip_norm > 0) ||
      max_epochs < 1 || plateau_patience < 0 || !(plateau_factor > 0 && plateau_factor < 1) ||
      early_stop_patience < 1)
    throw ConfigError("train: lr, clip norm, epochs and patience must be positive; "
                      "plateau_factor in (0, 1)");
}

void to_json(nlohmann::json &j, const TrainConfig &c) {
  j = nlohmann::json{{"strategy", ToString(c.strategy)},
                     {"lr", c.lr},
                     {"weight_decay", c.weight_decay},
                     {"batch_size", c.batch_size},
                     {"grad_clip_norm", c.grad_clip_norm},
                     {"max_epochs", c.max_epochs},
                     {"plateau_patience", c.plateau_patience},
                     {"plateau_factor", c.plateau_factor},
                     {"early_stop_patience", c.early_stop_patience},
                     {"dynamic_mixing", c.dynamic_mixing},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json &j, TrainConfig &c) {
  TrainConfig d;
  c.strategy = ParseStrategy(j.value("strategy", ToString(d.strategy)));
  c.lr = j.value("lr", d.lr);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.grad_clip_norm = j.value("grad_clip_norm", d.grad_clip_norm);
  c.max_epochs = j.value("max_epochs", d.max_epochs);
  c.plateau_patience = j.value("plateau_patience", d.plateau_patience);
  c.plateau_factor = j.value("plateau_factor", d.plateau_factor);
  c.early_stop_patience = j.value("early_stop_patience", d.early_stop_patience);
  c.dynamic_mixing = j.value("dynamic_mixing", d.dynamic_mixing);
  c.seed = j.value("seed", d.seed);
}

void to_json(nlohmann::json &j, const EpochRecord &r) {
  j = nlohmann::json{{"epoch", r.epoch},
                     {"train_loss", r.train_loss},
                     {"val_loss", r.val_loss},
                     {"lr", r.lr},
                     {"best_val_loss", r.best_val_loss},
                     {"max_grad_norm", r.max_grad_norm},
                     {"seconds", r.seconds}};
}

void from_json(const nlohmann::json &j, EpochRecord &r) {
  r.epoch = j.at("epoch").get<int>();
  r.train_loss = j.at("train_loss").get<double>();
  r.val_loss = j.at("val_loss").get<double>();
  r.lr = j.at("lr").get<double>();
  r.best_val_loss = j.value("best_val_loss", r.val_loss);
  r.max_grad_norm = j.value("max_grad_norm", 0.0);
  r.seconds = j.value("seconds", 0.0);
}

double ValidationLoss(const MtseModel &model, const TrainConfig &config,
                      const std::vector<data::MixtureExample> &split) {
  MTSE_REQUIRE(!split.empty(), ConfigError, "validation split is empty");
  Rng rng = MakeRng(config.seed, {kValidation});
  double total = 0;
  for (const auto &ex : split) {
    const Batch one{&ex};
    total += StrategyLoss(config.strategy, model, one, rng, false).total;
  }
  return total / split.size();
}

TrainResult Train(MtseModel &model, const TrainConfig &config,
                  const data::Corpus &corpus, const TrainOptions &options) {
  config.Validate();
  MTSE_REQUIRE(!corpus.train.empty(), ConfigError, "corpus has no training examples");
  MTSE_REQUIRE(!corpus.val.empty(), ConfigError, "corpus has no validation examples");

  ParameterSet &params = model.params();
  Adam adam(params, config.lr, config.weight_decay);
  PlateauScheduler scheduler(config.plateau_factor, config.plateau_patience);
  LoopState state;
  std::vector<ad::Matrix> best = params.Snapshot();
  const std::filesystem::path ckpt_path =
      options.out_dir.empty() ? std::filesystem::path() : options.out_dir / kCheckpointFile;

  if (options.resume) {
    MTSE_REQUIRE(!ckpt_path.empty() && std::filesystem::exists(ckpt_path), ConfigError,
                 "--resume given but no checkpoint exists in the output directory");
    const Checkpoint ckpt = LoadCheckpoint(ckpt_path);
    const auto &r = ckpt.meta.at("resume");
    GetParameters(ckpt, params, "param/");
    best = params.Snapshot();
    GetParameters(ckpt, params, "resume/param/");
    Adam::State st;
    st.step = r.at("adam_step").get<long>();
    for (const auto &p : params.items()) {
      st.m.push_back(ckpt.Tensor("resume/adam_m/" + p->name));
      st.v.push_back(ckpt.Tensor("resume/adam_v/" + p->name));
    }
    adam.set_state(std::move(st));
    adam.set_lr(r.at("lr").get<double>());
    scheduler.Restore(r.at("plateau_best").get<double>(), r.at("plateau_bad").get<int>());
    state.epoch = r.at("epoch").get<int>();
    state.best_val = r.at("best_val").get<double>();
    state.best_epoch = r.at("best_epoch").get<int>();
    state.since_best = r.at("since_best").get<int>();
    state.history = r.at("history").get<std::vector<EpochRecord>>();
  }

  TrainResult result;
  result.stop_reason = "max_epochs";
  if (state.since_best >= config.early_stop_patience) result.stop_reason = "early_stop";
  const int batch_size = config.EffectiveBatchSize();

  while (state.epoch < config.max_epochs &&
         state.since_best < config.early_stop_patience) {
    const int epoch = state.epoch + 1;
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<data::MixtureExample> remixed =
        config.dynamic_mixing ? data::DynamicRemix(corpus.train, corpus.spec, epoch, config.seed)
                              : std::vector<data::MixtureExample>();
    const auto &items = config.dynamic_mixing ? remixed : corpus.train;
    std::vector<int> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = MakeRng(config.seed, {kShuffle, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), shuffle);
    Rng mask_rng = MakeRng(config.seed, {kMasks, static_cast<std::uint64_t>(epoch)});

    double loss_sum = 0, max_norm = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
      Batch batch;
      for (std::size_t k = start; k < std::min(order.size(), start + batch_size); ++k)
        batch.push_back(&items[order[k]]);
      params.ZeroGrad();
      const LossBreakdown loss = StrategyLoss(config.strategy, model, batch, mask_rng, true);
      if (!std::isfinite(loss.total))
        Diverged(model, options, epoch, batch_index, batch, loss.total, params.GradNorm());
      const double norm = ClipGradNorm(params, config.grad_clip_norm);
      if (!std::isfinite(norm)) Diverged(model, options, epoch, batch_index, batch, loss.total, norm);
      max_norm = std::max(max_norm, norm);
      adam.Step();
      loss_sum += loss.total * batch.size();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / items.size();
    rec.val_loss = ValidationLoss(model, config, corpus.val);
    rec.lr = adam.lr();
    rec.max_grad_norm = max_norm;
    if (!std::isfinite(rec.val_loss))
      Diverged(model, options, epoch, -1, {}, rec.val_loss, 0.0);
    if (rec.val_loss < state.best_val) {
      state.best_val = rec.val_loss;
      state.best_epoch = epoch;
      state.since_best = 0;
      best = params.Snapshot();
    } else {
      ++state.since_best;
    }
    scheduler.Step(rec.val_loss, adam);
    rec.best_val_loss = state.best_val;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    state.epoch = epoch;
    state.history.push_back(rec);

    if (!options.out_dir.empty()) {
      SaveCheckpoint(ckpt_path, MakeCheckpoint(model, config, options, state, best, adam, scheduler));
      WriteHistory(options.out_dir, state.history);
    }
    if (options.on_epoch) options.on_epoch(rec);
    if (state.since_best >= config.early_stop_patience) result.stop_reason = "early_stop";
  }

  params.Restore(best);
  result.history = state.history;
  result.best_val_loss = state.best_val;
  result.best_epoch = state.best_epoch;
  return result;
}

}  // namespace mtse
