// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Experiment configuration and the command implementations behind the
// `mtse` tool. Resolution order: preset, config file, MTSE_* environment
// variables, command-line overrides (last wins).

#ifndef MTSE_CLI_EXPERIMENT_H_
#define MTSE_CLI_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtse/datagen/corpus.h"
#include "mtse/evaluation/evaluation.h"
#include "mtse/model/config.h"
#include "mtse/training/trainer.h"

namespace mtse::cli {

struct ExperimentPaths {
  std::filesystem::path corpus_dir = "corpus";
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path report_dir = "reports";
};

struct EvalSettings {
  std::vector<ConditionKind> conditions = AllConditions();
  double fd_rate = 1.0 / 3.0;
};

struct ExperimentConfig {
  std::string preset;
  std::uint64_t seed = 0;
  ModelConfig model;
  TrainConfig train;
  data::CorpusSpec corpus;
  EvalSettings eval;
  ExperimentPaths paths;

  // e.g. "noncausal_MDT_gLN"; names checkpoint and report directories.
  std::string Tag() const;
  std::filesystem::path CheckpointDir() const { return paths.checkpoint_dir / Tag(); }
  std::filesystem::path ReportDir() const { return paths.report_dir / Tag(); }
  // Throws ConfigError (includes causal + gLN).
  void Validate() const;
};

nlohmann::json ToJson(const ExperimentConfig &config);
ExperimentConfig FromJson(const nlohmann::json &j);  // validates

// Known presets: "paper", "toy-8k".
nlohmann::json PresetJson(const std::string &name);
std::vector<std::string> PresetNames();

// Sets a dotted key ("train.lr") from text; JSON literals are parsed,
// anything else is stored as a string.
void ApplyOverride(nlohmann::json &j, const std::string &dotted_key,
                   const std::string &value);
// MTSE_TRAIN__LR=1e-3 -> train.lr; MTSE_SEED -> seed. Double underscore
// separates levels, so keys may contain single underscores.
void ApplyEnvironment(nlohmann::json &j, const std::map<std::string, std::string> &env);
std::map<std::string, std::string> ProcessEnvironment();

struct ResolveOptions {
  std::string preset;                 // empty: config file's "preset" or "paper"
  std::filesystem::path config_path;  // optional JSON file
  std::map<std::string, std::string> env;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::optional<std::uint64_t> seed;  // sets seed, corpus.seed and train.seed
  std::filesystem::path out_dir;      // prefixes relative paths
};

ExperimentConfig ResolveConfig(const ResolveOptions &options);

// Writes resolved_config.json into dir.
void WriteResolvedConfig(const ExperimentConfig &config, const std::filesystem::path &dir);

// Commands. Return a process exit code; progress goes to `log`.
int CmdGenerateData(const ExperimentConfig &config, std::ostream &log);
int CmdTrain(const ExperimentConfig &config, bool resume, std::ostream &log);
int CmdEvaluate(const ExperimentConfig &config, std::ostream &log);
int CmdSelfEnroll(const ExperimentConfig &config, std::ostream &log);
int CmdReport(const ExperimentConfig &config, std::ostream &log);

}  // namespace mtse::cli

#endif  // MTSE_CLI_EXPERIMENT_H_
