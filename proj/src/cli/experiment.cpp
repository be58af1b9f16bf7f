// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mtse/cli/experiment.h"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "mtse/core/errors.h"
#include "mtse/datagen/io.h"

extern char **environ;

namespace mtse::cli {

namespace {

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Recursive merge: objects merge key by key, everything else replaces.
void Merge(nlohmann::json &base, const nlohmann::json &patch) {
  if (!patch.is_object() || !base.is_object()) {
    base = patch;
    return;
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
      Merge(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

}  // namespace

std::string ExperimentConfig::Tag() const {
  return std::string(model.causal ? "causal" : "noncausal") + "_" +
         ToString(train.strategy) + "_" + ToString(model.norm_kind);
}

void ExperimentConfig::Validate() const {
  (void)model.Validate();
  train.Validate();
  corpus.Validate();
  if (model.sample_rate != corpus.sample_rate)
    throw ConfigError("model.sample_rate (" + std::to_string(model.sample_rate) +
                      ") differs from corpus.sample_rate (" +
                      std::to_string(corpus.sample_rate) + ")");
  if (model.visual_feature_dim != corpus.visual_dim)
    throw ConfigError("model.visual_feature_dim differs from corpus.visual_dim");
  if (!(eval.fd_rate >= 0 && eval.fd_rate < 1))
    throw ConfigError("eval.fd_rate must lie in [0, 1)");
  if (eval.conditions.empty()) throw ConfigError("eval.conditions is empty");
}

nlohmann::json ToJson(const ExperimentConfig &c) {
  nlohmann::json conditions = nlohmann::json::array();
  for (auto k : c.eval.conditions) conditions.push_back(ToString(k));
  return {{"preset", c.preset},
          {"seed", c.seed},
          {"model", c.model},
          {"train", c.train},
          {"corpus", c.corpus},
          {"eval", {{"conditions", conditions}, {"fd_rate", c.eval.fd_rate}}},
          {"paths",
           {{"corpus_dir", c.paths.corpus_dir.string()},
            {"checkpoint_dir", c.paths.checkpoint_dir.string()},
            {"report_dir", c.paths.report_dir.string()}}}};
}

ExperimentConfig FromJson(const nlohmann::json &j) {
  static const std::vector<std::string> known = {"preset", "seed",  "model", "train",
                                                 "corpus", "eval", "paths"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("unknown configuration section '" + it.key() + "'");
  const nlohmann::json schema = ToJson(ExperimentConfig{});
  for (const char *section : {"model", "train", "corpus", "eval", "paths"}) {
    if (!j.contains(section)) continue;
    if (!j.at(section).is_object())
      throw ConfigError(std::string("configuration section '") + section +
                        "' must be an object");
    for (auto it = j.at(section).begin(); it != j.at(section).end(); ++it)
      if (!schema.at(section).contains(it.key()))
        throw ConfigError("unknown configuration key '" + std::string(section) + "." +
                          it.key() + "'");
  }
  ExperimentConfig c;
  try {
    c.preset = j.value("preset", std::string());
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
    if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
    if (j.contains("corpus")) c.corpus = j.at("corpus").get<data::CorpusSpec>();
    if (j.contains("eval")) {
      const auto &e = j.at("eval");
      if (e.contains("conditions")) {
        c.eval.conditions.clear();
        for (const auto &k : e.at("conditions"))
          c.eval.conditions.push_back(ParseConditionKind(k.get<std::string>()));
      }
      c.eval.fd_rate = e.value("fd_rate", c.eval.fd_rate);
    }
    if (j.contains("paths")) {
      const auto &p = j.at("paths");
      c.paths.corpus_dir = p.value("corpus_dir", c.paths.corpus_dir.string());
      c.paths.checkpoint_dir = p.value("checkpoint_dir", c.paths.checkpoint_dir.string());
      c.paths.report_dir = p.value("report_dir", c.paths.report_dir.string());
    }
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("configuration type error: ") + e.what());
  }
  c.Validate();
  return c;
}

std::vector<std::string> PresetNames() { return {"paper", "toy-8k"}; }

nlohmann::json PresetJson(const std::string &name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "paper") {
    c.corpus.train_speakers = 200;
    c.corpus.val_speakers = 40;
    c.corpus.test_speakers = 40;
    c.corpus.utterances_per_speaker = 40;
    c.corpus.n_self_enrol = 630;
  } else if (name == "toy-8k") {
    c.model.sample_rate = 8000;
    c.model.n_channels = 32;
    c.model.hidden_dim = 16;
    c.model.chunk_size = 25;
    c.model.layers_per_block = 1;
    c.corpus.sample_rate = 8000;
    c.corpus.clip_seconds = 0.5;
    c.corpus.n_train = 256;
    c.corpus.n_val = 64;
    c.corpus.n_test = 64;
    c.corpus.train_speakers = 8;
    c.corpus.val_speakers = 4;
    c.corpus.test_speakers = 4;
    c.corpus.utterances_per_speaker = 20;
    c.corpus.n_self_enrol = 32;
    c.train.lr = 1e-3;
    c.train.batch_size = 4;
    c.train.max_epochs = 50;
  } else {
    throw ConfigError("unknown preset '" + name + "' (known: paper, toy-8k)");
  }
  return ToJson(c);
}

void ApplyOverride(nlohmann::json &j, const std::string &dotted_key,
                   const std::string &value) {
  if (dotted_key.empty()) throw ConfigError("empty override key");
  nlohmann::json *node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_key.find('.', start);
    const std::string part = dotted_key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("malformed override key '" + dotted_key + "'");
    if (dot == std::string::npos) {
      nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
      (*node)[part] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
      return;
    }
    if (!(*node)[part].is_object()) (*node)[part] = nlohmann::json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

void ApplyEnvironment(nlohmann::json &j, const std::map<std::string, std::string> &env) {
  const std::string prefix = "MTSE_";
  for (const auto &[name, value] : env) {
    if (name.rfind(prefix, 0) != 0 || name.size() == prefix.size()) continue;
    std::string key = Lower(name.substr(prefix.size()));
    std::string dotted;
    for (std::size_t k = 0; k < key.size(); ++k) {
      if (key.compare(k, 2, "__") == 0) {
        dotted += '.';
        ++k;
      } else {
        dotted += key[k];
      }
    }
    ApplyOverride(j, dotted, value);
  }
}

std::map<std::string, std::string> ProcessEnvironment() {
  std::map<std::string, std::string> env;
  for (char **e = environ; e != nullptr && *e != nullptr; ++e) {
    const std::string entry(*e);
    const std::size_t eq = entry.find('=');
    if (eq != std::string::npos) env[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  return env;
}

ExperimentConfig ResolveConfig(const ResolveOptions &options) {
  nlohmann::json file = nlohmann::json::object();
  if (!options.config_path.empty()) {
    const std::string text = data::ReadFile(options.config_path);
    try {
      file = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
      throw ParseError(options.config_path.string() + ": " + e.what(), e.byte);
    }
    if (!file.is_object()) throw ConfigError("configuration file must hold a JSON object");
  }
  std::string preset = options.preset;
  if (preset.empty()) preset = file.value("preset", std::string("paper"));
  nlohmann::json j = PresetJson(preset);
  Merge(j, file);
  j["preset"] = preset;
  ApplyEnvironment(j, options.env);
  for (const auto &[k, v] : options.overrides) ApplyOverride(j, k, v);
  if (options.seed) {
    j["seed"] = *options.seed;
    j["corpus"]["seed"] = *options.seed;
    j["train"]["seed"] = *options.seed;
  }
  ExperimentConfig c = FromJson(j);
  if (!options.out_dir.empty()) {
    for (auto *p : {&c.paths.corpus_dir, &c.paths.checkpoint_dir, &c.paths.report_dir})
      if (p->is_relative()) *p = options.out_dir / *p;
  }
  return c;
}

void WriteResolvedConfig(const ExperimentConfig &config, const std::filesystem::path &dir) {
  data::WriteFileIfChanged(dir / "resolved_config.json", ToJson(config).dump(2) + "\n");
}

}  // namespace mtse::cli
