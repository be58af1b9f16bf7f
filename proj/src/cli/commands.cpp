// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cstdio>
#include <exception>

#include "mtse/cli/experiment.h"
#include "mtse/core/errors.h"
#include "mtse/datagen/io.h"
#include "mtse/training/checkpoint.h"

namespace mtse::cli {

namespace fs = std::filesystem;

namespace {

data::Corpus RequireCorpus(const ExperimentConfig &config) {
  const fs::path dir = config.paths.corpus_dir;
  if (!fs::exists(dir / "manifest.jsonl"))
    throw ConfigError("no corpus in '" + dir.string() +
                      "'; run `mtse generate-data` with the same configuration first");
  data::Corpus corpus = data::LoadCorpus(dir);
  if (nlohmann::json(corpus.spec) != nlohmann::json(config.corpus))
    throw ConfigError("corpus in '" + dir.string() +
                      "' was generated from a different corpus configuration; "
                      "rerun `mtse generate-data`");
  return corpus;
}

struct LoadedModel {
  std::unique_ptr<MtseModel> model;
  Strategy strategy;
};

LoadedModel RequireCheckpoint(const ExperimentConfig &config) {
  const fs::path path = config.CheckpointDir() / kCheckpointFile;
  if (!fs::exists(path))
    throw ConfigError("no checkpoint at '" + path.string() + "'; run `mtse train` first");
  const Checkpoint ckpt = LoadCheckpoint(path);
  LoadedModel m;
  m.model = ModelFromCheckpoint(ckpt);
  m.strategy = ParseStrategy(ckpt.meta.at("strategy").get<std::string>());
  return m;
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

int CmdGenerateData(const ExperimentConfig &config, std::ostream &log) {
  const fs::path dir = config.paths.corpus_dir;
  if (fs::exists(dir / "corpus.json")) {
    const auto meta = nlohmann::json::parse(data::ReadFile(dir / "corpus.json"));
    if (meta.at("spec") != nlohmann::json(config.corpus)) {
      log << "error: '" << dir.string()
          << "' holds a corpus generated from a different configuration; "
             "choose another corpus_dir or remove it\n";
      return 2;
    }
  }
  const data::CorpusPlan plan = data::PlanCorpus(config.corpus);
  log << "generating corpus in " << dir.string() << " (" << plan.train_ids.size()
      << "/" << plan.val_ids.size() << "/" << plan.test_ids.size()
      << " train/val/test speakers)\n";
  const data::WriteStats stats = data::GenerateCorpusFiles(plan, dir);
  WriteResolvedConfig(config, dir);
  log << "files written: " << stats.files_written
      << ", unchanged: " << stats.files_unchanged
      << ", manifest checksum: " << stats.manifest_checksum << "\n";
  return 0;
}

int CmdTrain(const ExperimentConfig &config, bool resume, std::ostream &log) {
  const data::Corpus corpus = RequireCorpus(config);
  MtseModel model(config.model, config.train.seed);
  const fs::path out = config.CheckpointDir();
  fs::create_directories(out);
  WriteResolvedConfig(config, out);
  TrainOptions options;
  options.out_dir = out;
  options.resume = resume;
  options.init_seed = config.train.seed;
  options.on_epoch = [&log](const EpochRecord &r) {
    log << "epoch " << r.epoch << "  train " << Fixed(r.train_loss, 4) << "  val "
        << Fixed(r.val_loss, 4) << "  best " << Fixed(r.best_val_loss, 4) << "  lr "
        << r.lr << "  (" << Fixed(r.seconds, 1) << " s)\n";
    log.flush();
  };
  log << "training " << config.Tag() << ": " << model.params().TotalSize()
      << " parameters, batch " << config.train.EffectiveBatchSize() << "\n";
  const TrainResult result = Train(model, config.train, corpus, options);
  log << "done (" << result.stop_reason << "); best validation loss "
      << Fixed(result.best_val_loss, 4) << " at epoch " << result.best_epoch << "\n"
      << "checkpoint: " << (out / kCheckpointFile).string() << "\n";
  return 0;
}

int CmdEvaluate(const ExperimentConfig &config, std::ostream &log) {
  const data::Corpus corpus = RequireCorpus(config);
  const LoadedModel loaded = RequireCheckpoint(config);
  const fs::path out = config.ReportDir();
  fs::create_directories(out);
  WriteResolvedConfig(config, out);
  std::vector<ReportEntry> entries;
  nlohmann::json saved = nlohmann::json::array();
  int failures = 0;
  for (ConditionKind kind : config.eval.conditions) {
    InferenceCondition cond{kind, loaded.strategy, config.eval.fd_rate};
    try {
      ReportEntry e;
      e.causal = config.model.causal;
      e.strategy = loaded.strategy;
      e.norm = config.model.norm_kind;
      e.report = EvaluateCondition(*loaded.model, loaded.strategy, corpus.test, cond,
                                   config.seed, config.Tag());
      log << ToString(kind) << ": " << Fixed(e.report.mean, 3) << " ± "
          << Fixed(e.report.sd, 3) << " dB SI-SDRi over " << e.report.values.size()
          << " examples\n";
      saved.push_back({{"condition", e.report.condition},
                       {"causal", e.causal},
                       {"strategy", ToString(e.strategy)},
                       {"norm", ToString(e.norm)},
                       {"model_tag", e.report.model_tag},
                       {"mean", e.report.mean},
                       {"sd", e.report.sd},
                       {"values", e.report.values}});
      entries.push_back(std::move(e));
    } catch (const std::exception &ex) {
      ++failures;
      log << ToString(kind) << ": FAILED: " << ex.what() << "\n";
    }
  }
  data::WriteFileIfChanged(out / "conditions.json", saved.dump(2) + "\n");
  WriteReport(out, entries);
  return failures == 0 ? 0 : 1;
}

int CmdSelfEnroll(const ExperimentConfig &config, std::ostream &log) {
  const data::Corpus corpus = RequireCorpus(config);
  if (corpus.self_enrol.empty())
    throw ConfigError("corpus has no self-enrolment examples; set corpus.n_self_enrol > 0 "
                      "and rerun `mtse generate-data`");
  const LoadedModel loaded = RequireCheckpoint(config);
  const fs::path out = config.ReportDir();
  fs::create_directories(out);
  WriteResolvedConfig(config, out);
  std::string table = "example";
  for (const auto &label : kSelfEnrolSegmentLabels) table += "," + label;
  table += "\n";
  std::string seg3;
  std::vector<double> per_segment[3];
  for (const auto &ex : corpus.self_enrol) {
    const SelfEnrolResult r =
        SelfEnrolmentRun(*loaded.model, loaded.strategy, ex, config.corpus.clip_seconds);
    table += std::to_string(ex.index);
    for (int k = 0; k < 3; ++k) {
      table += "," + FormatValue(r.sisdri[k]);
      per_segment[k].push_back(r.sisdri[k]);
    }
    table += "\n";
    seg3 += FormatValue(r.sisdri[2]) + "\n";
  }
  nlohmann::json summary{{"model_tag", config.Tag()},
                         {"strategy", ToString(loaded.strategy)},
                         {"examples", corpus.self_enrol.size()}};
  for (int k = 0; k < 3; ++k) {
    summary["segments"].push_back({{"label", kSelfEnrolSegmentLabels[k]},
                                   {"mean", Mean(per_segment[k])},
                                   {"sd", SampleSd(per_segment[k])}});
    log << "segment " << k + 1 << " (" << kSelfEnrolSegmentLabels[k]
        << "): " << Fixed(Mean(per_segment[k]), 3) << " ± "
        << Fixed(SampleSd(per_segment[k]), 3) << " dB\n";
  }
  data::WriteFileIfChanged(out / "self_enrol.csv", table);
  data::WriteFileIfChanged(out / "self_enrol_segment3.txt", seg3);
  data::WriteFileIfChanged(out / "self_enrol_summary.json", summary.dump(2) + "\n");
  return 0;
}

int CmdReport(const ExperimentConfig &config, std::ostream &log) {
  const fs::path root = config.paths.report_dir;
  if (!fs::exists(root))
    throw ConfigError("no reports in '" + root.string() + "'; run `mtse evaluate` first");
  std::vector<fs::path> dirs;
  for (const auto &d : fs::directory_iterator(root))
    if (d.is_directory() && fs::exists(d.path() / "conditions.json")) dirs.push_back(d.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<ReportEntry> entries;
  for (const auto &d : dirs) {
    const auto saved = nlohmann::json::parse(data::ReadFile(d / "conditions.json"));
    for (const auto &s : saved) {
      ReportEntry e;
      e.causal = s.at("causal").get<bool>();
      e.strategy = ParseStrategy(s.at("strategy").get<std::string>());
      e.norm = ParseNormKind(s.at("norm").get<std::string>());
      e.report = ConditionReport::FromValues(s.at("condition").get<std::string>(),
                                             s.value("model_tag", std::string()),
                                             s.at("values").get<std::vector<double>>());
      entries.push_back(std::move(e));
    }
  }
  if (entries.empty())
    throw ConfigError("no condition reports under '" + root.string() + "'");
  WriteReport(root, entries);
  log << RenderGrid(entries);
  return 0;
}

}  // namespace mtse::cli
