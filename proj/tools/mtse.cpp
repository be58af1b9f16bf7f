// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// mtse: generate-data | train | evaluate | self-enroll | report

#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "mtse/cli/experiment.h"
#include "mtse/core/errors.h"

namespace {

struct CommonFlags {
  std::string preset;
  std::string config;
  std::string out;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  CLI::Option *seed_opt = nullptr;
};

void AddCommon(CLI::App *cmd, CommonFlags &f) {
  cmd->add_option("--preset", f.preset, "Configuration preset (paper, toy-8k)");
  cmd->add_option("--config", f.config, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "Prefix for relative output paths");
  cmd->add_option("--set", f.sets, "Override, e.g. --set train.lr=1e-3")->take_all();
  f.seed_opt = cmd->add_option("--seed", f.seed, "Seed for corpus, initialization and training");
}

mtse::cli::ExperimentConfig Resolve(const CommonFlags &f) {
  mtse::cli::ResolveOptions o;
  o.preset = f.preset;
  o.config_path = f.config;
  o.out_dir = f.out;
  o.env = mtse::cli::ProcessEnvironment();
  for (const auto &s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw mtse::ConfigError("--set expects key=value, got '" + s + "'");
    o.overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (f.seed_opt != nullptr && f.seed_opt->count() > 0) o.seed = f.seed;
  return mtse::cli::ResolveConfig(o);
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Multi-modal target speaker extraction"};
  app.require_subcommand(1);

  CommonFlags gen_f, train_f, eval_f, self_f, report_f;
  bool resume = false;
  auto *gen = app.add_subcommand("generate-data", "Synthesize the audio-visual corpus");
  auto *train = app.add_subcommand("train", "Train a model");
  auto *eval = app.add_subcommand("evaluate", "Evaluate a checkpoint under all conditions");
  auto *self = app.add_subcommand("self-enroll", "Run the self-enrolment protocol");
  auto *report = app.add_subcommand("report", "Aggregate evaluation results into a table");
  AddCommon(gen, gen_f);
  AddCommon(train, train_f);
  AddCommon(eval, eval_f);
  AddCommon(self, self_f);
  AddCommon(report, report_f);
  train->add_flag("--resume", resume, "Continue from the checkpoint in the output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return mtse::cli::CmdGenerateData(Resolve(gen_f), std::cout);
    if (train->parsed()) return mtse::cli::CmdTrain(Resolve(train_f), resume, std::cout);
    if (eval->parsed()) return mtse::cli::CmdEvaluate(Resolve(eval_f), std::cout);
    if (self->parsed()) return mtse::cli::CmdSelfEnroll(Resolve(self_f), std::cout);
    if (report->parsed()) return mtse::cli::CmdReport(Resolve(report_f), std::cout);
  } catch (const mtse::ConfigError &e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
