// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mtse/evaluation/evaluation.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include "mtse/core/errors.h"
#include "mtse/datagen/io.h"
#include "mtse/training/si_sdr.h"

namespace mtse {

namespace {

constexpr std::uint64_t kFrameDropStream = 0xfd;

std::string Upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return s;
}

int StrategyOrder(Strategy s) { return static_cast<int>(s); }
int NormOrder(NormKind n) { return static_cast<int>(n); }

}  // namespace

std::string ToString(ConditionKind kind) {
  switch (kind) {
    case ConditionKind::kMTSE:
      return "MTSE";
    case ConditionKind::kAoTSE:
      return "AoTSE";
    case ConditionKind::kVoTSE:
      return "VoTSE";
    case ConditionKind::kMTSE_FD:
      return "MTSE_FD";
  }
  return "?";
}

ConditionKind ParseConditionKind(const std::string &name) {
  const std::string u = Upper(name);
  if (u == "MTSE") return ConditionKind::kMTSE;
  if (u == "AOTSE") return ConditionKind::kAoTSE;
  if (u == "VOTSE") return ConditionKind::kVoTSE;
  if (u == "MTSE_FD" || u == "MTSE-FD") return ConditionKind::kMTSE_FD;
  throw ConfigError("unknown inference condition '" + name + "'");
}

const std::vector<ConditionKind> &AllConditions() {
  static const std::vector<ConditionKind> all = {
      ConditionKind::kMTSE, ConditionKind::kAoTSE, ConditionKind::kVoTSE,
      ConditionKind::kMTSE_FD};
  return all;
}

double Mean(const std::vector<double> &values) {
  if (values.empty()) return 0.0;
  double s = 0;
  for (double v : values) s += v;
  return s / values.size();
}

double SampleSd(const std::vector<double> &values) {
  if (values.size() < 2) return 0.0;
  const double m = Mean(values);
  double ss = 0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / (values.size() - 1));
}

ConditionReport ConditionReport::FromValues(std::string condition,
                                            std::string model_tag,
                                            std::vector<double> values) {
  ConditionReport r;
  r.condition = std::move(condition);
  r.model_tag = std::move(model_tag);
  r.mean = Mean(values);
  r.sd = SampleSd(values);
  r.values = std::move(values);
  return r;
}

ConditionInputs::ConditionInputs(const data::MixtureExample &example,
                                 const InferenceCondition &condition,
                                 std::uint64_t seed)
    : enrolment_(example.enrolment), video_(example.video) {
  const bool mdt = condition.strategy_trained == Strategy::kMDT;
  switch (condition.kind) {
    case ConditionKind::kMTSE:
      break;
    case ConditionKind::kAoTSE:
      if (mdt)
        aux_.drop_video = true;
      else
        video_ = video_.Zeroed();
      break;
    case ConditionKind::kVoTSE:
      if (mdt)
        aux_.drop_audio = true;
      else
        enrolment_.samples.setZero();
      break;
    case ConditionKind::kMTSE_FD: {
      Rng rng = MakeRng(seed, {kFrameDropStream, static_cast<std::uint64_t>(example.index)});
      data::FrameDrop fd = data::BurstFrameDrop(example.video, condition.fd_rate, rng);
      video_ = std::move(fd.video);
      dropped_ = fd.count;
      break;
    }
  }
  aux_.enrolment = &enrolment_;
  aux_.video = &video_;
}

ConditionReport EvaluateCondition(const MtseModel &model, Strategy model_strategy,
                                  const std::vector<data::MixtureExample> &dataset,
                                  const InferenceCondition &condition,
                                  std::uint64_t seed, const std::string &model_tag) {
  if (model_strategy != condition.strategy_trained)
    throw ConfigError("condition " + ToString(condition.kind) + " requested with " +
                      ToString(condition.strategy_trained) +
                      " zeroing semantics for a checkpoint trained with " +
                      ToString(model_strategy));
  MTSE_REQUIRE(!dataset.empty(), InvalidInput, "evaluation dataset is empty");
  std::vector<double> values;
  values.reserve(dataset.size());
  for (const auto &ex : dataset) {
    ConditionInputs in(ex, condition, seed);
    const InferenceResult r = model.Infer(ex.mixture, in.aux());
    values.push_back(SiSdrImprovement(ex.mixture, r.estimate, ex.target));
  }
  return ConditionReport::FromValues(ToString(condition.kind), model_tag, std::move(values));
}

SelfEnrolResult SelfEnrolmentRun(const MtseModel &model, Strategy strategy,
                                 const data::MixtureExample &example,
                                 double segment_seconds) {
  const int sr = example.mixture.sample_rate;
  const auto seg = static_cast<Eigen::Index>(std::lround(segment_seconds * sr));
  const Eigen::Index vseg = data::VideoFrameCount(segment_seconds, example.video.frame_rate);
  MTSE_REQUIRE(seg >= 1 && example.mixture.size() >= 3 * seg &&
                   example.target.size() >= 3 * seg,
               InvalidInput, "self-enrolment example is shorter than three segments");
  MTSE_REQUIRE(example.video.frames() >= 3 * vseg, InvalidInput,
               "self-enrolment video is shorter than three segments");
  const bool mdt = strategy == Strategy::kMDT;
  SelfEnrolResult res;
  for (int k = 0; k < 4; ++k) res.boundaries[k] = k * seg;

  std::array<AudioWaveform, 3> estimates;
  for (int k = 0; k < 3; ++k) {
    const AudioWaveform mix = example.mixture.Segment(k * seg, seg);
    const AudioWaveform ref = example.target.Segment(k * seg, seg);
    VideoFeatureStream video = example.video.Segment(k * vseg, vseg);
    AudioWaveform enrol;
    AuxInputs aux;
    if (k == 0) {  // no enrolment yet
      enrol = {Eigen::VectorXd::Zero(seg), sr};
      aux.drop_audio = mdt;
    } else if (k == 1) {
      enrol = estimates[0];
    } else {  // both earlier estimates, video absent
      enrol = Concatenate(estimates[0], estimates[1]);
      res.segment3_enrolment_samples = enrol.size();
      if (mdt)
        aux.drop_video = true;
      else
        video = video.Zeroed();
    }
    aux.enrolment = &enrol;
    aux.video = &video;
    const InferenceResult r = model.Infer(mix, aux);
    res.sisdri[k] = SiSdrImprovement(mix, r.estimate, ref);
    res.audio_clue_invoked[k] = r.audio_clue_invoked;
    res.video_clue_invoked[k] = r.video_clue_invoked;
    estimates[k] = r.estimate;
  }
  return res;
}

std::string FormatValue(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10f", v);
  return buf;
}

std::string RawFileStem(const ReportEntry &e) {
  return std::string(e.causal ? "causal" : "noncausal") + "_" + ToString(e.strategy) +
         "_" + ToString(e.norm) + "_" + e.report.condition;
}

std::string RenderGrid(const std::vector<ReportEntry> &entries) {
  using Row = std::tuple<int, int, int>;
  std::map<Row, std::map<std::string, const ConditionReport *>> rows;
  for (const auto &e : entries)
    rows[{e.causal ? 1 : 0, StrategyOrder(e.strategy), NormOrder(e.norm)}]
        [e.report.condition] = &e.report;
  std::string out = "causal,strategy,norm";
  for (auto c : AllConditions()) out += "," + ToString(c);
  out += "\n";
  for (const auto &[key, cells] : rows) {
    const auto [causal, strategy, norm] = key;
    out += std::string(causal ? "causal" : "non-causal") + "," +
           ToString(static_cast<Strategy>(strategy)) + "," +
           ToString(static_cast<NormKind>(norm));
    for (auto c : AllConditions()) {
      auto it = cells.find(ToString(c));
      if (it == cells.end()) {
        out += ",—";
      } else {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.3f ± %.3f", it->second->mean, it->second->sd);
        out += ",";
        out += buf;
      }
    }
    out += "\n";
  }
  return out;
}

void WriteReport(const std::filesystem::path &dir,
                 const std::vector<ReportEntry> &entries) {
  data::WriteFileIfChanged(dir / "table.csv", RenderGrid(entries));
  for (const auto &e : entries) {
    std::string text;
    for (double v : e.report.values) text += FormatValue(v) + "\n";
    data::WriteFileIfChanged(dir / "raw" / (RawFileStem(e) + ".txt"), text);
  }
}

}  // namespace mtse
