// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Inference conditions, SI-SDRi aggregation, the self-enrolment protocol
// and report files.

#ifndef MTSE_EVALUATION_EVALUATION_H_
#define MTSE_EVALUATION_EVALUATION_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mtse/datagen/corpus.h"
#include "mtse/model/mtse_model.h"
#include "mtse/training/losses.h"

namespace mtse {

enum class ConditionKind { kMTSE, kAoTSE, kVoTSE, kMTSE_FD };

std::string ToString(ConditionKind kind);
ConditionKind ParseConditionKind(const std::string &name);  // throws ConfigError
const std::vector<ConditionKind> &AllConditions();

struct InferenceCondition {
  ConditionKind kind = ConditionKind::kMTSE;
  Strategy strategy_trained = Strategy::kMDT;
  double fd_rate = 1.0 / 3.0;  // MTSE_FD only
};

double Mean(const std::vector<double> &values);
// Sample standard deviation (n - 1); 0 for fewer than two values.
double SampleSd(const std::vector<double> &values);

struct ConditionReport {
  std::string condition;
  std::string model_tag;
  std::vector<double> values;  // per-example SI-SDRi [dB]
  double mean = 0.0;
  double sd = 0.0;

  static ConditionReport FromValues(std::string condition, std::string model_tag,
                                    std::vector<double> values);
};

// Auxiliary inputs for one example under a condition. Owns any zeroed or
// corrupted streams; not copyable because `aux` points into it.
class ConditionInputs {
 public:
  ConditionInputs(const data::MixtureExample &example,
                  const InferenceCondition &condition, std::uint64_t seed);
  ConditionInputs(const ConditionInputs &) = delete;
  ConditionInputs &operator=(const ConditionInputs &) = delete;

  const AuxInputs &aux() const { return aux_; }
  const VideoFeatureStream &video() const { return video_; }
  Eigen::Index dropped_frames() const { return dropped_; }

 private:
  AudioWaveform enrolment_;
  VideoFeatureStream video_;
  AuxInputs aux_;
  Eigen::Index dropped_ = 0;
};

// `model_strategy` is the strategy the checkpoint was trained with; it must
// match condition.strategy_trained (ConfigError otherwise). Frame drops are
// drawn per example from (seed, example index).
ConditionReport EvaluateCondition(const MtseModel &model, Strategy model_strategy,
                                  const std::vector<data::MixtureExample> &dataset,
                                  const InferenceCondition &condition,
                                  std::uint64_t seed = 0,
                                  const std::string &model_tag = "");

struct SelfEnrolResult {
  std::array<double, 3> sisdri{};             // VoTSE, MTSE, AoTSE
  std::array<Eigen::Index, 4> boundaries{};  // sample indices
  Eigen::Index segment3_enrolment_samples = 0;
  std::array<bool, 3> audio_clue_invoked{}, video_clue_invoked{};
};

inline const std::array<std::string, 3> kSelfEnrolSegmentLabels = {"VoTSE", "MTSE",
                                                                   "AoTSE"};

// Segment 1 without enrolment, segment 2 enrolled with the segment-1
// estimate, segment 3 enrolled with both earlier estimates and without
// video. Throws InvalidInput if the example is shorter than three segments.
SelfEnrolResult SelfEnrolmentRun(const MtseModel &model, Strategy strategy,
                                 const data::MixtureExample &example,
                                 double segment_seconds);

// ---- reports --------------------------------------------------------------

struct ReportEntry {
  bool causal = false;
  Strategy strategy = Strategy::kMDT;
  NormKind norm = NormKind::kGlobal;
  ConditionReport report;  // report.condition names the column
};

// "causal,strategy,norm,MTSE,AoTSE,VoTSE,MTSE_FD" with "mean ± sd" cells
// (3 decimals) and "—" for missing cells. Rows follow non-causal before
// causal, then ST, MTT, MDT, then gLN, cLN, LN; only present rows appear.
std::string RenderGrid(const std::vector<ReportEntry> &entries);
// Encodes the configuration tuple, e.g. "noncausal_MDT_LN_AoTSE".
std::string RawFileStem(const ReportEntry &entry);
// Writes table.csv plus raw/<stem>.txt (one value per line).
void WriteReport(const std::filesystem::path &dir,
                 const std::vector<ReportEntry> &entries);

std::string FormatValue(double v);  // %.10f

}  // namespace mtse

#endif  // MTSE_EVALUATION_EVALUATION_H_
