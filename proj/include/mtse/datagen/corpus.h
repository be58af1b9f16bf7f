// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Two-speaker mixtures at a controlled SIR, split-disjoint corpora, per-epoch
// dynamic remixing and burst frame drops.

#ifndef MTSE_DATAGEN_CORPUS_H_
#define MTSE_DATAGEN_CORPUS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtse/core/random.h"
#include "mtse/core/signal.h"
#include "mtse/datagen/synth.h"

namespace mtse::data {

struct MixResult {
  AudioWaveform mixture;
  AudioWaveform target;              // jointly rescaled when the peak exceeds 1
  AudioWaveform scaled_interferer;   // g * i (times the joint rescale)
  double interferer_gain = 1.0;      // g
  double peak_gain = 1.0;            // joint rescale, 1 when no clipping risk
};

// Scales the interferer by g = |s| / (|i| 10^(sir/20)); x = s + g i exactly.
// Throws InvalidInput on length mismatch or zero-energy inputs.
MixResult MixAtSir(const AudioWaveform &target, const AudioWaveform &interferer,
                   double sir_db);

// 10 log10(|s|^2 / |i|^2).
double RealizedSir(const AudioWaveform &target, const AudioWaveform &interferer);

struct MixtureExample {
  std::string split;
  int index = 0;
  AudioWaveform mixture, target, interferer, enrolment;
  VideoFeatureStream video;  // aligned with target
  double sir_db = 0.0;
  std::string target_id, interferer_id;
  int target_utterance = 0, interferer_utterance = 0, enrolment_utterance = 0;
  std::uint64_t seed = 0;
};

struct CorpusSpec {
  int n_train = 20000;
  int n_val = 4000;
  int n_test = 2000;
  int sample_rate = 16000;
  double clip_seconds = 3.0;
  double fps = 25.0;
  double sir_lo = -5.0;
  double sir_hi = 5.0;
  std::uint64_t seed = 0;
  // Speaker pools (disjoint across splits).
  int train_speakers = 8;
  int val_speakers = 4;
  int test_speakers = 4;
  int utterances_per_speaker = 12;
  int visual_dim = 512;
  double feature_noise = 0.05;
  // Long test mixtures for the self-enrolment protocol: three consecutive
  // segments of clip_seconds each.
  int n_self_enrol = 0;

  SynthOptions synth() const;
  void Validate() const;  // throws ConfigError
};

void to_json(nlohmann::json &j, const CorpusSpec &s);
void from_json(const nlohmann::json &j, CorpusSpec &s);

// Speaker pools per split; every example is a pure function of the plan,
// the split name and the example index.
struct CorpusPlan {
  CorpusSpec spec;
  std::vector<SpeakerProfile> speakers;  // eligible speakers only
  std::vector<std::string> train_ids, val_ids, test_ids;
};

struct Corpus : CorpusPlan {
  std::vector<MixtureExample> train, val, test, self_enrol;
};

inline const std::vector<std::string> kSplitNames = {"train", "val", "test",
                                                     "self_enrol"};

inline constexpr int kMinCorpusUtterances = 3;
inline constexpr int kMinSelfEnrolUtterances = 4;

// Speakers from MakeSpeakerPool, or an explicit list. Speakers with fewer
// than three utterances are dropped; throws ConfigError if too few remain.
CorpusPlan PlanCorpus(const CorpusSpec &spec);
CorpusPlan PlanCorpus(const CorpusSpec &spec,
                      const std::vector<SpeakerProfile> &speakers);
int SplitSize(const CorpusSpec &spec, const std::string &split);
// split is one of kSplitNames.
MixtureExample GenerateExample(const CorpusPlan &plan, const std::string &split,
                               int index);

// Pure function of the spec (speakers from MakeSpeakerPool).
Corpus BuildCorpus(const CorpusSpec &spec);
Corpus BuildCorpus(const CorpusSpec &spec,
                   const std::vector<SpeakerProfile> &speakers);

// Assigns speakers to (train, val, test) by interleaving over the sorted
// signature so each split spans the signature range.
void AssignSplits(const std::vector<SpeakerProfile> &eligible,
                  const CorpusSpec &spec, std::vector<std::string> &train,
                  std::vector<std::string> &val,
                  std::vector<std::string> &test);

// Train items with a fresh interferer (another item's clean target from a
// different speaker) and a fresh SIR. Deterministic in (seed, epoch).
std::vector<MixtureExample> DynamicRemix(const std::vector<MixtureExample> &train,
                                         const CorpusSpec &spec, int epoch,
                                         std::uint64_t seed);

struct FrameDrop {
  VideoFeatureStream video;
  Eigen::Index start = 0;
  Eigen::Index count = 0;
};

// Zeroes one contiguous run of round(rate * T_v) frames starting uniformly
// at random. Throws InvalidInput unless 0 <= rate < 1.
FrameDrop BurstFrameDrop(const VideoFeatureStream &video, double rate, Rng &rng);

}  // namespace mtse::data

#endif  // MTSE_DATAGEN_CORPUS_H_
