// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Synthetic audio-visual speakers. Each speaker has a spectral signature
// (two resonances over a pitched excitation); utterances add a random
// syllabic envelope. The matching "lip" features encode the envelope at
// video rate plus a smooth code of the speaker signature, so either
// modality alone identifies and times the target.

#ifndef MTSE_DATAGEN_SYNTH_H_
#define MTSE_DATAGEN_SYNTH_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mtse/core/random.h"
#include "mtse/core/signal.h"

namespace mtse::data {

struct SpeakerProfile {
  std::string id;
  // formant1_hz, formant2_ratio, f0_hz, bandwidth_ratio
  std::vector<double> spectral_signature;
  int n_utterances = 0;
  std::uint64_t seed = 0;

  double formant1() const { return spectral_signature.at(0); }
  double formant2() const { return formant1() * spectral_signature.at(1); }
  double f0() const { return spectral_signature.at(2); }
  double bandwidth_ratio() const { return spectral_signature.at(3); }
};

// `count` speakers with signatures spread over the admissible range (sorted
// by first formant); distinct ids always get distinct signatures.
std::vector<SpeakerProfile> MakeSpeakerPool(int count, int utterances,
                                            int sample_rate,
                                            std::uint64_t seed);

struct SynthOptions {
  int sample_rate = 16000;
  double frame_rate = 25.0;
  int visual_dim = 512;
  double feature_noise = 0.05;
};

struct Utterance {
  AudioWaveform audio;
  VideoFeatureStream video;
  Eigen::VectorXd envelope;  // per-sample amplitude trajectory
};

// Deterministic in (speaker, utterance_index, duration, options).
Utterance SynthUtterance(const SpeakerProfile &speaker, int utterance_index,
                         double duration_s, const SynthOptions &options);

// Same generator with an explicit RNG (for ad-hoc draws).
Utterance SynthUtterance(const SpeakerProfile &speaker, double duration_s,
                         const SynthOptions &options, Rng &rng);

int VideoFrameCount(double duration_s, double frame_rate);

}  // namespace mtse::data

#endif  // MTSE_DATAGEN_SYNTH_H_
