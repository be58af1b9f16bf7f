// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Multi-modal target speaker extraction network:
//
//   mixture -> encoder -> DNN1 -> H --+
//   enrolment -> AudioClueNet -> E_a --+-> attentive combine -> E
//   video features -> VideoClueNet -> E_v
//   H (.) E -> DNN2 -> sigmoid mask M -> decoder(X (.) M) -> estimate

#ifndef MTSE_MODEL_MTSE_MODEL_H_
#define MTSE_MODEL_MTSE_MODEL_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtse/core/ad.h"
#include "mtse/core/signal.h"
#include "mtse/model/config.h"
#include "mtse/model/layers.h"
#include "mtse/model/parameters.h"

namespace mtse {

struct Linear {
  ad::Parameter *weight = nullptr;
  ad::Parameter *bias = nullptr;

  static Linear Create(ParameterSet &params, const std::string &prefix,
                       int in_dim, int out_dim, Rng &rng);
  ad::Var operator()(ad::Tape &tape, const ad::Var &x) const;
};

// 1-D convolution (kernel, stride, no bias) followed by a rectifier.
class Encoder {
 public:
  Encoder(ParameterSet &params, const std::string &prefix, int n_channels,
          int kernel, int stride, Rng &rng);
  // wave: 1 x T. Returns N x T_M.
  ad::Var Forward(ad::Tape &tape, const ad::Var &wave) const;
  int kernel() const { return kernel_; }
  int stride() const { return stride_; }

 private:
  ad::Parameter *weight_;
  int kernel_, stride_;
};

// Transposed 1-D convolution with the encoder's geometry.
class Decoder {
 public:
  Decoder(ParameterSet &params, const std::string &prefix, int n_channels,
          int kernel, int stride, Rng &rng);
  // features: N x T_M. Output is trimmed/zero-padded to out_length.
  ad::Var Forward(ad::Tape &tape, const ad::Var &features,
                  Eigen::Index out_length) const;

 private:
  ad::Parameter *weight_;
  int kernel_, stride_;
};

// Stack of dual-path recurrent layers over overlapping chunks. Each layer
// runs an intra-chunk BiLSTM then an inter-chunk LSTM (bidirectional unless
// causal); each is followed by a linear projection, the configured
// normalization and a residual connection.
class DprnnBlock {
 public:
  DprnnBlock(ParameterSet &params, const std::string &prefix,
             const ModelConfig &config, Rng &rng);
  // x: N x T -> N x T.
  ad::Var Forward(ad::Tape &tape, const ad::Var &x) const;

 private:
  struct Recurrence {
    ad::Parameter *w_ih, *w_hh, *bias;
  };
  struct Path {
    Recurrence forward;
    std::optional<Recurrence> backward;
    Linear proj;
    ad::Parameter *gamma, *beta;
  };
  struct Layer {
    Path intra, inter;
  };

  Path MakePath(ParameterSet &params, const std::string &prefix,
                bool bidirectional, Rng &rng) const;
  ad::Var RunPath(ad::Tape &tape, const Path &path, const ad::Var &x,
                  int steps, int batch) const;

  ModelConfig config_;
  std::vector<Layer> layers_;
};

// Enrolment encoder + AudioNet + temporal averaging -> E_a (N x 1).
class AudioClueNet {
 public:
  AudioClueNet(ParameterSet &params, const ModelConfig &config, Rng &rng);
  ad::Var Forward(ad::Tape &tape, const AudioWaveform &enrolment) const;

 private:
  Encoder encoder_;
  DprnnBlock net_;
};

// 1x1 projection D_v -> N, VideoNet at video rate, linear upsampling to the
// mixture frame count -> E_v (N x T_M).
class VideoClueNet {
 public:
  VideoClueNet(ParameterSet &params, const ModelConfig &config, Rng &rng);
  ad::Var Forward(ad::Tape &tape, const VideoFeatureStream &video,
                  Eigen::Index target_frames) const;

 private:
  Linear proj_;
  DprnnBlock net_;
  int feature_dim_;
};

// Cross-attention weights between the audio and video embeddings, shared
// w, W, V, b for both scores; softmax sharpened by gamma.
class AttentiveCombiner {
 public:
  struct Result {
    ad::Var combined;  // N x T_M
    ad::Var weights;   // 2 x T_M, rows (w_a, w_v)
  };

  AttentiveCombiner(ParameterSet &params, int n_channels, double gamma,
                    Rng &rng);
  Result Forward(ad::Tape &tape, const ad::Var &h, const ad::Var &audio_emb,
                 const ad::Var &video_emb) const;
  double gamma() const { return gamma_; }

 private:
  ad::Parameter *w_, *W_, *V_, *b_;
  double gamma_;
};

// H (.) E.
ad::Var Fuse(const ad::Var &h, const ad::Var &e);

// Auxiliary information for one forward pass. A dropped modality is
// represented by an all-zero embedding and its clue network is skipped.
struct AuxInputs {
  const AudioWaveform *enrolment = nullptr;
  const VideoFeatureStream *video = nullptr;
  bool drop_audio = false;
  bool drop_video = false;
  // Precomputed embeddings; used instead of running the clue networks.
  const ad::Matrix *cached_audio_embedding = nullptr;
  const ad::Matrix *cached_video_embedding = nullptr;
};

struct ForwardOutput {
  ad::Var estimate;  // 1 x T
  ad::Var mask;      // N x T_M
  ad::Var weights;   // 2 x T_M
  ad::Var audio_embedding;
  ad::Var video_embedding;
  bool audio_clue_invoked = false;
  bool video_clue_invoked = false;
};

struct InferenceResult {
  AudioWaveform estimate;
  ad::Matrix mask;
  ad::Matrix weights;
  ad::Matrix audio_embedding;
  ad::Matrix video_embedding;
  bool audio_clue_invoked = false;
  bool video_clue_invoked = false;
};

class MtseModel {
 public:
  MtseModel(const ModelConfig &config, std::uint64_t seed);
  MtseModel(const MtseModel &) = delete;
  MtseModel &operator=(const MtseModel &) = delete;

  const ModelConfig &config() const { return config_; }
  ParameterSet &params() { return params_; }
  const ParameterSet &params() const { return params_; }

  ForwardOutput Forward(ad::Tape &tape, const AudioWaveform &mixture,
                        const AuxInputs &aux) const;
  // Forward on a non-recording tape.
  InferenceResult Infer(const AudioWaveform &mixture,
                        const AuxInputs &aux) const;

  ad::Matrix AudioEmbedding(const AudioWaveform &enrolment) const;
  ad::Matrix VideoEmbedding(const VideoFeatureStream &video,
                            Eigen::Index target_frames) const;
  int FramesFor(Eigen::Index samples) const;

  const Encoder &encoder() const { return encoder_; }
  const Decoder &decoder() const { return decoder_; }
  const DprnnBlock &dnn1() const { return dnn1_; }
  const DprnnBlock &dnn2() const { return dnn2_; }
  const AttentiveCombiner &combiner() const { return combiner_; }
  const AudioClueNet &audio_clue() const { return audio_clue_; }
  const VideoClueNet &video_clue() const { return video_clue_; }

 private:
  ModelConfig config_;
  ParameterSet params_;
  Rng init_rng_;
  Encoder encoder_;
  DprnnBlock dnn1_;
  AudioClueNet audio_clue_;
  VideoClueNet video_clue_;
  AttentiveCombiner combiner_;
  DprnnBlock dnn2_;
  Linear mask_head_;
  Decoder decoder_;
};

}  // namespace mtse

#endif  // MTSE_MODEL_MTSE_MODEL_H_
