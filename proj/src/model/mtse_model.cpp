// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mtse/model/mtse_model.h"

#include <cmath>
#include <memory>

#include "mtse/core/errors.h"

namespace mtse {

namespace {

const ModelConfig &Validated(const ModelConfig &config) {
  config.Validate();
  return config;
}

ad::Var WaveRow(ad::Tape &tape, const AudioWaveform &wave) {
  return tape.Constant(wave.samples.transpose());
}

// Column permutation between chunk-major (s*K + k) and position-major
// (k*S + s) layouts.
std::shared_ptr<const std::vector<int>> ChunkTranspose(int major, int minor) {
  auto perm = std::make_shared<std::vector<int>>(major * minor);
  for (int a = 0; a < major; ++a)
    for (int b = 0; b < minor; ++b) (*perm)[b * major + a] = a * minor + b;
  return perm;
}

}  // namespace

Linear Linear::Create(ParameterSet &params, const std::string &prefix,
                      int in_dim, int out_dim, Rng &rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  Linear l;
  l.weight = &params.AddUniform(prefix + ".w", out_dim, in_dim, bound, rng);
  l.bias = &params.AddUniform(prefix + ".b", out_dim, 1, bound, rng);
  return l;
}

ad::Var Linear::operator()(ad::Tape &tape, const ad::Var &x) const {
  return ad::Affine(tape.Param(*weight), x, tape.Param(*bias));
}

// ---- encoder / decoder --------------------------------------------------

Encoder::Encoder(ParameterSet &params, const std::string &prefix,
                 int n_channels, int kernel, int stride, Rng &rng)
    : weight_(&params.AddUniform(prefix + ".w", n_channels, kernel,
                                 1.0 / std::sqrt(static_cast<double>(kernel)),
                                 rng)),
      kernel_(kernel),
      stride_(stride) {}

ad::Var Encoder::Forward(ad::Tape &tape, const ad::Var &wave) const {
  ad::Var frames = FrameSignal(wave, kernel_, stride_);
  return ad::Relu(ad::MatMul(tape.Param(*weight_), frames));
}

Decoder::Decoder(ParameterSet &params, const std::string &prefix,
                 int n_channels, int kernel, int stride, Rng &rng)
    : weight_(&params.AddUniform(
          prefix + ".w", kernel, n_channels,
          1.0 / std::sqrt(static_cast<double>(n_channels)), rng)),
      kernel_(kernel),
      stride_(stride) {}

ad::Var Decoder::Forward(ad::Tape &tape, const ad::Var &features,
                         Eigen::Index out_length) const {
  MTSE_REQUIRE(features.rows() == weight_->value.cols(), InvalidInput,
               "decoder: channel count mismatch");
  ad::Var frames = ad::MatMul(tape.Param(*weight_), features);
  return OverlapAddFrames(frames, stride_, out_length);
}

// ---- DPRNN --------------------------------------------------------------

DprnnBlock::DprnnBlock(ParameterSet &params, const std::string &prefix,
                       const ModelConfig &config, Rng &rng)
    : config_(config) {
  for (int l = 0; l < config.layers_per_block; ++l) {
    const std::string p = prefix + "." + std::to_string(l);
    Layer layer{MakePath(params, p + ".intra", true, rng),
                MakePath(params, p + ".inter", !config.causal, rng)};
    layers_.push_back(layer);
  }
}

DprnnBlock::Path DprnnBlock::MakePath(ParameterSet &params,
                                      const std::string &prefix,
                                      bool bidirectional, Rng &rng) const {
  const int n = config_.n_channels, h = config_.hidden_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  auto make_rnn = [&](const std::string &dir) {
    return Recurrence{
        &params.AddUniform(prefix + "." + dir + ".w_ih", 4 * h, n, bound, rng),
        &params.AddUniform(prefix + "." + dir + ".w_hh", 4 * h, h, bound, rng),
        &params.AddUniform(prefix + "." + dir + ".b", 4 * h, 1, bound, rng)};
  };
  Path path;
  path.forward = make_rnn("fw");
  if (bidirectional) path.backward = make_rnn("bw");
  path.proj = Linear::Create(params, prefix + ".proj",
                             bidirectional ? 2 * h : h, n, rng);
  path.gamma = &params.AddConstant(prefix + ".norm.gamma", n, 1, 1.0);
  path.beta = &params.AddConstant(prefix + ".norm.beta", n, 1, 0.0);
  return path;
}

ad::Var DprnnBlock::RunPath(ad::Tape &tape, const Path &path, const ad::Var &x,
                            int steps, int batch) const {
  auto run = [&](const Recurrence &r, bool reverse) {
    return Lstm(x, tape.Param(*r.w_ih), tape.Param(*r.w_hh),
                tape.Param(*r.bias), steps, batch, reverse);
  };
  ad::Var out = run(path.forward, false);
  if (path.backward) out = ad::ConcatRows(out, run(*path.backward, true));
  return path.proj(tape, out);
}

ad::Var DprnnBlock::Forward(ad::Tape &tape, const ad::Var &x) const {
  MTSE_REQUIRE(x.rows() == config_.n_channels, InvalidInput,
               "DPRNN: channel count mismatch");
  const ChunkGeometry geom =
      ChunkGeometry::For(static_cast<int>(x.cols()), config_.chunk_size);
  const int K = geom.chunk, S = geom.n_chunks;
  // Intra-chunk recurrences step over positions k with the S chunks as the
  // batch; inter-chunk recurrences step over chunks with positions as batch.
  const auto to_position_major = ChunkTranspose(S, K);
  const auto to_chunk_major = ChunkTranspose(K, S);

  ad::Var z = SegmentChunks(x, geom);
  for (const Layer &layer : layers_) {
    ad::Var u = ad::PermuteCols(z, to_position_major);
    ad::Var intra = RunPath(tape, layer.intra, u, K, S);
    intra = ad::PermuteCols(intra, to_chunk_major);
    intra = Normalize(intra, config_.norm_kind, tape.Param(*layer.intra.gamma),
                      tape.Param(*layer.intra.beta), config_.norm_epsilon);
    z = ad::Add(z, intra);

    ad::Var inter = RunPath(tape, layer.inter, z, S, K);
    inter = Normalize(inter, config_.norm_kind, tape.Param(*layer.inter.gamma),
                      tape.Param(*layer.inter.beta), config_.norm_epsilon);
    z = ad::Add(z, inter);
  }
  return MergeChunks(z, geom);
}

// ---- clue networks ------------------------------------------------------

AudioClueNet::AudioClueNet(ParameterSet &params, const ModelConfig &config,
                           Rng &rng)
    : encoder_(params, "audio_clue.encoder", config.n_channels,
               config.KernelSamples(), config.StrideSamples(), rng),
      net_(params, "audio_clue.net", config, rng) {}

ad::Var AudioClueNet::Forward(ad::Tape &tape,
                              const AudioWaveform &enrolment) const {
  MTSE_REQUIRE(enrolment.size() >= encoder_.kernel(), InvalidInput,
               "enrolment shorter than one encoder kernel");
  MTSE_REQUIRE(enrolment.samples.allFinite(), InvalidInput,
               "non-finite enrolment samples");
  ad::Var feats = encoder_.Forward(tape, WaveRow(tape, enrolment));
  return ad::RowMean(net_.Forward(tape, feats));
}

VideoClueNet::VideoClueNet(ParameterSet &params, const ModelConfig &config,
                           Rng &rng)
    : proj_(Linear::Create(params, "video_clue.proj",
                           config.visual_feature_dim, config.n_channels, rng)),
      net_(params, "video_clue.net", config, rng),
      feature_dim_(config.visual_feature_dim) {}

ad::Var VideoClueNet::Forward(ad::Tape &tape, const VideoFeatureStream &video,
                              Eigen::Index target_frames) const {
  MTSE_REQUIRE(target_frames >= 1, InvalidInput,
               "video embedding target length must be >= 1");
  video.Validate();
  MTSE_REQUIRE(video.dim() == feature_dim_, InvalidInput,
               "video feature dimension " + std::to_string(video.dim()) +
                   " does not match model (" + std::to_string(feature_dim_) +
                   ")");
  ad::Var feats = tape.Constant(video.features.transpose());
  ad::Var h = net_.Forward(tape, proj_(tape, feats));
  return InterpolateTime(h, target_frames);
}

// ---- attention ----------------------------------------------------------

AttentiveCombiner::AttentiveCombiner(ParameterSet &params, int n_channels,
                                     double gamma, Rng &rng)
    : gamma_(gamma) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(n_channels));
  w_ = &params.AddUniform("attention.w", n_channels, 1, bound, rng);
  W_ = &params.AddUniform("attention.W", n_channels, n_channels, bound, rng);
  V_ = &params.AddUniform("attention.V", n_channels, n_channels, bound, rng);
  b_ = &params.AddUniform("attention.b", n_channels, 1, bound, rng);
}

AttentiveCombiner::Result AttentiveCombiner::Forward(
    ad::Tape &tape, const ad::Var &h, const ad::Var &audio_emb,
    const ad::Var &video_emb) const {
  const Eigen::Index n = h.rows(), frames = h.cols();
  MTSE_REQUIRE(audio_emb.rows() == n && audio_emb.cols() == 1, InvalidInput,
               "audio embedding must be N x 1");
  MTSE_REQUIRE(video_emb.rows() == n && video_emb.cols() == frames,
               InvalidInput, "video embedding must be N x T_M");
  ad::Var w_row = ad::Transpose(tape.Param(*w_));
  ad::Var b = tape.Param(*b_);
  ad::Var V = tape.Param(*V_);
  ad::Var wh = ad::MatMul(tape.Param(*W_), h);

  ad::Var audio_bias = ad::Add(ad::MatMul(V, audio_emb), b);
  ad::Var score_a =
      ad::MatMul(w_row, ad::Tanh(ad::AddColBroadcast(wh, audio_bias)));
  ad::Var score_v = ad::MatMul(
      w_row,
      ad::Tanh(ad::AddColBroadcast(ad::Add(wh, ad::MatMul(V, video_emb)), b)));
  // Two-way softmax of gamma * score == sigmoid of the sharpened difference.
  ad::Var w_a = ad::Sigmoid(ad::Scale(ad::Sub(score_a, score_v), gamma_));
  ad::Var w_v = ad::AddScalar(ad::Scale(w_a, -1.0), 1.0);
  ad::Var combined =
      ad::Add(ad::MulRowBroadcast(ad::BroadcastCols(audio_emb, frames), w_a),
              ad::MulRowBroadcast(video_emb, w_v));
  return {combined, ad::ConcatRows(w_a, w_v)};
}

ad::Var Fuse(const ad::Var &h, const ad::Var &e) { return ad::Mul(h, e); }

// ---- full model ---------------------------------------------------------

MtseModel::MtseModel(const ModelConfig &config, std::uint64_t seed)
    : config_(Validated(config)),
      init_rng_(MakeRng(seed, {0x1417})),
      encoder_(params_, "encoder", config.n_channels, config.KernelSamples(),
               config.StrideSamples(), init_rng_),
      dnn1_(params_, "dnn1", config, init_rng_),
      audio_clue_(params_, config, init_rng_),
      video_clue_(params_, config, init_rng_),
      combiner_(params_, config.n_channels, config.attention_gamma, init_rng_),
      dnn2_(params_, "dnn2", config, init_rng_),
      mask_head_(Linear::Create(params_, "mask", config.n_channels,
                                config.n_channels, init_rng_)),
      decoder_(params_, "decoder", config.n_channels, config.KernelSamples(),
               config.StrideSamples(), init_rng_) {}

int MtseModel::FramesFor(Eigen::Index samples) const {
  return EncodedFrames(samples, config_.KernelSamples(),
                       config_.StrideSamples());
}

ForwardOutput MtseModel::Forward(ad::Tape &tape, const AudioWaveform &mixture,
                                 const AuxInputs &aux) const {
  mixture.Validate();
  MTSE_REQUIRE(mixture.sample_rate == config_.sample_rate, InvalidInput,
               "mixture sample rate does not match the model");
  const Eigen::Index n = config_.n_channels;
  ForwardOutput out;

  ad::Var x = encoder_.Forward(tape, WaveRow(tape, mixture));
  const Eigen::Index frames = x.cols();
  ad::Var h = dnn1_.Forward(tape, x);

  if (aux.drop_audio) {
    out.audio_embedding = tape.Constant(ad::Matrix::Zero(n, 1));
  } else if (aux.cached_audio_embedding != nullptr) {
    out.audio_embedding = tape.Constant(*aux.cached_audio_embedding);
  } else {
    MTSE_REQUIRE(aux.enrolment != nullptr, InvalidInput,
                 "audio modality requested without an enrolment signal");
    out.audio_embedding = audio_clue_.Forward(tape, *aux.enrolment);
    out.audio_clue_invoked = true;
  }

  if (aux.drop_video) {
    out.video_embedding = tape.Constant(ad::Matrix::Zero(n, frames));
  } else if (aux.cached_video_embedding != nullptr) {
    out.video_embedding = tape.Constant(*aux.cached_video_embedding);
  } else {
    MTSE_REQUIRE(aux.video != nullptr, InvalidInput,
                 "video modality requested without a video stream");
    out.video_embedding = video_clue_.Forward(tape, *aux.video, frames);
    out.video_clue_invoked = true;
  }

  auto combined = combiner_.Forward(tape, h, out.audio_embedding,
                                    out.video_embedding);
  out.weights = combined.weights;
  ad::Var fused = Fuse(h, combined.combined);
  out.mask = ad::Sigmoid(mask_head_(tape, dnn2_.Forward(tape, fused)));
  out.estimate = decoder_.Forward(tape, ad::Mul(x, out.mask), mixture.size());
  return out;
}

InferenceResult MtseModel::Infer(const AudioWaveform &mixture,
                                 const AuxInputs &aux) const {
  ad::Tape tape(false);
  ForwardOutput f = Forward(tape, mixture, aux);
  InferenceResult r;
  r.estimate.samples = f.estimate.value().row(0).transpose();
  r.estimate.sample_rate = mixture.sample_rate;
  r.mask = f.mask.value();
  r.weights = f.weights.value();
  r.audio_embedding = f.audio_embedding.value();
  r.video_embedding = f.video_embedding.value();
  r.audio_clue_invoked = f.audio_clue_invoked;
  r.video_clue_invoked = f.video_clue_invoked;
  return r;
}

ad::Matrix MtseModel::AudioEmbedding(const AudioWaveform &enrolment) const {
  ad::Tape tape(false);
  return audio_clue_.Forward(tape, enrolment).value();
}

ad::Matrix MtseModel::VideoEmbedding(const VideoFeatureStream &video,
                                     Eigen::Index target_frames) const {
  ad::Tape tape(false);
  return video_clue_.Forward(tape, video, target_frames).value();
}

}  // namespace mtse
