// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mtse/datagen/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "mtse/core/errors.h"

namespace mtse::data {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kF1Low = 200.0;
constexpr double kRatioLow = 1.8, kRatioHigh = 2.4;
constexpr double kF0Low = 90.0, kF0High = 240.0;
constexpr std::uint64_t kFeatureBasisSeed = 0x5eedf00d;

// RBJ band-pass biquad (0 dB peak gain), applied in place.
void BandPass(Eigen::VectorXd &x, double fc, double q, int fs) {
  const double w0 = kTwoPi * fc / fs;
  const double alpha = std::sin(w0) / (2 * q);
  const double a0 = 1 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2 * std::cos(w0) / a0, a2 = (1 - alpha) / a0;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (Eigen::Index n = 0; n < x.size(); ++n) {
    const double in = x(n);
    const double out = b0 * in + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = in;
    y2 = y1;
    y1 = out;
    x(n) = out;
  }
}

Eigen::VectorXd SyllabicEnvelope(Eigen::Index length, int fs, Rng &rng) {
  Eigen::VectorXd target = Eigen::VectorXd::Zero(length);
  bool on = UniformReal(rng, 0, 1) < 0.7;
  Eigen::Index pos = 0;
  while (pos < length) {
    const double secs = on ? UniformReal(rng, 0.08, 0.25)
                           : UniformReal(rng, 0.03, 0.15);
    const Eigen::Index len = std::max<Eigen::Index>(
        1, static_cast<Eigen::Index>(std::lround(secs * fs)));
    const Eigen::Index n = std::min(len, length - pos);
    if (on) target.segment(pos, n).setConstant(UniformReal(rng, 0.4, 1.0));
    pos += n;
    on = !on;
  }
  if (target.maxCoeff() == 0.0) target.setConstant(UniformReal(rng, 0.4, 1.0));
  // Hann smoothing (~20 ms) for soft onsets.
  const int half = std::max(1, fs / 100);
  Eigen::VectorXd win(2 * half + 1);
  for (int k = 0; k <= 2 * half; ++k)
    win(k) = 0.5 - 0.5 * std::cos(kTwoPi * (k + 1) / (2 * half + 2));
  win /= win.sum();
  Eigen::VectorXd env(length);
  for (Eigen::Index n = 0; n < length; ++n) {
    double acc = 0;
    for (int k = -half; k <= half; ++k) {
      const Eigen::Index m = std::clamp<Eigen::Index>(n + k, 0, length - 1);
      acc += win(k + half) * target(m);
    }
    env(n) = acc;
  }
  return env;
}

// Fixed nonlinear feature maps shared by every speaker.
struct FeatureBasis {
  Eigen::VectorXd a, b, c;             // activity block
  Eigen::MatrixXd omega;               // identity block frequencies (3 x D)
  Eigen::VectorXd phase;
  int activity_dims = 0;
};

FeatureBasis MakeBasis(int dims) {
  Rng rng = MakeRng(kFeatureBasisSeed, {static_cast<std::uint64_t>(dims)});
  FeatureBasis fb;
  fb.activity_dims = dims / 2;
  const int id_dims = dims - fb.activity_dims;
  fb.a.resize(fb.activity_dims);
  fb.b.resize(fb.activity_dims);
  fb.c.resize(fb.activity_dims);
  for (int k = 0; k < fb.activity_dims; ++k) {
    fb.a(k) = Gaussian(rng, 0, 3.0);
    fb.b(k) = Gaussian(rng, 0, 3.0);
    fb.c(k) = Gaussian(rng, 0, 0.5);
  }
  fb.omega.resize(3, id_dims);
  fb.phase.resize(id_dims);
  for (int k = 0; k < id_dims; ++k) {
    for (int r = 0; r < 3; ++r) fb.omega(r, k) = Gaussian(rng, 0, 2.0);
    fb.phase(k) = UniformReal(rng, 0, kTwoPi);
  }
  return fb;
}

Eigen::Vector3d SignatureCoordinates(const SpeakerProfile &spk) {
  return {3.0 * std::log(spk.formant1() / kF1Low) / std::log(8.0),
          (spk.spectral_signature.at(1) - kRatioLow) / (kRatioHigh - kRatioLow),
          std::log(spk.f0() / kF0Low) / std::log(kF0High / kF0Low)};
}

}  // namespace

int VideoFrameCount(double duration_s, double frame_rate) {
  return std::max(1, static_cast<int>(std::lround(duration_s * frame_rate)));
}

std::vector<SpeakerProfile> MakeSpeakerPool(int count, int utterances,
                                            int sample_rate,
                                            std::uint64_t seed) {
  MTSE_REQUIRE(count >= 1 && sample_rate > 0, InvalidInput,
               "speaker pool needs a positive count and sample rate");
  Rng rng = MakeRng(seed, {0x5bea});
  const double f1_high = std::min(1600.0, 0.42 * sample_rate / kRatioHigh);
  std::vector<SpeakerProfile> pool;
  pool.reserve(count);
  for (int i = 0; i < count; ++i) {
    SpeakerProfile spk;
    char id[32];
    std::snprintf(id, sizeof(id), "spk%03d", i);
    spk.id = id;
    // Jittered log-spaced first formant keeps neighbours distinct.
    const double u = (i + UniformReal(rng, 0.2, 0.8)) / count;
    const double f1 = kF1Low * std::pow(f1_high / kF1Low, u);
    spk.spectral_signature = {f1, UniformReal(rng, kRatioLow, kRatioHigh),
                              UniformReal(rng, kF0Low, kF0High),
                              UniformReal(rng, 0.08, 0.15)};
    spk.n_utterances = utterances;
    spk.seed = rng();
    pool.push_back(std::move(spk));
  }
  return pool;
}

Utterance SynthUtterance(const SpeakerProfile &speaker, int utterance_index,
                         double duration_s, const SynthOptions &options) {
  Rng rng = MakeRng(speaker.seed, {static_cast<std::uint64_t>(utterance_index),
                                   static_cast<std::uint64_t>(std::lround(
                                       duration_s * options.sample_rate))});
  return SynthUtterance(speaker, duration_s, options, rng);
}

Utterance SynthUtterance(const SpeakerProfile &speaker, double duration_s,
                         const SynthOptions &options, Rng &rng) {
  MTSE_REQUIRE(duration_s > 0, InvalidInput, "duration must be positive");
  const int fs = options.sample_rate;
  const Eigen::Index length = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::lround(duration_s * fs)));

  // Pitched excitation: band-limited sawtooth with slow intonation + noise.
  const double f0 = speaker.f0() * UniformReal(rng, 0.9, 1.1);
  const double vib_rate = UniformReal(rng, 2.0, 5.0);
  const double vib_phase = UniformReal(rng, 0, kTwoPi);
  Eigen::VectorXd excitation(length);
  double phase = UniformReal(rng, 0, kTwoPi);
  for (Eigen::Index n = 0; n < length; ++n) {
    const double t = static_cast<double>(n) / fs;
    const double inst = f0 * (1 + 0.08 * std::sin(kTwoPi * vib_rate * t +
                                                  vib_phase));
    phase += kTwoPi * inst / fs;
    double acc = 0;
    const int harmonics = static_cast<int>(0.45 * fs / inst);
    for (int h = 1; h <= harmonics; ++h) acc += std::sin(h * phase) / h;
    excitation(n) = acc + 0.3 * Gaussian(rng);
  }

  Eigen::VectorXd f1 = excitation, f2 = excitation;
  const double bw = speaker.bandwidth_ratio();
  BandPass(f1, speaker.formant1(), 1.0 / bw, fs);
  BandPass(f2, std::min(speaker.formant2(), 0.45 * fs), 1.0 / bw, fs);

  Utterance utt;
  utt.envelope = SyllabicEnvelope(length, fs, rng);
  Eigen::VectorXd audio = (f1 + 0.6 * f2).cwiseProduct(utt.envelope);
  const double rms = std::sqrt(audio.squaredNorm() / length);
  const double target_rms = UniformReal(rng, 0.08, 0.2);
  if (rms > 0) audio *= target_rms / rms;
  utt.audio = {audio, fs};

  // Video-rate features from the envelope and the speaker signature.
  const int frames = VideoFrameCount(duration_s, options.frame_rate);
  const FeatureBasis basis = MakeBasis(options.visual_dim);
  const Eigen::Vector3d z = SignatureCoordinates(speaker);
  Eigen::RowVectorXd identity =
      ((z.transpose() * basis.omega).array() + basis.phase.transpose().array())
          .cos();
  Eigen::MatrixXd feats(frames, options.visual_dim);
  double prev = 0;
  for (int f = 0; f < frames; ++f) {
    const Eigen::Index lo = std::min<Eigen::Index>(
        length - 1, static_cast<Eigen::Index>(f * fs / options.frame_rate));
    const Eigen::Index hi = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>((f + 1) * fs / options.frame_rate), lo + 1,
        length);
    const double env = utt.envelope.segment(lo, hi - lo).mean();
    const double delta = env - prev;
    prev = env;
    for (int k = 0; k < basis.activity_dims; ++k)
      feats(f, k) = std::tanh(basis.a(k) * env + basis.b(k) * delta + basis.c(k));
    feats.row(f).tail(identity.size()) = identity;
    for (int k = 0; k < options.visual_dim; ++k)
      feats(f, k) += Gaussian(rng, 0, options.feature_noise);
  }
  // Stored as float32 on disk; keep in-memory values representable.
  utt.video.features = feats.cast<float>().cast<double>();
  utt.video.frame_rate = options.frame_rate;
  utt.video.spec.frame_rate = options.frame_rate;
  return utt;
}

}  // namespace mtse::data
