// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mtse/datagen/corpus.h"

#include <algorithm>
#include <cmath>

#include "mtse/core/errors.h"

namespace mtse::data {

namespace {

enum SplitCode : std::uint64_t {
  kTrain = 1,
  kVal = 2,
  kTest = 3,
  kSelfEnrol = 4,
  kRemix = 0xd1,
};

// Draws k distinct integers from [0, n).
std::vector<int> DistinctDraws(Rng &rng, int n, int k) {
  std::vector<int> out;
  while (static_cast<int>(out.size()) < k) {
    const int v = UniformInt(rng, 0, n - 1);
    if (std::find(out.begin(), out.end(), v) == out.end() ||
        static_cast<int>(out.size()) >= n)
      out.push_back(v);
  }
  return out;
}

std::vector<const SpeakerProfile *> Lookup(
    const std::vector<SpeakerProfile> &speakers,
    const std::vector<std::string> &ids) {
  std::vector<const SpeakerProfile *> out;
  for (const auto &id : ids)
    for (const auto &spk : speakers)
      if (spk.id == id) out.push_back(&spk);
  return out;
}

MixtureExample MakeExample(const std::string &split, SplitCode code, int index,
                           const std::vector<const SpeakerProfile *> &pool,
                           const CorpusSpec &spec) {
  Rng rng = MakeRng(spec.seed, {code, static_cast<std::uint64_t>(index)});
  MixtureExample ex;
  ex.split = split;
  ex.index = index;
  ex.seed = rng();
  const int n = static_cast<int>(pool.size());
  const int t = UniformInt(rng, 0, n - 1);
  int j = UniformInt(rng, 0, n - 2);
  if (j >= t) ++j;
  const SpeakerProfile &target = *pool[t];
  const SpeakerProfile &interferer = *pool[j];
  const auto utts = DistinctDraws(rng, target.n_utterances, 2);
  ex.target_utterance = utts[0];
  ex.enrolment_utterance = utts[1];
  ex.interferer_utterance = UniformInt(rng, 0, interferer.n_utterances - 1);
  ex.sir_db = UniformReal(rng, spec.sir_lo, spec.sir_hi);
  ex.target_id = target.id;
  ex.interferer_id = interferer.id;

  const SynthOptions opts = spec.synth();
  Utterance s = SynthUtterance(target, ex.target_utterance, spec.clip_seconds, opts);
  Utterance e =
      SynthUtterance(target, ex.enrolment_utterance, spec.clip_seconds, opts);
  Utterance i = SynthUtterance(interferer, ex.interferer_utterance,
                               spec.clip_seconds, opts);
  MixResult mix = MixAtSir(s.audio, i.audio, ex.sir_db);
  ex.mixture = std::move(mix.mixture);
  ex.target = std::move(mix.target);
  ex.interferer = std::move(mix.scaled_interferer);
  ex.enrolment = std::move(e.audio);
  ex.video = std::move(s.video);
  return ex;
}

MixtureExample MakeSelfEnrolExample(
    int index, const std::vector<const SpeakerProfile *> &pool,
    const CorpusSpec &spec) {
  Rng rng = MakeRng(spec.seed, {kSelfEnrol, static_cast<std::uint64_t>(index)});
  MixtureExample ex;
  ex.split = "self_enrol";
  ex.index = index;
  ex.seed = rng();
  const int n = static_cast<int>(pool.size());
  const int t = UniformInt(rng, 0, n - 1);
  int j = UniformInt(rng, 0, n - 2);
  if (j >= t) ++j;
  const SpeakerProfile &target = *pool[t];
  const SpeakerProfile &interferer = *pool[j];
  const auto tu = DistinctDraws(rng, target.n_utterances, 4);
  const auto iu = DistinctDraws(rng, interferer.n_utterances, 3);
  ex.sir_db = UniformReal(rng, spec.sir_lo, spec.sir_hi);
  ex.target_id = target.id;
  ex.interferer_id = interferer.id;
  ex.target_utterance = tu[0];
  ex.enrolment_utterance = tu[3];
  ex.interferer_utterance = iu[0];

  const SynthOptions opts = spec.synth();
  AudioWaveform s, i;
  VideoFeatureStream v;
  for (int k = 0; k < 3; ++k) {
    Utterance us = SynthUtterance(target, tu[k], spec.clip_seconds, opts);
    Utterance ui = SynthUtterance(interferer, iu[k], spec.clip_seconds, opts);
    s = k == 0 ? us.audio : Concatenate(s, us.audio);
    i = k == 0 ? ui.audio : Concatenate(i, ui.audio);
    v = k == 0 ? us.video : Concatenate(v, us.video);
  }
  MixResult mix = MixAtSir(s, i, ex.sir_db);
  ex.mixture = std::move(mix.mixture);
  ex.target = std::move(mix.target);
  ex.interferer = std::move(mix.scaled_interferer);
  ex.enrolment = SynthUtterance(target, tu[3], spec.clip_seconds, opts).audio;
  ex.video = std::move(v);
  return ex;
}

}  // namespace

MixResult MixAtSir(const AudioWaveform &target, const AudioWaveform &interferer,
                   double sir_db) {
  MTSE_REQUIRE(target.size() == interferer.size(), InvalidInput,
               "mix_at_sir: target and interferer lengths differ");
  MTSE_REQUIRE(target.sample_rate == interferer.sample_rate, InvalidInput,
               "mix_at_sir: sample rate mismatch");
  MTSE_REQUIRE(std::isfinite(sir_db), InvalidInput, "mix_at_sir: SIR not finite");
  const double ns = target.samples.norm();
  const double ni = interferer.samples.norm();
  MTSE_REQUIRE(ns > 0 && ni > 0, InvalidInput,
               "mix_at_sir: zero-energy input");
  MixResult r;
  r.interferer_gain = ns / (ni * std::pow(10.0, sir_db / 20.0));
  Eigen::VectorXd s = target.samples;
  Eigen::VectorXd gi = r.interferer_gain * interferer.samples;
  const double peak = (s + gi).cwiseAbs().maxCoeff();
  if (peak > 1.0) {
    r.peak_gain = 1.0 / peak;
    s *= r.peak_gain;
    gi *= r.peak_gain;
  }
  r.mixture = {s + gi, target.sample_rate};
  r.target = {std::move(s), target.sample_rate};
  r.scaled_interferer = {std::move(gi), target.sample_rate};
  return r;
}

double RealizedSir(const AudioWaveform &target, const AudioWaveform &interferer) {
  return 10.0 * std::log10(target.samples.squaredNorm() /
                           interferer.samples.squaredNorm());
}

SynthOptions CorpusSpec::synth() const {
  SynthOptions o;
  o.sample_rate = sample_rate;
  o.frame_rate = fps;
  o.visual_dim = visual_dim;
  o.feature_noise = feature_noise;
  return o;
}

void CorpusSpec::Validate() const {
  if (n_train < 1 || n_val < 0 || n_test < 0 || n_self_enrol < 0)
    throw ConfigError("corpus: example counts must be non-negative (n_train >= 1)");
  if (sample_rate <= 0 || !(clip_seconds > 0) || !(fps > 0))
    throw ConfigError("corpus: sample_rate, clip_seconds and fps must be > 0");
  if (!(sir_lo <= sir_hi)) throw ConfigError("corpus: sir_range requires lo <= hi");
  if (train_speakers < 2 || (n_val > 0 && val_speakers < 2) ||
      ((n_test > 0 || n_self_enrol > 0) && test_speakers < 2))
    throw ConfigError("corpus: each used split needs at least 2 speakers");
  if (utterances_per_speaker < 1 || visual_dim < 1 || feature_noise < 0)
    throw ConfigError("corpus: invalid utterance count, visual_dim or noise");
}

void to_json(nlohmann::json &j, const CorpusSpec &s) {
  j = nlohmann::json{{"n_train", s.n_train},
                     {"n_val", s.n_val},
                     {"n_test", s.n_test},
                     {"sample_rate", s.sample_rate},
                     {"clip_seconds", s.clip_seconds},
                     {"fps", s.fps},
                     {"sir_range", {s.sir_lo, s.sir_hi}},
                     {"seed", s.seed},
                     {"train_speakers", s.train_speakers},
                     {"val_speakers", s.val_speakers},
                     {"test_speakers", s.test_speakers},
                     {"utterances_per_speaker", s.utterances_per_speaker},
                     {"visual_dim", s.visual_dim},
                     {"feature_noise", s.feature_noise},
                     {"n_self_enrol", s.n_self_enrol}};
}

void from_json(const nlohmann::json &j, CorpusSpec &s) {
  CorpusSpec d;
  s.n_train = j.value("n_train", d.n_train);
  s.n_val = j.value("n_val", d.n_val);
  s.n_test = j.value("n_test", d.n_test);
  s.sample_rate = j.value("sample_rate", d.sample_rate);
  s.clip_seconds = j.value("clip_seconds", d.clip_seconds);
  s.fps = j.value("fps", d.fps);
  if (j.contains("sir_range")) {
    const auto &r = j.at("sir_range");
    if (!r.is_array() || r.size() != 2)
      throw ConfigError("corpus: sir_range must be [lo, hi]");
    s.sir_lo = r[0].get<double>();
    s.sir_hi = r[1].get<double>();
  } else {
    s.sir_lo = d.sir_lo;
    s.sir_hi = d.sir_hi;
  }
  s.seed = j.value("seed", d.seed);
  s.train_speakers = j.value("train_speakers", d.train_speakers);
  s.val_speakers = j.value("val_speakers", d.val_speakers);
  s.test_speakers = j.value("test_speakers", d.test_speakers);
  s.utterances_per_speaker =
      j.value("utterances_per_speaker", d.utterances_per_speaker);
  s.visual_dim = j.value("visual_dim", d.visual_dim);
  s.feature_noise = j.value("feature_noise", d.feature_noise);
  s.n_self_enrol = j.value("n_self_enrol", d.n_self_enrol);
}

void AssignSplits(const std::vector<SpeakerProfile> &eligible,
                  const CorpusSpec &spec, std::vector<std::string> &train,
                  std::vector<std::string> &val,
                  std::vector<std::string> &test) {
  const int quota[3] = {spec.train_speakers, spec.n_val > 0 ? spec.val_speakers : 0,
                        spec.n_test > 0 || spec.n_self_enrol > 0
                            ? spec.test_speakers
                            : 0};
  const int needed = quota[0] + quota[1] + quota[2];
  if (static_cast<int>(eligible.size()) < needed)
    throw ConfigError("corpus: " + std::to_string(eligible.size()) +
                      " eligible speakers (>= " +
                      std::to_string(kMinCorpusUtterances) +
                      " utterances), need " + std::to_string(needed));
  std::vector<const SpeakerProfile *> order;
  for (const auto &s : eligible) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(),
                   [](const SpeakerProfile *a, const SpeakerProfile *b) {
                     return a->spectral_signature < b->spectral_signature;
                   });
  std::vector<std::string> *out[3] = {&train, &val, &test};
  for (auto *v : out) v->clear();
  for (const SpeakerProfile *spk : order) {
    int best = -1;
    double best_ratio = 0;
    for (int s = 0; s < 3; ++s) {
      if (quota[s] == 0) continue;
      const double ratio = static_cast<double>(out[s]->size()) / quota[s];
      if (best < 0 || ratio < best_ratio) {
        best = s;
        best_ratio = ratio;
      }
    }
    out[best]->push_back(spk->id);
  }
}

CorpusPlan PlanCorpus(const CorpusSpec &spec) {
  spec.Validate();
  const int count = spec.train_speakers + spec.val_speakers + spec.test_speakers;
  return PlanCorpus(spec, MakeSpeakerPool(count, spec.utterances_per_speaker,
                                          spec.sample_rate, spec.seed));
}

CorpusPlan PlanCorpus(const CorpusSpec &spec,
                      const std::vector<SpeakerProfile> &speakers) {
  spec.Validate();
  CorpusPlan plan;
  plan.spec = spec;
  for (const auto &s : speakers)
    if (s.n_utterances >= kMinCorpusUtterances) plan.speakers.push_back(s);
  AssignSplits(plan.speakers, spec, plan.train_ids, plan.val_ids, plan.test_ids);
  if (spec.n_self_enrol > 0) {
    int eligible = 0;
    for (const auto *s : Lookup(plan.speakers, plan.test_ids))
      eligible += s->n_utterances >= kMinSelfEnrolUtterances;
    if (eligible < 2)
      throw ConfigError("corpus: self-enrolment needs 2 test speakers with >= " +
                        std::to_string(kMinSelfEnrolUtterances) + " utterances");
  }
  return plan;
}

int SplitSize(const CorpusSpec &spec, const std::string &split) {
  if (split == "train") return spec.n_train;
  if (split == "val") return spec.n_val;
  if (split == "test") return spec.n_test;
  if (split == "self_enrol") return spec.n_self_enrol;
  throw InvalidInput("unknown split '" + split + "'");
}

MixtureExample GenerateExample(const CorpusPlan &plan, const std::string &split,
                               int index) {
  MTSE_REQUIRE(index >= 0 && index < SplitSize(plan.spec, split), InvalidInput,
               "example index out of range for split " + split);
  if (split == "train")
    return MakeExample(split, kTrain, index, Lookup(plan.speakers, plan.train_ids),
                       plan.spec);
  if (split == "val")
    return MakeExample(split, kVal, index, Lookup(plan.speakers, plan.val_ids),
                       plan.spec);
  if (split == "test")
    return MakeExample(split, kTest, index, Lookup(plan.speakers, plan.test_ids),
                       plan.spec);
  std::vector<const SpeakerProfile *> pool;
  for (const auto *s : Lookup(plan.speakers, plan.test_ids))
    if (s->n_utterances >= kMinSelfEnrolUtterances) pool.push_back(s);
  return MakeSelfEnrolExample(index, pool, plan.spec);
}

namespace {

Corpus Materialize(CorpusPlan plan) {
  Corpus c;
  static_cast<CorpusPlan &>(c) = std::move(plan);
  std::vector<MixtureExample> *out[4] = {&c.train, &c.val, &c.test, &c.self_enrol};
  for (int s = 0; s < 4; ++s)
    for (int i = 0; i < SplitSize(c.spec, kSplitNames[s]); ++i)
      out[s]->push_back(GenerateExample(c, kSplitNames[s], i));
  return c;
}

}  // namespace

Corpus BuildCorpus(const CorpusSpec &spec) { return Materialize(PlanCorpus(spec)); }

Corpus BuildCorpus(const CorpusSpec &spec,
                   const std::vector<SpeakerProfile> &speakers) {
  return Materialize(PlanCorpus(spec, speakers));
}

std::vector<MixtureExample> DynamicRemix(const std::vector<MixtureExample> &train,
                                         const CorpusSpec &spec, int epoch,
                                         std::uint64_t seed) {
  const int n = static_cast<int>(train.size());
  std::vector<MixtureExample> out;
  out.reserve(n);
  bool multi_speaker = false;
  for (const auto &ex : train) multi_speaker |= ex.target_id != train[0].target_id;
  MTSE_REQUIRE(multi_speaker, InvalidInput,
               "dynamic remix needs targets from at least two speakers");
  for (int idx = 0; idx < n; ++idx) {
    const MixtureExample &ex = train[idx];
    Rng rng = MakeRng(seed, {kRemix, static_cast<std::uint64_t>(epoch),
                             static_cast<std::uint64_t>(idx)});
    int k;
    do {
      k = UniformInt(rng, 0, n - 1);
    } while (train[k].target_id == ex.target_id);
    MixtureExample r = ex;
    r.sir_db = UniformReal(rng, spec.sir_lo, spec.sir_hi);
    r.interferer_id = train[k].target_id;
    r.interferer_utterance = train[k].target_utterance;
    MixResult mix = MixAtSir(ex.target, train[k].target, r.sir_db);
    r.mixture = std::move(mix.mixture);
    r.target = std::move(mix.target);
    r.interferer = std::move(mix.scaled_interferer);
    out.push_back(std::move(r));
  }
  return out;
}

FrameDrop BurstFrameDrop(const VideoFeatureStream &video, double rate, Rng &rng) {
  MTSE_REQUIRE(rate >= 0 && rate < 1, InvalidInput,
               "frame drop rate must lie in [0, 1)");
  FrameDrop d;
  d.video = video;
  const Eigen::Index frames = video.frames();
  d.count = static_cast<Eigen::Index>(std::lround(rate * frames));
  if (d.count == 0) return d;
  d.start = UniformInt(rng, 0, static_cast<int>(frames - d.count));
  d.video.features.middleRows(d.start, d.count).setZero();
  return d;
}

}  // namespace mtse::data
