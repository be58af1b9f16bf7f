// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "mtse/core/errors.h"
#include "mtse/datagen/corpus.h"
#include "mtse/datagen/io.h"
#include "mtse/datagen/synth.h"
#include "test_util.h"

using namespace mtse;
using namespace mtse::data;
using mtse::testing::RandomWave;

namespace {

double Rms(const Eigen::VectorXd &x) { return std::sqrt(x.squaredNorm() / x.size()); }

CorpusSpec SmallSpec(std::uint64_t seed = 1) {
  CorpusSpec s;
  s.n_train = 48;
  s.n_val = 8;
  s.n_test = 8;
  s.sample_rate = 8000;
  s.clip_seconds = 0.5;
  s.utterances_per_speaker = 6;
  s.visual_dim = 16;
  s.seed = seed;
  return s;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string &name)
      : path(std::filesystem::temp_directory_path() / ("mtse_" + name)) {
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

// One-sample Kolmogorov-Smirnov statistic against U(lo, hi).
double KsUniform(std::vector<double> xs, double lo, double hi) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double f = (xs[k] - lo) / (hi - lo);
    d = std::max({d, (k + 1) / n - f, f - k / n});
  }
  return d;
}

}  // namespace

TEST_CASE("speaker pool") {
  const auto pool = MakeSpeakerPool(40, 5, 16000, 3);
  REQUIRE(pool.size() == 40);
  std::set<std::vector<double>> signatures;
  std::set<std::string> ids;
  for (const auto &sp : pool) {
    signatures.insert(sp.spectral_signature);
    ids.insert(sp.id);
    CHECK(sp.n_utterances == 5);
    CHECK(sp.formant2() > sp.formant1());
    CHECK(sp.formant2() < 8000.0);
  }
  CHECK(signatures.size() == 40);
  CHECK(ids.size() == 40);
  for (std::size_t k = 1; k < pool.size(); ++k)
    CHECK(pool[k - 1].formant1() <= pool[k].formant1());
}

TEST_CASE("utterance synthesis") {
  const auto pool = MakeSpeakerPool(6, 4, 16000, 9);
  SynthOptions opt;
  SUBCASE("deterministic per speaker and utterance") {
    const auto a = SynthUtterance(pool[2], 1, 1.0, opt);
    const auto b = SynthUtterance(pool[2], 1, 1.0, opt);
    const auto c = SynthUtterance(pool[2], 2, 1.0, opt);
    CHECK(a.audio.samples == b.audio.samples);
    CHECK(a.video.features == b.video.features);
    CHECK(a.audio.samples != c.audio.samples);
  }
  SUBCASE("RMS and lengths") {
    for (const auto &sp : pool)
      for (int u = 0; u < 4; ++u) {
        const auto utt = SynthUtterance(sp, u, 3.0, opt);
        CHECK(utt.audio.size() == 48000);
        CHECK(utt.video.frames() == 75);
        CHECK(utt.video.dim() == 512);
        const double rms = Rms(utt.audio.samples);
        CHECK(rms >= 0.05);
        CHECK(rms <= 0.5);
        CHECK(utt.audio.samples.allFinite());
      }
  }
  CHECK(VideoFrameCount(3.0, 25.0) == 75);
  CHECK(VideoFrameCount(0.5, 25.0) == 13);
}

TEST_CASE("mixing at a target SIR") {
  Rng rng = MakeRng(17);
  const auto s = RandomWave(4000, 16000, rng, 0.1);
  const auto i = RandomWave(4000, 16000, rng, 0.2);
  SUBCASE("0 dB gives equal energies") {
    const auto m = MixAtSir(s, i, 0.0);
    CHECK(std::abs(m.target.samples.squaredNorm() / m.scaled_interferer.samples.squaredNorm() -
                   1.0) < 1e-6);
  }
  SUBCASE("+5 dB is realized within 0.01 dB") {
    const auto m = MixAtSir(s, i, 5.0);
    CHECK(std::abs(RealizedSir(m.target, m.scaled_interferer) - 5.0) < 0.01);
  }
  SUBCASE("gain doubles per 6.02 dB") {
    const double step = 20.0 * std::log10(2.0);
    const double g1 = MixAtSir(s, i, 3.0).interferer_gain;
    const double g2 = MixAtSir(s, i, 3.0 - step).interferer_gain;
    CHECK(std::abs(g2 / g1 - 2.0) < 1e-12);
  }
  SUBCASE("mixture is the exact sum") {
    const auto m = MixAtSir(s, i, -4.0);
    CHECK(m.mixture.samples == m.target.samples + m.scaled_interferer.samples);
    CHECK(m.peak_gain == 1.0);
  }
  SUBCASE("loud inputs are rescaled jointly") {
    AudioWaveform loud = s;
    loud.samples *= 30.0;
    const auto m = MixAtSir(loud, i, -5.0);
    CHECK(m.peak_gain < 1.0);
    CHECK(m.mixture.samples.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(std::abs(RealizedSir(m.target, m.scaled_interferer) + 5.0) < 0.01);
    CHECK(m.mixture.samples == m.target.samples + m.scaled_interferer.samples);
  }
  SUBCASE("invalid inputs") {
    AudioWaveform silent = s;
    silent.samples.setZero();
    CHECK_THROWS_AS(MixAtSir(silent, i, 0.0), InvalidInput);
    CHECK_THROWS_AS(MixAtSir(s, silent, 0.0), InvalidInput);
    CHECK_THROWS_AS(MixAtSir(s, s.Segment(0, 100), 0.0), InvalidInput);
  }
}

TEST_CASE("corpus construction") {
  const CorpusSpec spec = SmallSpec();
  const Corpus corpus = BuildCorpus(spec);
  REQUIRE(corpus.train.size() == 48);
  REQUIRE(corpus.val.size() == 8);
  REQUIRE(corpus.test.size() == 8);

  SUBCASE("speaker pools are disjoint") {
    std::set<std::string> tr(corpus.train_ids.begin(), corpus.train_ids.end());
    for (const auto &id : corpus.test_ids) CHECK(tr.count(id) == 0);
    for (const auto &id : corpus.val_ids) CHECK(tr.count(id) == 0);
    for (const auto &ex : corpus.test) {
      CHECK(tr.count(ex.target_id) == 0);
      CHECK(tr.count(ex.interferer_id) == 0);
    }
  }
  SUBCASE("example invariants") {
    for (const auto *split : {&corpus.train, &corpus.val, &corpus.test})
      for (const auto &ex : *split) {
        CHECK(ex.target_id != ex.interferer_id);
        CHECK(ex.enrolment_utterance != ex.target_utterance);
        CHECK(ex.mixture.samples == ex.target.samples + ex.interferer.samples);
        CHECK(std::abs(RealizedSir(ex.target, ex.interferer) - ex.sir_db) < 0.01);
        CHECK(ex.sir_db >= spec.sir_lo);
        CHECK(ex.sir_db <= spec.sir_hi);
        CHECK(ex.video.frames() == VideoFrameCount(spec.clip_seconds, spec.fps));
        CHECK(ex.mixture.size() == 4000);
      }
  }
  SUBCASE("pure function of the spec") {
    const Corpus again = BuildCorpus(spec);
    for (std::size_t k = 0; k < corpus.train.size(); ++k) {
      CHECK(again.train[k].mixture.samples == corpus.train[k].mixture.samples);
      CHECK(again.train[k].video.features == corpus.train[k].video.features);
    }
    const Corpus other = BuildCorpus(SmallSpec(2));
    CHECK(other.train[0].mixture.samples != corpus.train[0].mixture.samples);
  }
  SUBCASE("streamed examples equal the in-memory corpus") {
    const CorpusPlan plan = PlanCorpus(spec);
    const auto ex = GenerateExample(plan, "test", 5);
    CHECK(ex.mixture.samples == corpus.test[5].mixture.samples);
    CHECK_THROWS(GenerateExample(plan, "bogus", 0));
  }
}

TEST_CASE("speakers with fewer than three utterances are excluded") {
  CorpusSpec spec = SmallSpec();
  spec.train_speakers = 5;
  spec.val_speakers = 2;
  spec.test_speakers = 2;
  auto speakers = MakeSpeakerPool(10, 6, spec.sample_rate, 4);
  speakers[3].n_utterances = 2;
  const std::string excluded = speakers[3].id;
  const Corpus corpus = BuildCorpus(spec, speakers);
  for (const auto *ids : {&corpus.train_ids, &corpus.val_ids, &corpus.test_ids})
    CHECK(std::find(ids->begin(), ids->end(), excluded) == ids->end());
  for (const auto *split : {&corpus.train, &corpus.val, &corpus.test})
    for (const auto &ex : *split) {
      CHECK(ex.target_id != excluded);
      CHECK(ex.interferer_id != excluded);
    }
  speakers[4].n_utterances = 1;
  CHECK_THROWS_AS(BuildCorpus(spec, speakers), ConfigError);
}

TEST_CASE("realized SIR is uniform over the range") {
  CorpusSpec spec = SmallSpec(5);
  spec.n_train = 1000;
  spec.n_val = 1;
  spec.n_test = 1;
  spec.clip_seconds = 0.05;
  const CorpusPlan plan = PlanCorpus(spec);
  std::vector<double> sirs;
  for (int k = 0; k < 1000; ++k) {
    const auto ex = GenerateExample(plan, "train", k);
    sirs.push_back(RealizedSir(ex.target, ex.interferer));
  }
  CHECK(KsUniform(sirs, spec.sir_lo, spec.sir_hi) < 0.05);
}

TEST_CASE("dynamic remixing") {
  CorpusSpec spec = SmallSpec();
  spec.n_train = 200;
  spec.clip_seconds = 0.1;
  const Corpus corpus = BuildCorpus(spec);
  const auto e1 = DynamicRemix(corpus.train, spec, 1, 77);
  const auto e2 = DynamicRemix(corpus.train, spec, 2, 77);
  const auto e1b = DynamicRemix(corpus.train, spec, 1, 77);
  REQUIRE(e1.size() == corpus.train.size());
  int differ = 0;
  for (std::size_t k = 0; k < e1.size(); ++k) {
    // Same clean target, up to the joint anti-clipping gain.
    const Eigen::VectorXd &orig = corpus.train[k].target.samples;
    const double c = e1[k].target.samples.dot(orig) / orig.squaredNorm();
    CHECK(c > 0.0);
    CHECK(c <= 1.0);
    CHECK((e1[k].target.samples - c * orig).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(e1[k].target_id != e1[k].interferer_id);
    CHECK(e1[k].mixture.samples == e1[k].target.samples + e1[k].interferer.samples);
    CHECK(std::abs(RealizedSir(e1[k].target, e1[k].interferer) - e1[k].sir_db) < 0.01);
    CHECK(e1[k].mixture.samples == e1b[k].mixture.samples);
    const bool same_pair = e1[k].interferer_id == e2[k].interferer_id &&
                           e1[k].interferer_utterance == e2[k].interferer_utterance;
    if (!same_pair) ++differ;
  }
  CHECK(differ >= 0.9 * e1.size());
  // Held-out splits are untouched by remixing.
  const Corpus again = BuildCorpus(spec);
  for (std::size_t k = 0; k < corpus.val.size(); ++k)
    CHECK(again.val[k].mixture.samples == corpus.val[k].mixture.samples);
}

TEST_CASE("burst frame drop") {
  Rng rng = MakeRng(31);
  VideoFeatureStream v;
  v.features = Eigen::MatrixXd::Constant(75, 4, 1.5);
  SUBCASE("one contiguous run of round(rate * T) frames") {
    for (int rep = 0; rep < 50; ++rep) {
      const auto d = BurstFrameDrop(v, 1.0 / 3.0, rng);
      CHECK(d.count == 25);
      int zero_rows = 0, first = -1, last = -1;
      for (int f = 0; f < 75; ++f)
        if (d.video.features.row(f).cwiseAbs().maxCoeff() == 0.0) {
          ++zero_rows;
          if (first < 0) first = f;
          last = f;
        }
      CHECK(zero_rows == 25);
      CHECK(last - first + 1 == 25);
      CHECK(first == d.start);
    }
  }
  SUBCASE("zero rate leaves the stream untouched") {
    const auto d = BurstFrameDrop(v, 0.0, rng);
    CHECK(d.count == 0);
    CHECK(d.video.features == v.features);
  }
  SUBCASE("start is uniform over valid positions") {
    const int positions = 75 - 25 + 1;
    std::vector<int> counts(positions, 0);
    const int draws = 5000;
    for (int k = 0; k < draws; ++k) ++counts[BurstFrameDrop(v, 1.0 / 3.0, rng).start];
    const double expected = static_cast<double>(draws) / positions;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // Upper 1% point of chi-square with 50 degrees of freedom.
    CHECK(chi2 < 76.154);
  }
  CHECK_THROWS_AS(BurstFrameDrop(v, 1.0, rng), InvalidInput);
  CHECK_THROWS_AS(BurstFrameDrop(v, -0.1, rng), InvalidInput);
}

TEST_CASE("video features identify the speaker") {
  // Ridge-regression probe from per-frame features to one-hot speaker ids.
  SynthOptions opt;
  opt.sample_rate = 8000;
  const int n_spk = 8;
  const auto pool = MakeSpeakerPool(n_spk, 12, opt.sample_rate, 13);
  std::vector<Eigen::RowVectorXd> xs_train, xs_test;
  std::vector<int> ys_train, ys_test;
  for (int s = 0; s < n_spk; ++s)
    for (int u = 0; u < 12; ++u) {
      const auto utt = SynthUtterance(pool[s], u, 0.5, opt);
      for (Eigen::Index f = 0; f < utt.video.frames(); ++f) {
        (u < 8 ? xs_train : xs_test).push_back(utt.video.features.row(f));
        (u < 8 ? ys_train : ys_test).push_back(s);
      }
    }
  const Eigen::Index d = opt.visual_dim + 1;
  Eigen::MatrixXd X(xs_train.size(), d), Y = Eigen::MatrixXd::Zero(xs_train.size(), n_spk);
  for (std::size_t k = 0; k < xs_train.size(); ++k) {
    X.row(k) << xs_train[k], 1.0;
    Y(k, ys_train[k]) = 1.0;
  }
  const Eigen::MatrixXd A = X.transpose() * X + 1e-3 * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd W = A.ldlt().solve(X.transpose() * Y);
  int correct = 0;
  for (std::size_t k = 0; k < xs_test.size(); ++k) {
    Eigen::RowVectorXd x(d);
    x << xs_test[k], 1.0;
    Eigen::Index arg;
    (x * W).maxCoeff(&arg);
    if (arg == ys_test[k]) ++correct;
  }
  const double accuracy = static_cast<double>(correct) / xs_test.size();
  CAPTURE(accuracy);
  CHECK(accuracy > 0.95);
}

TEST_CASE("file formats") {
  Rng rng = MakeRng(41);
  TempDir tmp("io_test");
  std::filesystem::create_directories(tmp.path);
  SUBCASE("WAV round trip within 16-bit precision") {
    auto w = RandomWave(1000, 16000, rng, 0.3);
    w.samples = w.samples.cwiseMax(-1.0).cwiseMin(0.99);
    WriteWav(tmp.path / "a.wav", w);
    const auto back = ReadWav(tmp.path / "a.wav");
    CHECK(back.sample_rate == 16000);
    REQUIRE(back.size() == w.size());
    CHECK((back.samples - w.samples).cwiseAbs().maxCoeff() <= std::pow(2.0, -15));
  }
  SUBCASE("feature round trip is bit-exact") {
    VideoFeatureStream v;
    v.features = mtse::testing::RandomMatrix(13, 7, rng).cast<float>().cast<double>();
    WriteFeatures(tmp.path / "v.f32", v);
    const auto back = ReadFeatures(tmp.path / "v.f32");
    CHECK(back.features == v.features);
    CHECK(back.frame_rate == v.frame_rate);
  }
  SUBCASE("truncated files raise parse errors") {
    const auto bytes = EncodeWav(RandomWave(100, 8000, rng, 0.1));
    for (std::size_t cut : {std::size_t{0}, std::size_t{10}, std::size_t{30}, bytes.size() - 3})
      CHECK_THROWS_AS(DecodeWav(bytes.substr(0, cut)), ParseError);
    VideoFeatureStream v;
    v.features = Eigen::MatrixXd::Ones(4, 3);
    const auto feat = EncodeFeatures(v);
    const nlohmann::json side = {{"frames", 4}, {"dim", 3}, {"fps", 25.0}};
    CHECK_THROWS_AS(DecodeFeatures(feat.substr(0, feat.size() - 1), side), ParseError);
    try {
      DecodeWav(bytes.substr(0, 30));
    } catch (const ParseError &e) {
      CHECK(e.offset() <= 30);
    }
  }
}

TEST_CASE("corpus on disk") {
  CorpusSpec spec = SmallSpec();
  spec.n_train = 8;
  spec.n_val = 4;
  spec.n_test = 4;
  TempDir tmp("corpus_test");
  const Corpus corpus = BuildCorpus(spec);
  const auto stats = WriteCorpus(corpus, tmp.path);
  CHECK(stats.files_written > 0);
  int records = 0;
  {
    std::istringstream lines(ReadFile(tmp.path / "manifest.jsonl"));
    for (std::string line; std::getline(lines, line);)
      if (!line.empty()) ++records;
  }
  CHECK(records == 16);

  SUBCASE("rewriting is idempotent") {
    const auto again = WriteCorpus(corpus, tmp.path);
    CHECK(again.files_written == 0);
    CHECK(again.manifest_checksum == stats.manifest_checksum);
    const auto streamed = GenerateCorpusFiles(PlanCorpus(spec), tmp.path);
    CHECK(streamed.files_written == 0);
  }
  SUBCASE("loading restores the examples") {
    const Corpus loaded = LoadCorpus(tmp.path);
    REQUIRE(loaded.test.size() == 4);
    CHECK(loaded.test[2].target_id == corpus.test[2].target_id);
    CHECK((loaded.test[2].mixture.samples - corpus.test[2].mixture.samples)
              .cwiseAbs()
              .maxCoeff() <= std::pow(2.0, -15));
    CHECK(loaded.train_ids == corpus.train_ids);
  }
  SUBCASE("a different seed changes the checksum") {
    TempDir other("corpus_test_seed");
    const auto s2 = WriteCorpus(BuildCorpus(SmallSpec(99)), other.path);
    CHECK(s2.manifest_checksum != stats.manifest_checksum);
  }
  SUBCASE("missing corpus is a configuration error") {
    CHECK_THROWS_AS(LoadCorpus(tmp.path / "nope"), ConfigError);
  }
}
