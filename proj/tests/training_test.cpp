// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "mtse/core/errors.h"
#include "mtse/training/checkpoint.h"
#include "mtse/training/losses.h"
#include "mtse/training/optimizer.h"
#include "mtse/training/si_sdr.h"
#include "mtse/training/trainer.h"
#include "test_util.h"

using namespace mtse;
using mtse::testing::FiniteDifferenceGrad;
using mtse::testing::RandomExample;
using mtse::testing::RandomMatrix;
using mtse::testing::RelativeError;
using mtse::testing::TinyModelConfig;

namespace {

// Reference SI-SDR with the energy floor applied relative to |e|^2.
double OracleSiSdr(const Eigen::VectorXd &e, const Eigen::VectorXd &s) {
  double es = 0, ss = 0, ee = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    es += e(k) * s(k);
    ss += s(k) * s(k);
    ee += e(k) * e(k);
  }
  const double alpha = es / ss;
  double p = 0, q = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    p += alpha * s(k) * alpha * s(k);
    q += (alpha * s(k) - e(k)) * (alpha * s(k) - e(k));
  }
  return 10.0 * std::log10((p / ee + 1e-8) / (q / ee + 1e-8));
}

struct Fixture {
  ModelConfig config = TinyModelConfig();
  std::vector<data::MixtureExample> examples;
  Batch batch;
  explicit Fixture(int n = 3) {
    Rng rng = MakeRng(71);
    for (int k = 0; k < n; ++k) examples.push_back(RandomExample(config, 17, 3, rng, k));
    for (const auto &ex : examples) batch.push_back(&ex);
  }
};

double LossGradientError(MtseModel &model, const std::function<double(bool)> &run) {
  model.params().ZeroGrad();
  run(true);
  const Eigen::VectorXd analytic = model.params().FlatGrads();
  const Eigen::VectorXd numeric =
      FiniteDifferenceGrad(model.params(), [&] { return run(false); });
  return RelativeError(analytic, numeric);
}

data::CorpusSpec TinyCorpusSpec() {
  data::CorpusSpec s;
  s.n_train = 12;
  s.n_val = 4;
  s.n_test = 4;
  s.sample_rate = 4000;
  s.clip_seconds = 0.1;
  s.visual_dim = 3;
  s.utterances_per_speaker = 5;
  s.seed = 3;
  return s;
}

ModelConfig TinyTrainModel() {
  ModelConfig c = TinyModelConfig();
  c.sample_rate = 4000;
  return c;
}

TrainConfig TinyTrainConfig(Strategy strategy) {
  TrainConfig t;
  t.strategy = strategy;
  t.lr = 1e-2;
  t.batch_size = 4;
  t.max_epochs = 3;
  t.seed = 5;
  return t;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string &name)
      : path(std::filesystem::temp_directory_path() / ("mtse_" + name)) {
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("SI-SDR hand cases") {
  Rng rng = MakeRng(3);
  Eigen::VectorXd s(4), n(4);
  s << 1, 0, 0, 0;
  n << 0, 0.5, 0, 0;
  SUBCASE("orthogonal residual at a quarter of the energy") {
    const double v = SiSdr(Eigen::VectorXd(s + n), s);
    CHECK(std::abs(v - OracleSiSdr(s + n, s)) < 1e-6);
    CHECK(std::abs(v - 10.0 * std::log10(4.0)) < 1e-6);
  }
  SUBCASE("perfect and sign-flipped estimates reach the cap") {
    CHECK(std::abs(SiSdr(s, s) - SiSdrCap()) < 1e-9);
    CHECK(std::abs(SiSdr(Eigen::VectorXd(-2.0 * s), s) - SiSdrCap()) < 1e-9);
    CHECK(std::abs(SiSdrCap() - 10.0 * std::log10((1 + 1e-8) / 1e-8)) < 1e-12);
  }
  SUBCASE("zero estimate scores minus the cap; zero reference is invalid") {
    CHECK(SiSdr(Eigen::VectorXd::Zero(4), s) == doctest::Approx(-SiSdrCap()));
    CHECK_THROWS_AS(SiSdr(s, Eigen::VectorXd::Zero(4)), InvalidInput);
    CHECK_THROWS_AS(SiSdr(s, Eigen::VectorXd::Ones(3)), InvalidInput);
  }
  SUBCASE("random signals against the oracle; scale invariance") {
    for (int rep = 0; rep < 100; ++rep) {
      const Eigen::VectorXd ref = RandomMatrix(50, 1, rng);
      const Eigen::VectorXd est = ref + RandomMatrix(50, 1, rng, 0.7);
      const double v = SiSdr(est, ref);
      CHECK(std::abs(v - OracleSiSdr(est, ref)) < 1e-6);
      CHECK(std::abs(SiSdr(Eigen::VectorXd(3.7 * est), ref) - v) < 1e-9);
      CHECK(std::abs(SiSdr(est, Eigen::VectorXd(0.2 * ref)) - v) < 1e-9);
    }
  }
  SUBCASE("improvement over the mixture") {
    AudioWaveform target{s, 1000}, mix{Eigen::VectorXd(s + n), 1000};
    CHECK(std::abs(SiSdrImprovement(mix, target, target) -
                   (SiSdrCap() - 10.0 * std::log10(4.0))) < 1e-6);
    CHECK(SiSdrImprovement(mix, mix, target) == 0.0);
  }
  SUBCASE("tape gradient matches finite differences") {
    const Eigen::VectorXd ref = RandomMatrix(20, 1, rng);
    ParameterSet params;
    auto &est = params.Add("est", RandomMatrix(1, 20, rng));
    auto loss = [&](ad::Tape &tape) { return SiSdr(tape.Param(est), ref); };
    params.ZeroGrad();
    {
      ad::Tape tape;
      tape.Backward(loss(tape));
    }
    const Eigen::VectorXd numeric = FiniteDifferenceGrad(params, [&] {
      ad::Tape tape(false);
      return loss(tape).value()(0, 0);
    });
    CHECK(RelativeError(params.FlatGrads(), numeric) < 1e-6);
  }
}

TEST_CASE("strategy losses") {
  Fixture f;
  MtseModel model(f.config, 13);
  REQUIRE(model.params().TotalSize() <= 5000);

  SUBCASE("ST is minus the mean SI-SDR") {
    const auto r = LossSt(model, f.batch, false);
    double mean = 0;
    for (const auto &ex : f.examples) {
      const auto est = model.Infer(ex.mixture, {&ex.enrolment, &ex.video});
      mean += -OracleSiSdr(est.estimate.samples, ex.target.samples) / f.examples.size();
    }
    CHECK(std::abs(r.total - mean) < 1e-9);
    CHECK(r.per_item.size() == f.examples.size());
  }
  SUBCASE("MTT averages three equally weighted branches") {
    const auto r = LossMtt(model, f.batch, false);
    CHECK(std::abs(r.total - (r.l_av + r.l_a + r.l_v) / 3.0) < 1e-12);
    CHECK(r.estimates.size() == 3 * f.examples.size());
    CHECK(std::abs(r.l_av - LossSt(model, f.batch, false).total) < 1e-12);
    // Audio-only branch sees an all-zero video stream.
    const auto &ex = f.examples[0];
    const auto zeroed = ex.video.Zeroed();
    const auto est = model.Infer(ex.mixture, {&ex.enrolment, &zeroed});
    CHECK(est.estimate.samples == r.estimates[1]);
  }
  SUBCASE("MDT with both modalities equals ST") {
    const std::vector<ModalityMask> both(f.examples.size(), kBothModalities);
    CHECK(LossMdtFixed(model, f.batch, both, false).total ==
          doctest::Approx(LossSt(model, f.batch, false).total).epsilon(1e-12));
  }
  SUBCASE("MDT drops modalities at the embedding level") {
    const std::vector<ModalityMask> masks = {kAudioOnly, kVideoOnly, kBothModalities};
    const auto r = LossMdtFixed(model, f.batch, masks, false);
    const auto &ex = f.examples[1];
    const auto est = model.Infer(ex.mixture, {nullptr, &ex.video, true, false});
    CHECK(est.estimate.samples == r.estimates[1]);
    CHECK_THROWS_AS(LossMdtFixed(model, f.batch, {kBothModalities}, false), InvalidInput);
  }
  SUBCASE("gradients match finite differences") {
    const std::vector<ModalityMask> masks = {kAudioOnly, kVideoOnly, kBothModalities};
    CHECK(LossGradientError(model, [&](bool bw) { return LossSt(model, f.batch, bw).total; }) <
          1e-4);
    CHECK(LossGradientError(model, [&](bool bw) { return LossMtt(model, f.batch, bw).total; }) <
          1e-4);
    CHECK(LossGradientError(model, [&](bool bw) {
            return LossMdtFixed(model, f.batch, masks, bw).total;
          }) < 1e-4);
  }
  CHECK(ParseStrategy("mdt") == Strategy::kMDT);
  CHECK(ToString(Strategy::kMTT) == "MTT");
  CHECK_THROWS_AS(ParseStrategy("xyz"), ConfigError);
}

TEST_CASE("modality mask sampler") {
  Rng rng = MakeRng(101);
  int both = 0, audio = 0, video = 0;
  const int draws = 30000;
  for (int k = 0; k < draws; ++k) {
    const ModalityMask m = SampleModalityMask(rng);
    REQUIRE((m.use_audio || m.use_video));
    if (m == kBothModalities) ++both;
    if (m == kAudioOnly) ++audio;
    if (m == kVideoOnly) ++video;
  }
  CHECK(both + audio + video == draws);
  for (int c : {both, audio, video}) CHECK(std::abs(c / double(draws) - 1.0 / 3.0) < 0.01);
}

TEST_CASE("gradient clipping and Adam") {
  Rng rng = MakeRng(5);
  ParameterSet params;
  auto &a = params.Add("a", RandomMatrix(3, 2, rng));
  auto &b = params.Add("b", RandomMatrix(4, 1, rng));
  SUBCASE("clipping rescales to the threshold and reports the raw norm") {
    a.grad = RandomMatrix(3, 2, rng, 10.0);
    b.grad = RandomMatrix(4, 1, rng, 10.0);
    const double raw = std::sqrt(a.grad.squaredNorm() + b.grad.squaredNorm());
    const Eigen::VectorXd before = params.FlatGrads();
    CHECK(ClipGradNorm(params, 1.0) == doctest::Approx(raw).epsilon(1e-14));
    CHECK(params.FlatGrads().norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(RelativeError(params.FlatGrads() * raw, before) < 1e-12);
    const Eigen::VectorXd small = params.FlatGrads();
    ClipGradNorm(params, 5.0);
    CHECK(params.FlatGrads() == small);
  }
  SUBCASE("first Adam step moves each weight by lr against its gradient") {
    params.ZeroGrad();
    a.grad = RandomMatrix(3, 2, rng);
    b.grad = RandomMatrix(4, 1, rng);
    const Eigen::VectorXd theta = params.FlatValues(), g = params.FlatGrads();
    Adam adam(params, 0.01, 0.0, 0.9, 0.999, 0.0);
    adam.Step();
    const Eigen::VectorXd delta = params.FlatValues() - theta;
    for (Eigen::Index k = 0; k < g.size(); ++k)
      CHECK(delta(k) == doctest::Approx(-0.01 * (g(k) > 0 ? 1 : -1)).epsilon(1e-9));
    CHECK(adam.state().step == 1);
  }
  SUBCASE("weight decay is added to the gradient") {
    params.ZeroGrad();
    const Eigen::VectorXd theta = params.FlatValues();
    Adam adam(params, 0.01, 0.5, 0.9, 0.999, 0.0);
    adam.Step();
    const Eigen::VectorXd delta = params.FlatValues() - theta;
    for (Eigen::Index k = 0; k < theta.size(); ++k)
      CHECK(delta(k) == doctest::Approx(-0.01 * (theta(k) > 0 ? 1 : -1)).epsilon(1e-9));
  }
  SUBCASE("plateau halves the rate after patience + 1 stale epochs") {
    Adam adam(params, 1.0);
    PlateauScheduler sched(0.5, 2);
    CHECK_FALSE(sched.Step(1.0, adam));
    CHECK_FALSE(sched.Step(1.0, adam));
    CHECK_FALSE(sched.Step(1.0, adam));
    CHECK(sched.Step(1.0, adam));
    CHECK(adam.lr() == 0.5);
    CHECK_FALSE(sched.Step(0.9, adam));
    CHECK(sched.bad_epochs() == 0);
  }
}

TEST_CASE("checkpoint round trip") {
  MtseModel model(TinyModelConfig(), 17);
  Checkpoint ckpt;
  ckpt.meta = {{"model", model.config()}, {"init_seed", 99}, {"strategy", "MDT"}};
  PutParameters(ckpt, model.params(), "param/");
  const std::string bytes = EncodeCheckpoint(ckpt);
  const Checkpoint back = DecodeCheckpoint(bytes);
  CHECK(back.meta == ckpt.meta);
  REQUIRE(back.tensors.size() == ckpt.tensors.size());
  for (std::size_t k = 0; k < ckpt.tensors.size(); ++k) {
    CHECK(back.tensors[k].first == ckpt.tensors[k].first);
    CHECK(back.tensors[k].second == ckpt.tensors[k].second);
  }
  const auto rebuilt = ModelFromCheckpoint(back);
  CHECK(rebuilt->params().FlatValues() == model.params().FlatValues());
  CHECK_THROWS_AS(DecodeCheckpoint(bytes.substr(0, bytes.size() - 5)), ParseError);
  CHECK_THROWS_AS(DecodeCheckpoint("NOTACKPT" + bytes.substr(8)), ParseError);
  CHECK_THROWS_AS(DecodeCheckpoint(""), ParseError);
}

TEST_CASE("training loop") {
  const data::Corpus corpus = data::BuildCorpus(TinyCorpusSpec());
  SUBCASE("batch policy") {
    TrainConfig t;
    CHECK(t.EffectiveBatchSize() == 20);
    t.strategy = Strategy::kMTT;
    CHECK(t.EffectiveBatchSize() == 7);
    t.batch_size = 3;
    CHECK(t.EffectiveBatchSize() == 3);
    t.lr = -1;
    CHECK_THROWS_AS(t.Validate(), ConfigError);
  }
  SUBCASE("deterministic for a fixed seed") {
    for (Strategy strategy : {Strategy::kST, Strategy::kMTT, Strategy::kMDT}) {
      CAPTURE(ToString(strategy));
      MtseModel m1(TinyTrainModel(), 4), m2(TinyTrainModel(), 4);
      const auto r1 = Train(m1, TinyTrainConfig(strategy), corpus);
      const auto r2 = Train(m2, TinyTrainConfig(strategy), corpus);
      REQUIRE(r1.history.size() == 3);
      for (std::size_t k = 0; k < r1.history.size(); ++k) {
        CHECK(r1.history[k].train_loss == r2.history[k].train_loss);
        CHECK(r1.history[k].val_loss == r2.history[k].val_loss);
      }
      CHECK(m1.params().FlatValues() == m2.params().FlatValues());
      // Best weights are restored on exit.
      CHECK(ValidationLoss(m1, TinyTrainConfig(strategy), corpus.val) ==
            doctest::Approx(r1.best_val_loss).epsilon(1e-12));
    }
  }
  SUBCASE("validation loss is repeatable") {
    MtseModel m(TinyTrainModel(), 4);
    const auto cfg = TinyTrainConfig(Strategy::kMDT);
    CHECK(ValidationLoss(m, cfg, corpus.val) == ValidationLoss(m, cfg, corpus.val));
  }
  SUBCASE("resuming reproduces an uninterrupted run") {
    TempDir full("train_full"), part("train_part");
    TrainConfig cfg = TinyTrainConfig(Strategy::kMDT);
    cfg.max_epochs = 4;
    MtseModel m1(TinyTrainModel(), 4);
    const auto r1 = Train(m1, cfg, corpus, {full.path, false, 4, {}});
    TrainConfig first = cfg;
    first.max_epochs = 2;
    MtseModel m2(TinyTrainModel(), 4);
    Train(m2, first, corpus, {part.path, false, 4, {}});
    MtseModel m3(TinyTrainModel(), 4);
    const auto r3 = Train(m3, cfg, corpus, {part.path, true, 4, {}});
    REQUIRE(r3.history.size() == 4);
    for (int k = 0; k < 4; ++k) CHECK(r3.history[k].val_loss == r1.history[k].val_loss);
    CHECK(m3.params().FlatValues() == m1.params().FlatValues());
    CHECK(std::filesystem::exists(full.path / kCheckpointFile));
    CHECK(std::filesystem::exists(full.path / kHistoryFile));
    const auto ckpt = LoadCheckpoint(full.path / kCheckpointFile);
    CHECK(ckpt.meta.at("strategy") == "MDT");
    CHECK(ModelFromCheckpoint(ckpt)->params().FlatValues() == m1.params().FlatValues());
  }
  SUBCASE("early stopping") {
    TrainConfig cfg = TinyTrainConfig(Strategy::kST);
    cfg.lr = 1e-300;  // updates vanish below rounding
    cfg.max_epochs = 20;
    cfg.early_stop_patience = 2;
    MtseModel m(TinyTrainModel(), 4);
    const auto r = Train(m, cfg, corpus);
    CHECK(r.history.size() < 20);
    CHECK(r.stop_reason == "early_stop");
    CHECK(static_cast<int>(r.history.size()) - r.best_epoch == 2);
  }
}
