// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>

#include "doctest.h"
#include "mtse/core/errors.h"
#include "mtse/model/layers.h"
#include "test_util.h"

using namespace mtse;
using mtse::testing::FiniteDifferenceGrad;
using mtse::testing::RandomMatrix;
using mtse::testing::RelativeError;

namespace {

using Builder = std::function<ad::Var(ad::Tape &, ParameterSet &)>;

double GradientError(ParameterSet &params, const Builder &build) {
  Rng rng = MakeRng(5);
  ad::Matrix probe;
  auto loss = [&](ad::Tape &tape) {
    ad::Var out = build(tape, params);
    if (probe.size() == 0) probe = RandomMatrix(out.rows(), out.cols(), rng);
    return ad::Sum(ad::Mul(out, tape.Constant(probe)));
  };
  params.ZeroGrad();
  {
    ad::Tape tape;
    tape.Backward(loss(tape));
  }
  const Eigen::VectorXd analytic = params.FlatGrads();
  const Eigen::VectorXd numeric = FiniteDifferenceGrad(params, [&] {
    ad::Tape tape(false);
    return loss(tape).value()(0, 0);
  });
  return RelativeError(analytic, numeric);
}

ad::Matrix NormValue(const ad::Matrix &x, NormKind kind) {
  ad::Tape tape(false);
  const auto n = x.rows();
  return Normalize(tape.Constant(x), kind,
                   tape.Constant(ad::Matrix::Ones(n, 1)),
                   tape.Constant(ad::Matrix::Zero(n, 1)), 1e-8)
      .value();
}

// Scalar reference LSTM written independently of the fused kernel.
ad::Matrix NaiveLstm(const ad::Matrix &x, const ad::Matrix &w_ih,
                     const ad::Matrix &w_hh, const ad::Matrix &b, int steps,
                     int batch, bool reverse) {
  const int h = static_cast<int>(w_hh.cols());
  ad::Matrix out(h, x.cols());
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (int bi = 0; bi < batch; ++bi) {
    Eigen::VectorXd hs = Eigen::VectorXd::Zero(h), cs = Eigen::VectorXd::Zero(h);
    for (int n = 0; n < steps; ++n) {
      const int s = reverse ? steps - 1 - n : n;
      const int col = s * batch + bi;
      Eigen::VectorXd g = w_ih * x.col(col) + w_hh * hs + b.col(0);
      for (int k = 0; k < h; ++k) {
        const double i = sig(g(k)), f = sig(g(h + k)),
                     gg = std::tanh(g(2 * h + k)), o = sig(g(3 * h + k));
        cs(k) = f * cs(k) + i * gg;
        hs(k) = o * std::tanh(cs(k));
      }
      out.col(col) = hs;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("encoder frame count follows the unpadded convolution formula") {
  CHECK(EncodedFrames(48000, 32, 16) == 2999);
  CHECK(EncodedFrames(4000, 16, 8) == 499);
  CHECK(DecodedLength(2999, 32, 16) == 48000);
  CHECK(EncodedFrames(15, 16, 8) == 0);
  ad::Tape tape(false);
  CHECK_THROWS_AS(FrameSignal(tape.Constant(ad::Matrix::Zero(1, 15)), 16, 8),
                  InvalidInput);
}

TEST_CASE("overlap-add trims or pads to the requested length") {
  ad::Tape tape(false);
  ad::Var frames = tape.Constant(ad::Matrix::Ones(4, 3));
  // raw length (3-1)*2+4 = 8
  ad::Var trimmed = OverlapAddFrames(frames, 2, 7);
  CHECK(trimmed.cols() == 7);
  CHECK(trimmed.value()(0, 0) == 1.0);
  CHECK(trimmed.value()(0, 2) == 2.0);
  ad::Var padded = OverlapAddFrames(frames, 2, 10);
  CHECK(padded.cols() == 10);
  CHECK(padded.value()(0, 9) == 0.0);
}

TEST_CASE("framing, interpolation and chunking gradients") {
  Rng rng = MakeRng(2);
  ParameterSet p;
  p.Add("wave", RandomMatrix(1, 37, rng));
  p.Add("feat", RandomMatrix(3, 9, rng));
  CHECK(GradientError(p, [](ad::Tape &t, ParameterSet &ps) {
          return FrameSignal(t.Param(ps.Get("wave")), 8, 3);
        }) < 1e-7);
  CHECK(GradientError(p, [](ad::Tape &t, ParameterSet &ps) {
          return OverlapAddFrames(t.Param(ps.Get("feat")), 2, 15);
        }) < 1e-7);
  CHECK(GradientError(p, [](ad::Tape &t, ParameterSet &ps) {
          return OverlapAddFrames(t.Param(ps.Get("feat")), 2, 25);
        }) < 1e-7);
  CHECK(GradientError(p, [](ad::Tape &t, ParameterSet &ps) {
          return InterpolateTime(t.Param(ps.Get("feat")), 23);
        }) < 1e-7);
  const ChunkGeometry geom = ChunkGeometry::For(9, 4);
  CHECK(GradientError(p, [&](ad::Tape &t, ParameterSet &ps) {
          ad::Var z = SegmentChunks(t.Param(ps.Get("feat")), geom);
          return MergeChunks(ad::Tanh(z), geom);
        }) < 1e-7);
}

TEST_CASE("chunk geometry") {
  ChunkGeometry g = ChunkGeometry::For(499, 100);
  CHECK(g.hop == 50);
  CHECK(g.n_chunks == 9);
  CHECK(g.padded == 500);
  ChunkGeometry small = ChunkGeometry::For(13, 25);
  CHECK(small.n_chunks == 1);
  CHECK(small.padded == 25);

  // Segment then merge is the identity on the unpadded frames.
  Rng rng = MakeRng(8);
  ad::Matrix x = RandomMatrix(3, 499, rng);
  ad::Tape tape(false);
  ad::Var merged = MergeChunks(SegmentChunks(tape.Constant(x), g), g);
  CHECK((merged.value() - x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("linear interpolation end points and constants") {
  Rng rng = MakeRng(9);
  ad::Matrix x = RandomMatrix(4, 75, rng);
  ad::Tape tape(false);
  ad::Matrix up = InterpolateTime(tape.Constant(x), 2999).value();
  CHECK(up.cols() == 2999);
  CHECK((up.col(0) - x.col(0)).norm() == 0.0);
  CHECK((up.col(2998) - x.col(74)).norm() == 0.0);

  ad::Matrix c = ad::Matrix::Constant(4, 13, 0.25);
  ad::Matrix cu = InterpolateTime(tape.Constant(c), 499).value();
  CHECK((cu.array() - 0.25).abs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(InterpolateTime(tape.Constant(c), 0), InvalidInput);
}

TEST_CASE("normalization gradients for every kind") {
  Rng rng = MakeRng(4);
  ParameterSet p;
  p.Add("x", RandomMatrix(5, 7, rng));
  p.Add("gamma", RandomMatrix(5, 1, rng));
  p.Add("beta", RandomMatrix(5, 1, rng));
  for (NormKind kind :
       {NormKind::kGlobal, NormKind::kCumulative, NormKind::kFrame}) {
    CAPTURE(ToString(kind));
    CHECK(GradientError(p, [kind](ad::Tape &t, ParameterSet &ps) {
            return Normalize(t.Param(ps.Get("x")), kind,
                             t.Param(ps.Get("gamma")),
                             t.Param(ps.Get("beta")), 1e-8);
          }) < 1e-6);
  }
}

TEST_CASE("normalization identities") {
  Rng rng = MakeRng(12);
  SUBCASE("constant input collapses to the bias") {
    ad::Matrix c = ad::Matrix::Constant(6, 10, 3.5);
    for (NormKind kind :
         {NormKind::kGlobal, NormKind::kCumulative, NormKind::kFrame})
      CHECK(NormValue(c, kind).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("cLN on the first frame equals LN") {
    for (int rep = 0; rep < 20; ++rep) {
      ad::Matrix x = RandomMatrix(8, 12, rng, 3.0);
      x.array() += Gaussian(rng);
      const ad::Matrix a = NormValue(x, NormKind::kCumulative);
      const ad::Matrix b = NormValue(x, NormKind::kFrame);
      CHECK((a.col(0) - b.col(0)).cwiseAbs().maxCoeff() < 1e-7);
    }
  }
  SUBCASE("gLN commutes with frame permutations; cLN does not") {
    ad::Matrix x = RandomMatrix(4, 9, rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(9);
    perm.setIdentity();
    std::shuffle(perm.indices().data(), perm.indices().data() + 9, rng);
    const ad::Matrix g1 = NormValue(x * perm, NormKind::kGlobal);
    const ad::Matrix g2 = NormValue(x, NormKind::kGlobal) * perm;
    CHECK((g1 - g2).cwiseAbs().maxCoeff() < 1e-7);
    const ad::Matrix c1 = NormValue(x * perm, NormKind::kCumulative);
    const ad::Matrix c2 = NormValue(x, NormKind::kCumulative) * perm;
    CHECK((c1 - c2).cwiseAbs().maxCoeff() > 1e-3);
  }
  CHECK_THROWS_AS(ParseNormKind("batchnorm"), ConfigError);
  CHECK(ParseNormKind("gln") == NormKind::kGlobal);
}

TEST_CASE("LSTM matches a scalar reference and its gradients") {
  Rng rng = MakeRng(21);
  const int d = 3, h = 4, steps = 5, batch = 2;
  ParameterSet p;
  p.Add("x", RandomMatrix(d, steps * batch, rng));
  p.Add("w_ih", RandomMatrix(4 * h, d, rng, 0.5));
  p.Add("w_hh", RandomMatrix(4 * h, h, rng, 0.5));
  p.Add("b", RandomMatrix(4 * h, 1, rng, 0.5));
  for (bool reverse : {false, true}) {
    CAPTURE(reverse);
    ad::Tape tape(false);
    ad::Matrix fused =
        Lstm(tape.Param(p.Get("x")), tape.Param(p.Get("w_ih")),
             tape.Param(p.Get("w_hh")), tape.Param(p.Get("b")), steps, batch,
             reverse)
            .value();
    ad::Matrix ref = NaiveLstm(p.Get("x").value, p.Get("w_ih").value,
                               p.Get("w_hh").value, p.Get("b").value, steps,
                               batch, reverse);
    CHECK((fused - ref).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(GradientError(p, [=](ad::Tape &t, ParameterSet &ps) {
            return Lstm(t.Param(ps.Get("x")), t.Param(ps.Get("w_ih")),
                        t.Param(ps.Get("w_hh")), t.Param(ps.Get("b")), steps,
                        batch, reverse);
          }) < 1e-7);
  }
}
