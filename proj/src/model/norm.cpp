// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <memory>

#include "mtse/core/errors.h"
#include "mtse/model/layers.h"

namespace mtse {

namespace {

struct NormCache {
  ad::Matrix y;             // normalized, before affine
  Eigen::RowVectorXd inv;   // 1 / sqrt(var + eps), per column
  Eigen::RowVectorXd mean;  // per column (cLN only)
};

}  // namespace

ad::Var Normalize(const ad::Var &x, NormKind kind, const ad::Var &gamma,
                  const ad::Var &beta, double epsilon) {
  MTSE_REQUIRE(epsilon > 0, InvalidInput, "normalization epsilon must be > 0");
  const ad::Matrix &v = x.value();
  const Eigen::Index n = v.rows(), c = v.cols();
  MTSE_REQUIRE(gamma.rows() == n && gamma.cols() == 1 && beta.rows() == n &&
                   beta.cols() == 1,
               InvalidInput, "normalization affine shape mismatch");

  auto cache = std::make_shared<NormCache>();
  cache->y.resize(n, c);
  cache->inv.resize(c);
  switch (kind) {
    case NormKind::kGlobal: {
      const double mean = v.mean();
      const double var = std::max((v.array() - mean).square().mean(), 0.0);
      const double inv = 1.0 / std::sqrt(var + epsilon);
      cache->y = (v.array() - mean) * inv;
      cache->inv.setConstant(inv);
      break;
    }
    case NormKind::kFrame: {
      for (Eigen::Index j = 0; j < c; ++j) {
        const double mean = v.col(j).mean();
        const double var =
            std::max((v.col(j).array() - mean).square().mean(), 0.0);
        const double inv = 1.0 / std::sqrt(var + epsilon);
        cache->y.col(j) = (v.col(j).array() - mean) * inv;
        cache->inv(j) = inv;
      }
      break;
    }
    case NormKind::kCumulative: {
      cache->mean.resize(c);
      double s1 = 0, s2 = 0;
      for (Eigen::Index j = 0; j < c; ++j) {
        s1 += v.col(j).sum();
        s2 += v.col(j).squaredNorm();
        const double count = static_cast<double>(n * (j + 1));
        const double mean = s1 / count;
        double var = std::max(s2 / count - mean * mean, 0.0);
        if (j == 0)  // exact two-pass statistics on the first frame
          var = std::max((v.col(0).array() - mean).square().mean(), 0.0);
        const double inv = 1.0 / std::sqrt(var + epsilon);
        cache->y.col(j) = (v.col(j).array() - mean) * inv;
        cache->inv(j) = inv;
        cache->mean(j) = mean;
      }
      break;
    }
  }

  ad::Matrix out = (cache->y.array().colwise() * gamma.value().col(0).array())
                       .colwise() +
                   beta.value().col(0).array();
  ad::Tape *t = x.tape();
  return t->Emit(
      std::move(out), {x, gamma, beta},
      [t, x, gamma, beta, kind, cache](const ad::Matrix &g) {
        const ad::Matrix &y = cache->y;
        const Eigen::Index n = y.rows(), c = y.cols();
        if (t->NeedsGrad(gamma))
          t->Accumulate(gamma, g.cwiseProduct(y).rowwise().sum());
        if (t->NeedsGrad(beta)) t->Accumulate(beta, g.rowwise().sum());
        if (!t->NeedsGrad(x)) return;
        const ad::Matrix dy = g.array().colwise() * gamma.value().col(0).array();
        ad::Matrix dx(n, c);
        switch (kind) {
          case NormKind::kGlobal: {
            const double m1 = dy.mean();
            const double m2 = dy.cwiseProduct(y).mean();
            dx = (dy.array() - m1 - y.array() * m2) * cache->inv(0);
            break;
          }
          case NormKind::kFrame: {
            for (Eigen::Index j = 0; j < c; ++j) {
              const double m1 = dy.col(j).mean();
              const double m2 = dy.col(j).dot(y.col(j)) / n;
              dx.col(j) =
                  (dy.col(j).array() - m1 - y.col(j).array() * m2) *
                  cache->inv(j);
            }
            break;
          }
          case NormKind::kCumulative: {
            // Statistics at column j use running sums S1, S2 over columns
            // <= j, so each input receives the reverse cumulative sum of the
            // sum-gradients.
            const ad::Matrix &xv = x.value();
            double acc1 = 0, acc2 = 0;
            for (Eigen::Index j = c - 1; j >= 0; --j) {
              const double inv = cache->inv(j);
              const double mean = cache->mean(j);
              const double count = static_cast<double>(n * (j + 1));
              const double d_mean = -dy.col(j).sum() * inv;
              const double d_std = -dy.col(j).dot(y.col(j)) * inv;
              const double d_var = d_std * 0.5 * inv;
              acc1 += d_mean / count - 2.0 * mean * d_var / count;
              acc2 += d_var / count;
              dx.col(j) = dy.col(j) * inv;
              dx.col(j).array() += acc1 + 2.0 * acc2 * xv.col(j).array();
            }
            break;
          }
        }
        t->Accumulate(x, dx);
      });
}

}  // namespace mtse
