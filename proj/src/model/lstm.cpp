// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <memory>

#include "mtse/core/errors.h"
#include "mtse/model/layers.h"

namespace mtse {

namespace {

template <typename Block>
inline void SigmoidInPlace(Block m) {
  m = (1.0 + (-m.array()).exp()).inverse().matrix();
}

template <typename Block>
inline void TanhInPlace(Block m) {
  // tanh(x) = 2 sigmoid(2x) - 1; vectorizes through exp().
  m = (2.0 * (1.0 + (-2.0 * m.array()).exp()).inverse() - 1.0).matrix();
}

struct LstmCache {
  ad::Matrix gates;   // activated i, f, g, o; 4H x cols
  ad::Matrix cell;    // c_t; H x cols
  ad::Matrix tcell;   // tanh(c_t)
  ad::Matrix hidden;  // h_t
};

}  // namespace

ad::Var Lstm(const ad::Var &x, const ad::Var &w_ih, const ad::Var &w_hh,
             const ad::Var &bias, int steps, int batch, bool reverse) {
  const Eigen::Index hsz = w_hh.cols();
  const Eigen::Index cols = static_cast<Eigen::Index>(steps) * batch;
  MTSE_REQUIRE(x.cols() == cols, InvalidInput, "Lstm: column count");
  MTSE_REQUIRE(w_ih.rows() == 4 * hsz && w_ih.cols() == x.rows() &&
                   w_hh.rows() == 4 * hsz && bias.rows() == 4 * hsz &&
                   bias.cols() == 1,
               InvalidInput, "Lstm: weight shapes");

  auto cache = std::make_shared<LstmCache>();
  ad::Matrix &gates = cache->gates;
  gates.noalias() = w_ih.value() * x.value();
  gates.colwise() += bias.value().col(0);
  cache->cell.resize(hsz, cols);
  cache->tcell.resize(hsz, cols);
  cache->hidden.resize(hsz, cols);

  const ad::Matrix &whh = w_hh.value();
  for (int n = 0; n < steps; ++n) {
    const int s = reverse ? steps - 1 - n : n;
    const Eigen::Index c0 = static_cast<Eigen::Index>(s) * batch;
    auto g = gates.middleCols(c0, batch);
    if (n > 0) {
      const int prev = reverse ? s + 1 : s - 1;
      g.noalias() +=
          whh * cache->hidden.middleCols(static_cast<Eigen::Index>(prev) * batch,
                                         batch);
    }
    SigmoidInPlace(g.topRows(2 * hsz));
    TanhInPlace(g.middleRows(2 * hsz, hsz));
    SigmoidInPlace(g.bottomRows(hsz));
    auto c = cache->cell.middleCols(c0, batch);
    c = g.topRows(hsz).cwiseProduct(g.middleRows(2 * hsz, hsz));
    if (n > 0) {
      const int prev = reverse ? s + 1 : s - 1;
      c += g.middleRows(hsz, hsz).cwiseProduct(cache->cell.middleCols(
          static_cast<Eigen::Index>(prev) * batch, batch));
    }
    auto tc = cache->tcell.middleCols(c0, batch);
    tc = (2.0 * (1.0 + (-2.0 * c.array()).exp()).inverse() - 1.0).matrix();
    cache->hidden.middleCols(c0, batch) =
        g.bottomRows(hsz).cwiseProduct(tc);
  }

  ad::Tape *t = x.tape();
  ad::Matrix out = cache->hidden;
  return t->Emit(
      std::move(out), {x, w_ih, w_hh, bias},
      [t, x, w_ih, w_hh, bias, cache, steps, batch, reverse,
       hsz](const ad::Matrix &dh_all) {
        const Eigen::Index cols = dh_all.cols();
        ad::Matrix dgates(4 * hsz, cols);
        ad::Matrix hprev = ad::Matrix::Zero(hsz, cols);
        ad::Matrix dh_next = ad::Matrix::Zero(hsz, batch);
        ad::Matrix dc_next = ad::Matrix::Zero(hsz, batch);
        const ad::Matrix &whh = w_hh.value();
        for (int n = steps - 1; n >= 0; --n) {
          const int s = reverse ? steps - 1 - n : n;
          const Eigen::Index c0 = static_cast<Eigen::Index>(s) * batch;
          const int prev = reverse ? s + 1 : s - 1;
          const auto g = cache->gates.middleCols(c0, batch);
          const auto i = g.topRows(hsz).array();
          const auto f = g.middleRows(hsz, hsz).array();
          const auto gg = g.middleRows(2 * hsz, hsz).array();
          const auto o = g.bottomRows(hsz).array();
          const auto tc = cache->tcell.middleCols(c0, batch).array();

          const ad::Matrix dh = dh_all.middleCols(c0, batch) + dh_next;
          const ad::Matrix dc =
              (dh.array() * o * (1.0 - tc.square())).matrix() + dc_next;
          auto dg = dgates.middleCols(c0, batch);
          dg.topRows(hsz) = (dc.array() * gg * i * (1.0 - i)).matrix();
          if (n > 0) {
            const auto cprev =
                cache->cell.middleCols(static_cast<Eigen::Index>(prev) * batch,
                                       batch)
                    .array();
            dg.middleRows(hsz, hsz) =
                (dc.array() * cprev * f * (1.0 - f)).matrix();
            hprev.middleCols(c0, batch) = cache->hidden.middleCols(
                static_cast<Eigen::Index>(prev) * batch, batch);
          } else {
            dg.middleRows(hsz, hsz).setZero();
          }
          dg.middleRows(2 * hsz, hsz) =
              (dc.array() * i * (1.0 - gg.square())).matrix();
          dg.bottomRows(hsz) = (dh.array() * tc * o * (1.0 - o)).matrix();
          dc_next = (dc.array() * f).matrix();
          dh_next.noalias() = whh.transpose() * dg;
        }
        if (t->NeedsGrad(w_ih))
          t->Accumulate(w_ih, dgates * x.value().transpose());
        if (t->NeedsGrad(w_hh)) t->Accumulate(w_hh, dgates * hprev.transpose());
        if (t->NeedsGrad(bias)) t->Accumulate(bias, dgates.rowwise().sum());
        if (t->NeedsGrad(x)) t->Accumulate(x, w_ih.value().transpose() * dgates);
      });
}

}  // namespace mtse
