// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mtse/training/si_sdr.h"

#include <cmath>
#include <numbers>

#include "mtse/core/errors.h"

namespace mtse {

namespace {

constexpr double kDbPerNeper = 10.0 / std::numbers::ln10;

struct Terms {
  double p = 0, q = 0;  // relative energies
  double c = 0, s2 = 0, e2 = 0;
};

Terms Compute(const Eigen::VectorXd &est, const Eigen::VectorXd &ref) {
  MTSE_REQUIRE(est.size() == ref.size(), InvalidInput,
               "si_sdr: estimate and reference lengths differ");
  Terms t;
  t.s2 = ref.squaredNorm();
  MTSE_REQUIRE(t.s2 > 0, InvalidInput, "si_sdr: all-zero reference");
  t.e2 = est.squaredNorm();
  if (t.e2 == 0) return t;
  t.c = est.dot(ref);
  const double alpha = t.c / t.s2;
  t.p = alpha * alpha * t.s2 / t.e2;
  t.q = (est - alpha * ref).squaredNorm() / t.e2;
  return t;
}

}  // namespace

double SiSdrCap(double eps) { return kDbPerNeper * std::log((1 + eps) / eps); }

double SiSdr(const Eigen::VectorXd &estimate, const Eigen::VectorXd &reference,
             double eps) {
  const Terms t = Compute(estimate, reference);
  if (t.e2 == 0) return -SiSdrCap(eps);
  return kDbPerNeper * (std::log(t.p + eps) - std::log(t.q + eps));
}

double SiSdr(const AudioWaveform &estimate, const AudioWaveform &reference,
             double eps) {
  return SiSdr(estimate.samples, reference.samples, eps);
}

ad::Var SiSdr(const ad::Var &estimate, const Eigen::VectorXd &reference,
              double eps) {
  MTSE_REQUIRE(estimate.rows() == 1, InvalidInput, "si_sdr: expects a 1 x T row");
  const Eigen::VectorXd est = estimate.value().row(0).transpose();
  const Terms t = Compute(est, reference);
  ad::Matrix out(1, 1);
  out(0, 0) = t.e2 == 0 ? -SiSdrCap(eps)
                        : kDbPerNeper * (std::log(t.p + eps) - std::log(t.q + eps));
  ad::Tape *tape = estimate.tape();
  return tape->Emit(std::move(out), {estimate},
                    [tape, estimate, reference, t, eps](const ad::Matrix &g) {
                      if (t.e2 == 0) return;
                      // q = 1 - p analytically, so d/de only needs dp/de.
                      const Eigen::RowVectorXd e = estimate.value().row(0);
                      const double k = kDbPerNeper *
                                       (1 / (t.p + eps) + 1 / (t.q + eps));
                      const double scale = 2 * t.c / (t.s2 * t.e2);
                      ad::Matrix d = (scale * k * g(0, 0)) *
                                     (reference.transpose() - (t.c / t.e2) * e);
                      tape->Accumulate(estimate, d);
                    });
}

double SiSdrImprovement(const AudioWaveform &mixture,
                        const AudioWaveform &estimate,
                        const AudioWaveform &reference, double eps) {
  return SiSdr(estimate, reference, eps) - SiSdr(mixture, reference, eps);
}

}  // namespace mtse
