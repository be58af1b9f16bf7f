// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Test-only helpers: random tensors and a central finite-difference oracle
// that never touches the tape.

#ifndef MTSE_TESTS_TEST_UTIL_H_
#define MTSE_TESTS_TEST_UTIL_H_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>

#include "mtse/core/random.h"
#include "mtse/core/signal.h"
#include "mtse/datagen/corpus.h"
#include "mtse/model/config.h"
#include "mtse/model/parameters.h"

namespace mtse::testing {

inline Eigen::MatrixXd RandomMatrix(Eigen::Index r, Eigen::Index c, Rng &rng,
                                    double scale = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * Gaussian(rng);
  return m;
}

// Central differences of `loss` w.r.t. every entry of `params`.
inline Eigen::VectorXd FiniteDifferenceGrad(ParameterSet &params,
                                            const std::function<double()> &loss,
                                            double step = 1e-6) {
  Eigen::VectorXd theta = params.FlatValues();
  Eigen::VectorXd grad(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double keep = theta(i);
    theta(i) = keep + step;
    params.SetFlatValues(theta);
    const double up = loss();
    theta(i) = keep - step;
    params.SetFlatValues(theta);
    const double down = loss();
    theta(i) = keep;
    grad(i) = (up - down) / (2 * step);
  }
  params.SetFlatValues(theta);
  return grad;
}

inline double RelativeError(const Eigen::VectorXd &a, const Eigen::VectorXd &b) {
  const double denom = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / denom;
}

// A model small enough for exhaustive finite-difference checks.
inline ModelConfig TinyModelConfig(bool causal = false,
                                   NormKind norm = NormKind::kGlobal) {
  ModelConfig c;
  c.causal = causal;
  c.norm_kind = norm;
  c.n_channels = 4;
  c.hidden_dim = 2;
  c.chunk_size = 4;
  c.layers_per_block = 1;
  c.visual_feature_dim = 3;
  c.sample_rate = 1000;
  return c;
}

inline AudioWaveform RandomWave(Eigen::Index n, int sample_rate, Rng &rng,
                                double scale = 0.3) {
  AudioWaveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) w.samples(i) = scale * Gaussian(rng);
  return w;
}

inline VideoFeatureStream RandomVideo(Eigen::Index frames, Eigen::Index dim,
                                      Rng &rng) {
  VideoFeatureStream v;
  v.features = RandomMatrix(frames, dim, rng, 0.5);
  return v;
}

// Mixture example built from random signals; x = s + i exactly.
inline data::MixtureExample RandomExample(const ModelConfig &config,
                                          Eigen::Index samples,
                                          Eigen::Index video_frames, Rng &rng,
                                          int index = 0) {
  data::MixtureExample ex;
  ex.index = index;
  ex.target = RandomWave(samples, config.sample_rate, rng);
  ex.interferer = RandomWave(samples, config.sample_rate, rng);
  ex.mixture = ex.target;
  ex.mixture.samples += ex.interferer.samples;
  ex.enrolment = RandomWave(samples, config.sample_rate, rng);
  ex.video = RandomVideo(video_frames, config.visual_feature_dim, rng);
  return ex;
}

}  // namespace mtse::testing

#endif  // MTSE_TESTS_TEST_UTIL_H_
