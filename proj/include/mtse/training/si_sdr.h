// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Scale-invariant signal-to-distortion ratio. With alpha = <e, s> / |s|^2,
// P = |alpha s|^2 and Q = |alpha s - e|^2, both energies are taken relative
// to |e|^2 before flooring:
//
//   SI-SDR = 10 log10((P / |e|^2 + eps) / (Q / |e|^2 + eps))
//
// which stays exactly invariant to rescaling either signal and is bounded
// by +-10 log10((1 + eps) / eps) (about 80 dB for eps = 1e-8).

#ifndef MTSE_TRAINING_SI_SDR_H_
#define MTSE_TRAINING_SI_SDR_H_

#include "mtse/core/ad.h"
#include "mtse/core/signal.h"

namespace mtse {

inline constexpr double kSiSdrEps = 1e-8;

double SiSdrCap(double eps = kSiSdrEps);

// Throws InvalidInput on length mismatch or an all-zero reference. An
// all-zero estimate scores -cap.
double SiSdr(const Eigen::VectorXd &estimate, const Eigen::VectorXd &reference,
             double eps = kSiSdrEps);
double SiSdr(const AudioWaveform &estimate, const AudioWaveform &reference,
             double eps = kSiSdrEps);

// estimate: 1 x T node. Returns a 1 x 1 node.
ad::Var SiSdr(const ad::Var &estimate, const Eigen::VectorXd &reference,
              double eps = kSiSdrEps);

// SI-SDR(estimate) - SI-SDR(mixture).
double SiSdrImprovement(const AudioWaveform &mixture,
                        const AudioWaveform &estimate,
                        const AudioWaveform &reference,
                        double eps = kSiSdrEps);

}  // namespace mtse

#endif  // MTSE_TRAINING_SI_SDR_H_
