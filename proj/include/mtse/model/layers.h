// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Fused differentiable layers with hand-written backward passes.

#ifndef MTSE_MODEL_LAYERS_H_
#define MTSE_MODEL_LAYERS_H_

#include "mtse/core/ad.h"
#include "mtse/model/config.h"

namespace mtse {

// Normalizes x (channels x frames). Columns are the time axis for cLN.
// gamma and beta are per-channel (channels x 1).
ad::Var Normalize(const ad::Var &x, NormKind kind, const ad::Var &gamma,
                  const ad::Var &beta, double epsilon);

// Single-direction LSTM over `steps` x `batch` columns laid out step-major
// (column = step * batch + b). Gate order in the stacked weights: input,
// forget, cell, output. reverse = true runs the recurrence from the last
// step to the first. Returns hidden states (hidden x steps*batch).
ad::Var Lstm(const ad::Var &x, const ad::Var &w_ih, const ad::Var &w_hh,
             const ad::Var &bias, int steps, int batch, bool reverse);

// Slices a 1 x T signal into kernel x T_M overlapping frames with the given
// stride (no padding). Requires T >= kernel.
ad::Var FrameSignal(const ad::Var &wave, int kernel, int stride);

// Transposed-convolution synthesis: overlap-adds kernel x T_M frames with
// the given stride, then trims or zero-pads to out_length samples.
ad::Var OverlapAddFrames(const ad::Var &frames, int stride,
                         Eigen::Index out_length);

// Linear interpolation along columns from T_in to T_out frames with
// aligned end points.
ad::Var InterpolateTime(const ad::Var &x, Eigen::Index out_frames);

int EncodedFrames(Eigen::Index samples, int kernel, int stride);
Eigen::Index DecodedLength(Eigen::Index frames, int kernel, int stride);

// Overlapping chunk segmentation used by the dual-path recurrences.
struct ChunkGeometry {
  int frames = 0;    // T before padding
  int chunk = 0;     // K
  int hop = 0;       // K / 2
  int n_chunks = 0;  // S
  int padded = 0;    // (S - 1) * hop + K

  static ChunkGeometry For(int frames, int chunk);
};

// N x T -> N x (S*K), chunk-major (column s*K + k holds frame s*hop + k),
// zero-padded past T.
ad::Var SegmentChunks(const ad::Var &x, const ChunkGeometry &geom);
// Inverse of SegmentChunks: overlap-add, divide by the number of chunks
// covering each frame, drop padding.
ad::Var MergeChunks(const ad::Var &z, const ChunkGeometry &geom);

}  // namespace mtse

#endif  // MTSE_MODEL_LAYERS_H_
