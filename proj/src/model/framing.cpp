// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>

#include "mtse/core/errors.h"
#include "mtse/model/layers.h"

namespace mtse {

int EncodedFrames(Eigen::Index samples, int kernel, int stride) {
  if (samples < kernel) return 0;
  return static_cast<int>((samples - kernel) / stride + 1);
}

Eigen::Index DecodedLength(Eigen::Index frames, int kernel, int stride) {
  return (frames - 1) * stride + kernel;
}

ad::Var FrameSignal(const ad::Var &wave, int kernel, int stride) {
  MTSE_REQUIRE(wave.rows() == 1, InvalidInput, "FrameSignal: expects 1 x T");
  const Eigen::Index len = wave.cols();
  MTSE_REQUIRE(len >= kernel, InvalidInput,
               "input of " + std::to_string(len) +
                   " samples is shorter than the encoder kernel (" +
                   std::to_string(kernel) + ")");
  const int frames = EncodedFrames(len, kernel, stride);
  const auto &w = wave.value();
  ad::Matrix out(kernel, frames);
  for (int t = 0; t < frames; ++t)
    out.col(t) = w.row(0).segment(static_cast<Eigen::Index>(t) * stride, kernel)
                     .transpose();
  ad::Tape *tp = wave.tape();
  return tp->Emit(std::move(out), {wave},
                  [tp, wave, kernel, stride, frames, len](const ad::Matrix &g) {
                    ad::Matrix back = ad::Matrix::Zero(1, len);
                    for (int t = 0; t < frames; ++t)
                      back.row(0).segment(static_cast<Eigen::Index>(t) * stride,
                                          kernel) += g.col(t).transpose();
                    tp->Accumulate(wave, back);
                  });
}

ad::Var OverlapAddFrames(const ad::Var &frames, int stride,
                         Eigen::Index out_length) {
  const Eigen::Index kernel = frames.rows(), n = frames.cols();
  MTSE_REQUIRE(n >= 1 && out_length >= 1, InvalidInput,
               "OverlapAddFrames: empty input");
  const Eigen::Index raw = DecodedLength(n, static_cast<int>(kernel), stride);
  ad::Matrix full = ad::Matrix::Zero(1, std::max(raw, out_length));
  const auto &f = frames.value();
  for (Eigen::Index t = 0; t < n; ++t)
    full.row(0).segment(t * stride, kernel) += f.col(t).transpose();
  ad::Matrix out = full.leftCols(out_length);
  ad::Tape *tp = frames.tape();
  return tp->Emit(std::move(out), {frames},
                  [tp, frames, stride, kernel, n, raw](const ad::Matrix &g) {
                    ad::Matrix padded = ad::Matrix::Zero(1, raw);
                    const Eigen::Index keep = std::min(raw, g.cols());
                    padded.leftCols(keep) = g.leftCols(keep);
                    ad::Matrix back(kernel, n);
                    for (Eigen::Index t = 0; t < n; ++t)
                      back.col(t) =
                          padded.row(0).segment(t * stride, kernel).transpose();
                    tp->Accumulate(frames, back);
                  });
}

ad::Var InterpolateTime(const ad::Var &x, Eigen::Index out_frames) {
  MTSE_REQUIRE(out_frames >= 1, InvalidInput,
               "interpolation target must have at least one frame");
  const Eigen::Index in_frames = x.cols();
  MTSE_REQUIRE(in_frames >= 1, InvalidInput, "interpolation of empty input");
  // Source position of each output frame: lower index and fraction.
  std::vector<Eigen::Index> lo(out_frames);
  std::vector<double> frac(out_frames);
  for (Eigen::Index j = 0; j < out_frames; ++j) {
    if (in_frames == 1 || out_frames == 1) {
      lo[j] = 0;
      frac[j] = 0;
      continue;
    }
    const double pos = static_cast<double>(j) * (in_frames - 1) /
                       static_cast<double>(out_frames - 1);
    Eigen::Index i0 = static_cast<Eigen::Index>(std::floor(pos));
    if (i0 >= in_frames - 1) i0 = in_frames - 1;
    lo[j] = i0;
    frac[j] = pos - static_cast<double>(i0);
  }
  const auto &v = x.value();
  ad::Matrix out(v.rows(), out_frames);
  for (Eigen::Index j = 0; j < out_frames; ++j) {
    if (frac[j] == 0.0)
      out.col(j) = v.col(lo[j]);
    else
      out.col(j) = (1.0 - frac[j]) * v.col(lo[j]) + frac[j] * v.col(lo[j] + 1);
  }
  ad::Tape *tp = x.tape();
  return tp->Emit(std::move(out), {x},
                  [tp, x, lo, frac, in_frames](const ad::Matrix &g) {
                    ad::Matrix back = ad::Matrix::Zero(g.rows(), in_frames);
                    for (Eigen::Index j = 0; j < g.cols(); ++j) {
                      back.col(lo[j]) += (1.0 - frac[j]) * g.col(j);
                      if (frac[j] != 0.0) back.col(lo[j] + 1) += frac[j] * g.col(j);
                    }
                    tp->Accumulate(x, back);
                  });
}

ChunkGeometry ChunkGeometry::For(int frames, int chunk) {
  MTSE_REQUIRE(frames >= 1 && chunk >= 1, InvalidInput,
               "chunking needs positive frame count and chunk size");
  ChunkGeometry g;
  g.frames = frames;
  g.chunk = chunk;
  g.hop = std::max(1, chunk / 2);
  if (frames <= chunk)
    g.n_chunks = 1;
  else
    g.n_chunks = (frames - chunk + g.hop - 1) / g.hop + 1;
  g.padded = (g.n_chunks - 1) * g.hop + chunk;
  return g;
}

ad::Var SegmentChunks(const ad::Var &x, const ChunkGeometry &geom) {
  MTSE_REQUIRE(x.cols() == geom.frames, InvalidInput,
               "SegmentChunks: frame count mismatch");
  const auto &v = x.value();
  const Eigen::Index n = v.rows();
  ad::Matrix out = ad::Matrix::Zero(n, static_cast<Eigen::Index>(geom.n_chunks) *
                                           geom.chunk);
  for (int s = 0; s < geom.n_chunks; ++s) {
    const int start = s * geom.hop;
    const int count = std::min(geom.chunk, geom.frames - start);
    if (count > 0)
      out.middleCols(static_cast<Eigen::Index>(s) * geom.chunk, count) =
          v.middleCols(start, count);
  }
  ad::Tape *tp = x.tape();
  return tp->Emit(std::move(out), {x}, [tp, x, geom, n](const ad::Matrix &g) {
    ad::Matrix back = ad::Matrix::Zero(n, geom.frames);
    for (int s = 0; s < geom.n_chunks; ++s) {
      const int start = s * geom.hop;
      const int count = std::min(geom.chunk, geom.frames - start);
      if (count > 0)
        back.middleCols(start, count) +=
            g.middleCols(static_cast<Eigen::Index>(s) * geom.chunk, count);
    }
    tp->Accumulate(x, back);
  });
}

ad::Var MergeChunks(const ad::Var &z, const ChunkGeometry &geom) {
  MTSE_REQUIRE(z.cols() == static_cast<Eigen::Index>(geom.n_chunks) * geom.chunk,
               InvalidInput, "MergeChunks: column count mismatch");
  const auto &v = z.value();
  const Eigen::Index n = v.rows();
  Eigen::RowVectorXd cover = Eigen::RowVectorXd::Zero(geom.frames);
  ad::Matrix out = ad::Matrix::Zero(n, geom.frames);
  for (int s = 0; s < geom.n_chunks; ++s) {
    const int start = s * geom.hop;
    const int count = std::min(geom.chunk, geom.frames - start);
    if (count <= 0) continue;
    out.middleCols(start, count) +=
        v.middleCols(static_cast<Eigen::Index>(s) * geom.chunk, count);
    cover.segment(start, count).array() += 1.0;
  }
  const Eigen::RowVectorXd inv = cover.cwiseInverse();
  out = out * inv.asDiagonal();
  ad::Tape *tp = z.tape();
  return tp->Emit(std::move(out), {z},
                  [tp, z, geom, n, inv](const ad::Matrix &g) {
                    ad::Matrix back = ad::Matrix::Zero(
                        n, static_cast<Eigen::Index>(geom.n_chunks) * geom.chunk);
                    const ad::Matrix scaled = g * inv.asDiagonal();
                    for (int s = 0; s < geom.n_chunks; ++s) {
                      const int start = s * geom.hop;
                      const int count = std::min(geom.chunk, geom.frames - start);
                      if (count > 0)
                        back.middleCols(static_cast<Eigen::Index>(s) * geom.chunk,
                                        count) = scaled.middleCols(start, count);
                    }
                    tp->Accumulate(z, back);
                  });
}

}  // namespace mtse
