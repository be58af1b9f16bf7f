// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mtse/core/signal.h"

#include "mtse/core/errors.h"

namespace mtse {

void AudioWaveform::Validate() const {
  MTSE_REQUIRE(sample_rate > 0, InvalidInput, "sample rate must be positive");
  MTSE_REQUIRE(samples.size() >= 1, InvalidInput, "empty waveform");
  MTSE_REQUIRE(samples.allFinite(), InvalidInput, "non-finite samples");
}

AudioWaveform AudioWaveform::Segment(Eigen::Index start,
                                     Eigen::Index length) const {
  MTSE_REQUIRE(start >= 0 && length >= 0 && start + length <= size(),
               InvalidInput, "waveform segment out of range");
  return {samples.segment(start, length), sample_rate};
}

void VideoFeatureStream::Validate() const {
  MTSE_REQUIRE(frames() >= 1 && dim() >= 1, InvalidInput,
               "empty video feature stream");
  MTSE_REQUIRE(frame_rate > 0, InvalidInput, "frame rate must be positive");
  MTSE_REQUIRE(features.allFinite(), InvalidInput, "non-finite features");
}

VideoFeatureStream VideoFeatureStream::Segment(Eigen::Index start,
                                               Eigen::Index count) const {
  MTSE_REQUIRE(start >= 0 && count >= 0 && start + count <= frames(),
               InvalidInput, "video segment out of range");
  return {features.middleRows(start, count), frame_rate, spec};
}

VideoFeatureStream VideoFeatureStream::Zeroed() const {
  return {Eigen::MatrixXd::Zero(frames(), dim()), frame_rate, spec};
}

AudioWaveform Concatenate(const AudioWaveform &a, const AudioWaveform &b) {
  MTSE_REQUIRE(a.sample_rate == b.sample_rate, InvalidInput,
               "sample rate mismatch");
  AudioWaveform out{Eigen::VectorXd(a.size() + b.size()), a.sample_rate};
  out.samples << a.samples, b.samples;
  return out;
}

VideoFeatureStream Concatenate(const VideoFeatureStream &a,
                               const VideoFeatureStream &b) {
  MTSE_REQUIRE(a.dim() == b.dim(), InvalidInput, "feature dim mismatch");
  VideoFeatureStream out{Eigen::MatrixXd(a.frames() + b.frames(), a.dim()),
                         a.frame_rate, a.spec};
  out.features << a.features, b.features;
  return out;
}

}  // namespace mtse
