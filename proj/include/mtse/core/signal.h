// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MTSE_CORE_SIGNAL_H_
#define MTSE_CORE_SIGNAL_H_

#include <Eigen/Dense>

namespace mtse {

// Mono sampled signal.
struct AudioWaveform {
  Eigen::VectorXd samples;
  int sample_rate = 16000;

  Eigen::Index size() const { return samples.size(); }
  double seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  // Throws InvalidInput unless sample_rate > 0, length >= 1, all finite.
  void Validate() const;
  AudioWaveform Segment(Eigen::Index start, Eigen::Index length) const;
};

// Raw lip-video geometry. Only metadata: pixels are never processed here.
struct VideoStreamSpec {
  int width = 100;
  int height = 50;
  int channels = 1;
  double frame_rate = 25.0;
};

// Per-frame visual features (T_v x D_v, one row per frame). A dropped frame
// is an all-zero row.
struct VideoFeatureStream {
  Eigen::MatrixXd features;
  double frame_rate = 25.0;
  VideoStreamSpec spec;

  Eigen::Index frames() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  void Validate() const;
  VideoFeatureStream Segment(Eigen::Index start, Eigen::Index count) const;
  VideoFeatureStream Zeroed() const;
};

AudioWaveform Concatenate(const AudioWaveform &a, const AudioWaveform &b);
VideoFeatureStream Concatenate(const VideoFeatureStream &a,
                               const VideoFeatureStream &b);

}  // namespace mtse

#endif  // MTSE_CORE_SIGNAL_H_
