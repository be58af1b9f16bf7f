// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MTSE_MODEL_CONFIG_H_
#define MTSE_MODEL_CONFIG_H_

#include <string>
#include <vector>

#include "json.hpp"

namespace mtse {

// gLN: statistics over channels and all frames; cLN: channels and frames
// up to the current one; LN: channels of the current frame only.
enum class NormKind { kGlobal, kCumulative, kFrame };

std::string ToString(NormKind kind);
// Accepts "gLN", "cLN", "LN" (case-insensitive). Throws ConfigError.
NormKind ParseNormKind(const std::string &name);

struct ModelConfig {
  bool causal = false;
  NormKind norm_kind = NormKind::kGlobal;
  int n_channels = 256;
  int hidden_dim = 128;
  int chunk_size = 100;
  int layers_per_block = 2;
  double encoder_kernel_ms = 2.0;
  double encoder_stride_ms = 1.0;
  int visual_feature_dim = 512;
  int sample_rate = 16000;
  double attention_gamma = 2.0;
  double norm_epsilon = 1e-8;
  std::string mask_activation = "sigmoid";

  int KernelSamples() const;
  int StrideSamples() const;

  // Throws ConfigError on hard violations (causal gLN, non-positive sizes,
  // unknown mask activation). Returns soft warnings, e.g. non-causal cLN.
  std::vector<std::string> Validate() const;
};

void to_json(nlohmann::json &j, const ModelConfig &c);
void from_json(const nlohmann::json &j, ModelConfig &c);

}  // namespace mtse

#endif  // MTSE_MODEL_CONFIG_H_
