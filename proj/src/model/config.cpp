// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mtse/model/config.h"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "mtse/core/errors.h"

namespace mtse {

std::string ToString(NormKind kind) {
  switch (kind) {
    case NormKind::kGlobal:
      return "gLN";
    case NormKind::kCumulative:
      return "cLN";
    case NormKind::kFrame:
      return "LN";
  }
  return "?";
}

NormKind ParseNormKind(const std::string &name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "gln") return NormKind::kGlobal;
  if (lower == "cln") return NormKind::kCumulative;
  if (lower == "ln") return NormKind::kFrame;
  throw ConfigError("unknown normalization kind '" + name + "'");
}

int ModelConfig::KernelSamples() const {
  return static_cast<int>(std::lround(encoder_kernel_ms * sample_rate / 1000));
}

int ModelConfig::StrideSamples() const {
  return static_cast<int>(std::lround(encoder_stride_ms * sample_rate / 1000));
}

std::vector<std::string> ModelConfig::Validate() const {
  if (n_channels <= 0 || hidden_dim <= 0 || chunk_size <= 0 ||
      layers_per_block <= 0 || visual_feature_dim <= 0 || sample_rate <= 0)
    throw ConfigError("model sizes must be positive");
  if (KernelSamples() <= 0 || StrideSamples() <= 0)
    throw ConfigError("encoder kernel and stride must span at least 1 sample");
  if (StrideSamples() > KernelSamples())
    throw ConfigError("encoder stride exceeds kernel length");
  if (!(attention_gamma > 0)) throw ConfigError("attention gamma must be > 0");
  if (!(norm_epsilon > 0)) throw ConfigError("normalization epsilon must be > 0");
  if (mask_activation != "sigmoid")
    throw ConfigError("unsupported mask activation '" + mask_activation + "'");
  if (causal && norm_kind == NormKind::kGlobal)
    throw ConfigError("gLN uses statistics over the whole signal and cannot "
                      "be combined with a causal model");
  std::vector<std::string> warnings;
  if (!causal && norm_kind == NormKind::kCumulative)
    warnings.emplace_back("cLN in a non-causal model");
  return warnings;
}

void to_json(nlohmann::json &j, const ModelConfig &c) {
  j = nlohmann::json{{"causal", c.causal},
                     {"norm", ToString(c.norm_kind)},
                     {"n_channels", c.n_channels},
                     {"hidden_dim", c.hidden_dim},
                     {"chunk_size", c.chunk_size},
                     {"layers_per_block", c.layers_per_block},
                     {"encoder_kernel_ms", c.encoder_kernel_ms},
                     {"encoder_stride_ms", c.encoder_stride_ms},
                     {"visual_feature_dim", c.visual_feature_dim},
                     {"sample_rate", c.sample_rate},
                     {"attention_gamma", c.attention_gamma},
                     {"norm_epsilon", c.norm_epsilon},
                     {"mask_activation", c.mask_activation}};
}

void from_json(const nlohmann::json &j, ModelConfig &c) {
  ModelConfig d;
  c.causal = j.value("causal", d.causal);
  c.norm_kind = ParseNormKind(j.value("norm", ToString(d.norm_kind)));
  c.n_channels = j.value("n_channels", d.n_channels);
  c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
  c.chunk_size = j.value("chunk_size", d.chunk_size);
  c.layers_per_block = j.value("layers_per_block", d.layers_per_block);
  c.encoder_kernel_ms = j.value("encoder_kernel_ms", d.encoder_kernel_ms);
  c.encoder_stride_ms = j.value("encoder_stride_ms", d.encoder_stride_ms);
  c.visual_feature_dim = j.value("visual_feature_dim", d.visual_feature_dim);
  c.sample_rate = j.value("sample_rate", d.sample_rate);
  c.attention_gamma = j.value("attention_gamma", d.attention_gamma);
  c.norm_epsilon = j.value("norm_epsilon", d.norm_epsilon);
  c.mask_activation = j.value("mask_activation", d.mask_activation);
}

}  // namespace mtse
