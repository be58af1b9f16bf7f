// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Binary container: "MTSECKPT", u32 version, u64 header length, a JSON
// header (metadata plus the tensor table) and the tensors as little-endian
// float64 in column-major order.

#ifndef MTSE_TRAINING_CHECKPOINT_H_
#define MTSE_TRAINING_CHECKPOINT_H_

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mtse/core/ad.h"
#include "mtse/model/mtse_model.h"

namespace mtse {

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, ad::Matrix>> tensors;

  bool Has(const std::string &name) const;
  const ad::Matrix &Tensor(const std::string &name) const;
  void Put(const std::string &name, ad::Matrix value);
};

std::string EncodeCheckpoint(const Checkpoint &ckpt);
Checkpoint DecodeCheckpoint(const std::string &bytes);  // throws ParseError
void SaveCheckpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
Checkpoint LoadCheckpoint(const std::filesystem::path &path);

// Stores every model parameter under "<prefix><name>".
void PutParameters(Checkpoint &ckpt, const ParameterSet &params,
                   const std::string &prefix);
// Loads parameters written by PutParameters; throws ConfigError on
// missing names or shape mismatches.
void GetParameters(const Checkpoint &ckpt, ParameterSet &params,
                   const std::string &prefix);

// Rebuilds the model from meta["model"] and the "param/" tensors.
std::unique_ptr<MtseModel> ModelFromCheckpoint(const Checkpoint &ckpt);

}  // namespace mtse

#endif  // MTSE_TRAINING_CHECKPOINT_H_
