// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// On-disk formats: PCM16 mono WAV, raw little-endian float32 feature
// matrices (frame-major) with a JSON sidecar, and a JSON-lines manifest.

#ifndef MTSE_DATAGEN_IO_H_
#define MTSE_DATAGEN_IO_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtse/core/signal.h"
#include "mtse/datagen/corpus.h"

namespace mtse::data {

namespace fs = std::filesystem;

// Samples are clamped to [-1, 1) and quantized to 16 bits.
std::string EncodeWav(const AudioWaveform &wave);
AudioWaveform DecodeWav(const std::string &bytes);  // throws ParseError
void WriteWav(const fs::path &path, const AudioWaveform &wave);
AudioWaveform ReadWav(const fs::path &path);

// <path> holds the float32 matrix, <path>.json the {frames, dim, fps} sidecar.
std::string EncodeFeatures(const VideoFeatureStream &video);
VideoFeatureStream DecodeFeatures(const std::string &bytes,
                                  const nlohmann::json &sidecar);
void WriteFeatures(const fs::path &path, const VideoFeatureStream &video);
VideoFeatureStream ReadFeatures(const fs::path &path);

std::string ReadFile(const fs::path &path);
// Returns false (and leaves the file untouched) when contents already match.
bool WriteFileIfChanged(const fs::path &path, const std::string &bytes);

std::uint64_t Fnv1a64(const std::string &bytes);
std::string HexDigest(std::uint64_t h);

struct WriteStats {
  int files_written = 0;
  int files_unchanged = 0;
  std::string manifest_checksum;
};

// Layout: <dir>/corpus.json, <dir>/manifest.jsonl, <dir>/<split>/<NNNNNN>_*.
// Re-running with identical content rewrites nothing.
WriteStats WriteCorpus(const Corpus &corpus, const fs::path &dir);
// Same layout, generating one example at a time. `progress` receives the
// split name and the number of examples done in it.
WriteStats GenerateCorpusFiles(
    const CorpusPlan &plan, const fs::path &dir,
    const std::function<void(const std::string &, int)> &progress = {});
// Writes one example's files and returns its manifest record.
nlohmann::json WriteExample(const fs::path &dir, const MixtureExample &ex,
                            WriteStats &stats);
// Throws ConfigError if the directory has no manifest; ParseError on
// malformed files; InvalidInput on checksum mismatch when verify is set.
Corpus LoadCorpus(const fs::path &dir, bool verify = true);

}  // namespace mtse::data

#endif  // MTSE_DATAGEN_IO_H_
