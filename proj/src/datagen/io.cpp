// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mtse/datagen/io.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <fstream>
#include <sstream>

#include "mtse/core/errors.h"

namespace mtse::data {

namespace {

void PutU16(std::string &out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void PutU32(std::string &out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string &bytes) : bytes_(bytes) {}
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void Need(std::size_t n, const char *what) const {
    if (remaining() < n) throw ParseError(std::string("truncated ") + what, pos_);
  }
  std::uint32_t U32(const char *what) {
    Need(4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + k]))
           << (8 * k);
    pos_ += 4;
    return v;
  }
  std::uint16_t U16(const char *what) {
    Need(2, what);
    const auto lo = static_cast<unsigned char>(bytes_[pos_]);
    const auto hi = static_cast<unsigned char>(bytes_[pos_ + 1]);
    pos_ += 2;
    return static_cast<std::uint16_t>(lo | (hi << 8));
  }
  std::string Tag(const char *what) {
    Need(4, what);
    std::string t = bytes_.substr(pos_, 4);
    pos_ += 4;
    return t;
  }
  void Skip(std::size_t n, const char *what) {
    Need(n, what);
    pos_ += n;
  }

 private:
  const std::string &bytes_;
  std::size_t pos_ = 0;
};

std::string SplitDir(const std::string &split) { return split; }

std::string Stem(const MixtureExample &ex) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d", ex.index);
  return SplitDir(ex.split) + "/" + buf;
}

nlohmann::json SpeakerJson(const SpeakerProfile &s) {
  return {{"id", s.id},
          {"spectral_signature", s.spectral_signature},
          {"n_utterances", s.n_utterances},
          {"seed", s.seed}};
}

SpeakerProfile SpeakerFromJson(const nlohmann::json &j) {
  SpeakerProfile s;
  s.id = j.at("id").get<std::string>();
  s.spectral_signature = j.at("spectral_signature").get<std::vector<double>>();
  s.n_utterances = j.at("n_utterances").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

}  // namespace

std::string EncodeWav(const AudioWaveform &wave) {
  const auto n = static_cast<std::uint32_t>(wave.size());
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  PutU32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  PutU32(out, 16);
  PutU16(out, 1);  // PCM
  PutU16(out, 1);  // mono
  PutU32(out, static_cast<std::uint32_t>(wave.sample_rate));
  PutU32(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  PutU16(out, 2);
  PutU16(out, 16);
  out += "data";
  PutU32(out, 2 * n);
  for (Eigen::Index k = 0; k < wave.size(); ++k) {
    const long q = std::clamp(std::lround(wave.samples(k) * 32768.0), -32768L, 32767L);
    PutU16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

AudioWaveform DecodeWav(const std::string &bytes) {
  Reader r(bytes);
  if (r.Tag("RIFF header") != "RIFF") throw ParseError("not a RIFF file", 0);
  r.U32("RIFF size");
  if (r.Tag("WAVE tag") != "WAVE") throw ParseError("not a WAVE file", 8);
  int sample_rate = 0;
  bool have_fmt = false;
  while (true) {
    const std::size_t chunk_at = r.pos();
    const std::string id = r.Tag("chunk id");
    const std::uint32_t size = r.U32("chunk size");
    if (id == "fmt ") {
      if (size < 16) throw ParseError("fmt chunk too small", chunk_at);
      const std::size_t body = r.pos();
      const auto format = r.U16("fmt");
      const auto channels = r.U16("fmt");
      sample_rate = static_cast<int>(r.U32("fmt"));
      r.U32("fmt");
      r.U16("fmt");
      const auto bits = r.U16("fmt");
      if (format != 1 || channels != 1 || bits != 16)
        throw ParseError("only PCM16 mono WAV is supported", body);
      if (sample_rate <= 0) throw ParseError("invalid sample rate", body + 4);
      r.Skip(size - 16 + (size & 1), "fmt chunk");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw ParseError("data chunk before fmt chunk", chunk_at);
      if (size % 2) throw ParseError("odd PCM16 data size", chunk_at + 4);
      r.Need(size, "sample data");
      AudioWaveform w;
      w.sample_rate = sample_rate;
      w.samples.resize(size / 2);
      for (std::uint32_t k = 0; k < size / 2; ++k)
        w.samples(k) = static_cast<std::int16_t>(r.U16("sample")) / 32768.0;
      return w;
    } else {
      r.Skip(size + (size & 1), "chunk body");
    }
  }
}

std::string ReadFile(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool WriteFileIfChanged(const fs::path &path, const std::string &bytes) {
  std::error_code ec;
  if (fs::exists(path, ec) && fs::file_size(path, ec) == bytes.size() &&
      ReadFile(path) == bytes)
    return false;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidInput("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
  return true;
}

void WriteWav(const fs::path &path, const AudioWaveform &wave) {
  WriteFileIfChanged(path, EncodeWav(wave));
}

AudioWaveform ReadWav(const fs::path &path) { return DecodeWav(ReadFile(path)); }

std::string EncodeFeatures(const VideoFeatureStream &video) {
  std::string out;
  out.reserve(4 * video.frames() * video.dim());
  for (Eigen::Index f = 0; f < video.frames(); ++f)
    for (Eigen::Index d = 0; d < video.dim(); ++d)
      PutU32(out, std::bit_cast<std::uint32_t>(static_cast<float>(video.features(f, d))));
  return out;
}

VideoFeatureStream DecodeFeatures(const std::string &bytes,
                                  const nlohmann::json &sidecar) {
  const auto frames = sidecar.at("frames").get<std::int64_t>();
  const auto dim = sidecar.at("dim").get<std::int64_t>();
  const double fps = sidecar.at("fps").get<double>();
  if (frames < 0 || dim < 0 || !(fps > 0))
    throw ParseError("invalid feature sidecar", 0);
  const auto expected = static_cast<std::uint64_t>(4 * frames * dim);
  if (bytes.size() != expected)
    throw ParseError("feature file holds " + std::to_string(bytes.size()) +
                         " bytes, sidecar implies " + std::to_string(expected),
                     std::min<std::uint64_t>(bytes.size(), expected));
  Reader r(bytes);
  VideoFeatureStream v;
  v.frame_rate = fps;
  v.spec.frame_rate = fps;
  v.features.resize(frames, dim);
  for (Eigen::Index f = 0; f < frames; ++f)
    for (Eigen::Index d = 0; d < dim; ++d)
      v.features(f, d) = std::bit_cast<float>(r.U32("feature"));
  return v;
}

void WriteFeatures(const fs::path &path, const VideoFeatureStream &video) {
  WriteFileIfChanged(path, EncodeFeatures(video));
  nlohmann::json side{{"frames", video.frames()}, {"dim", video.dim()},
                      {"fps", video.frame_rate}};
  WriteFileIfChanged(path.string() + ".json", side.dump() + "\n");
}

VideoFeatureStream ReadFeatures(const fs::path &path) {
  const std::string side = ReadFile(path.string() + ".json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(side);
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError("feature sidecar: " + std::string(e.what()), e.byte);
  }
  return DecodeFeatures(ReadFile(path), j);
}

std::uint64_t Fnv1a64(const std::string &bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string HexDigest(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json WriteExample(const fs::path &dir, const MixtureExample &ex,
                            WriteStats &stats) {
  const std::string stem = Stem(ex);
  const std::string files[5] = {EncodeWav(ex.mixture), EncodeWav(ex.target),
                                EncodeWav(ex.interferer), EncodeWav(ex.enrolment),
                                EncodeFeatures(ex.video)};
  const char *suffix[5] = {"_mix.wav", "_target.wav", "_interf.wav", "_enrol.wav",
                           "_video.f32"};
  auto put = [&](const std::string &rel, const std::string &bytes) {
    if (WriteFileIfChanged(dir / rel, bytes))
      ++stats.files_written;
    else
      ++stats.files_unchanged;
  };
  std::uint64_t digest = 0xcbf29ce484222325ULL;
  for (int k = 0; k < 5; ++k) {
    put(stem + suffix[k], files[k]);
    digest = Fnv1a64(HexDigest(digest) + HexDigest(Fnv1a64(files[k])));
  }
  nlohmann::json side{{"frames", ex.video.frames()},
                      {"dim", ex.video.dim()},
                      {"fps", ex.video.frame_rate}};
  put(stem + "_video.f32.json", side.dump() + "\n");
  return {{"split", ex.split},
          {"index", ex.index},
          {"mixture", stem + suffix[0]},
          {"target", stem + suffix[1]},
          {"interferer", stem + suffix[2]},
          {"enrolment", stem + suffix[3]},
          {"video", stem + suffix[4]},
          {"target_id", ex.target_id},
          {"interferer_id", ex.interferer_id},
          {"target_utterance", ex.target_utterance},
          {"interferer_utterance", ex.interferer_utterance},
          {"enrolment_utterance", ex.enrolment_utterance},
          {"sir_db", ex.sir_db},
          {"seed", ex.seed},
          {"checksum", HexDigest(digest)}};
}

void WriteCorpusIndex(const fs::path &dir, const CorpusPlan &plan,
                      const std::string &manifest, WriteStats &stats) {
  auto put = [&](const std::string &rel, const std::string &bytes) {
    if (WriteFileIfChanged(dir / rel, bytes))
      ++stats.files_written;
    else
      ++stats.files_unchanged;
  };
  put("manifest.jsonl", manifest);
  stats.manifest_checksum = HexDigest(Fnv1a64(manifest));
  nlohmann::json meta{{"spec", plan.spec},
                      {"train_ids", plan.train_ids},
                      {"val_ids", plan.val_ids},
                      {"test_ids", plan.test_ids},
                      {"manifest_checksum", stats.manifest_checksum}};
  meta["speakers"] = nlohmann::json::array();
  for (const auto &s : plan.speakers) meta["speakers"].push_back(SpeakerJson(s));
  put("corpus.json", meta.dump(2) + "\n");
}

WriteStats WriteCorpus(const Corpus &corpus, const fs::path &dir) {
  WriteStats stats;
  std::string manifest;
  for (const auto *split : {&corpus.train, &corpus.val, &corpus.test, &corpus.self_enrol})
    for (const MixtureExample &ex : *split)
      manifest += WriteExample(dir, ex, stats).dump() + "\n";
  WriteCorpusIndex(dir, corpus, manifest, stats);
  return stats;
}

WriteStats GenerateCorpusFiles(const CorpusPlan &plan, const fs::path &dir,
                               const std::function<void(const std::string &, int)> &progress) {
  WriteStats stats;
  std::string manifest;
  for (const auto &split : kSplitNames) {
    const int n = SplitSize(plan.spec, split);
    for (int i = 0; i < n; ++i) {
      manifest += WriteExample(dir, GenerateExample(plan, split, i), stats).dump() + "\n";
      if (progress) progress(split, i + 1);
    }
  }
  WriteCorpusIndex(dir, plan, manifest, stats);
  return stats;
}

Corpus LoadCorpus(const fs::path &dir, bool verify) {
  if (!fs::exists(dir / "manifest.jsonl") || !fs::exists(dir / "corpus.json"))
    throw ConfigError("no corpus found in '" + dir.string() +
                      "'; run `mtse generate-data` first");
  Corpus c;
  const std::string meta_text = ReadFile(dir / "corpus.json");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_text);
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError("corpus.json: " + std::string(e.what()), e.byte);
  }
  c.spec = meta.at("spec").get<CorpusSpec>();
  c.train_ids = meta.at("train_ids").get<std::vector<std::string>>();
  c.val_ids = meta.at("val_ids").get<std::vector<std::string>>();
  c.test_ids = meta.at("test_ids").get<std::vector<std::string>>();
  for (const auto &s : meta.at("speakers")) c.speakers.push_back(SpeakerFromJson(s));

  const std::string manifest = ReadFile(dir / "manifest.jsonl");
  if (verify && meta.contains("manifest_checksum") &&
      meta["manifest_checksum"].get<std::string>() != HexDigest(Fnv1a64(manifest)))
    throw InvalidInput("manifest checksum mismatch in " + dir.string());
  std::size_t line_start = 0;
  while (line_start < manifest.size()) {
    std::size_t end = manifest.find('\n', line_start);
    if (end == std::string::npos) end = manifest.size();
    const std::string line = manifest.substr(line_start, end - line_start);
    if (!line.empty()) {
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error &e) {
        throw ParseError("manifest.jsonl: " + std::string(e.what()),
                         line_start + (e.byte > 0 ? e.byte - 1 : 0));
      }
      MixtureExample ex;
      ex.split = rec.at("split").get<std::string>();
      ex.index = rec.at("index").get<int>();
      ex.target_id = rec.at("target_id").get<std::string>();
      ex.interferer_id = rec.at("interferer_id").get<std::string>();
      ex.target_utterance = rec.value("target_utterance", 0);
      ex.interferer_utterance = rec.value("interferer_utterance", 0);
      ex.enrolment_utterance = rec.value("enrolment_utterance", 0);
      ex.sir_db = rec.at("sir_db").get<double>();
      ex.seed = rec.at("seed").get<std::uint64_t>();
      const char *keys[5] = {"mixture", "target", "interferer", "enrolment", "video"};
      std::string files[5];
      std::uint64_t digest = 0xcbf29ce484222325ULL;
      for (int k = 0; k < 5; ++k) {
        files[k] = ReadFile(dir / rec.at(keys[k]).get<std::string>());
        digest = Fnv1a64(HexDigest(digest) + HexDigest(Fnv1a64(files[k])));
      }
      if (verify && rec.at("checksum").get<std::string>() != HexDigest(digest))
        throw InvalidInput("checksum mismatch for " + ex.split + " example " +
                           std::to_string(ex.index));
      ex.mixture = DecodeWav(files[0]);
      ex.target = DecodeWav(files[1]);
      ex.interferer = DecodeWav(files[2]);
      ex.enrolment = DecodeWav(files[3]);
      const fs::path video = dir / rec.at("video").get<std::string>();
      const std::string side = ReadFile(video.string() + ".json");
      ex.video = DecodeFeatures(files[4], nlohmann::json::parse(side));
      if (ex.split == "train")
        c.train.push_back(std::move(ex));
      else if (ex.split == "val")
        c.val.push_back(std::move(ex));
      else if (ex.split == "test")
        c.test.push_back(std::move(ex));
      else if (ex.split == "self_enrol")
        c.self_enrol.push_back(std::move(ex));
      else
        throw ParseError("unknown split '" + ex.split + "'", line_start);
    }
    line_start = end + 1;
  }
  return c;
}

}  // namespace mtse::data
