// Copyright 2026 The MTSE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mtse/training/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mtse/core/errors.h"

namespace mtse {

namespace {

constexpr char kMagic[8] = {'M', 'T', 'S', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void PutLe(std::string &out, std::uint64_t v, int bytes) {
  for (int k = 0; k < bytes; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

std::uint64_t GetLe(const std::string &in, std::size_t &pos, int bytes,
                    const char *what) {
  if (in.size() < pos + bytes)
    throw ParseError(std::string("checkpoint truncated in ") + what, pos);
  std::uint64_t v = 0;
  for (int k = 0; k < bytes; ++k)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + k])) << (8 * k);
  pos += bytes;
  return v;
}

}  // namespace

bool Checkpoint::Has(const std::string &name) const {
  for (const auto &t : tensors)
    if (t.first == name) return true;
  return false;
}

const ad::Matrix &Checkpoint::Tensor(const std::string &name) const {
  for (const auto &t : tensors)
    if (t.first == name) return t.second;
  throw ConfigError("checkpoint has no tensor '" + name + "'");
}

void Checkpoint::Put(const std::string &name, ad::Matrix value) {
  for (auto &t : tensors)
    if (t.first == name) {
      t.second = std::move(value);
      return;
    }
  tensors.emplace_back(name, std::move(value));
}

std::string EncodeCheckpoint(const Checkpoint &ckpt) {
  nlohmann::json header{{"meta", ckpt.meta}, {"tensors", nlohmann::json::array()}};
  for (const auto &[name, m] : ckpt.tensors)
    header["tensors"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  PutLe(out, kVersion, 4);
  PutLe(out, text.size(), 8);
  out += text;
  for (const auto &t : ckpt.tensors) {
    const ad::Matrix &m = t.second;
    for (Eigen::Index k = 0; k < m.size(); ++k)
      PutLe(out, std::bit_cast<std::uint64_t>(m.data()[k]), 8);
  }
  return out;
}

Checkpoint DecodeCheckpoint(const std::string &bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw ParseError("not an MTSE checkpoint", 0);
  std::size_t pos = sizeof(kMagic);
  const auto version = GetLe(bytes, pos, 4, "version");
  if (version != kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 8);
  const auto header_len = GetLe(bytes, pos, 8, "header length");
  if (bytes.size() - pos < header_len) throw ParseError("checkpoint header truncated", pos);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError("checkpoint header: " + std::string(e.what()), pos + e.byte);
  }
  pos += header_len;
  Checkpoint ckpt;
  ckpt.meta = header.value("meta", nlohmann::json::object());
  for (const auto &t : header.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    if (rows < 0 || cols < 0) throw ParseError("negative tensor shape", pos);
    ad::Matrix m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k)
      m.data()[k] = std::bit_cast<double>(GetLe(bytes, pos, 8, "tensor data"));
    ckpt.tensors.emplace_back(t.at("name").get<std::string>(), std::move(m));
  }
  if (pos != bytes.size()) throw ParseError("trailing bytes after checkpoint", pos);
  return ckpt;
}

void SaveCheckpoint(const std::filesystem::path &path, const Checkpoint &ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write " + tmp.string());
    const std::string bytes = EncodeCheckpoint(ckpt);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidInput("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint LoadCheckpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return DecodeCheckpoint(ss.str());
}

void PutParameters(Checkpoint &ckpt, const ParameterSet &params,
                   const std::string &prefix) {
  for (const auto &p : params.items()) ckpt.Put(prefix + p->name, p->value);
}

void GetParameters(const Checkpoint &ckpt, ParameterSet &params,
                   const std::string &prefix) {
  for (const auto &p : params.items()) {
    const ad::Matrix &m = ckpt.Tensor(prefix + p->name);
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
      throw ConfigError("checkpoint tensor '" + prefix + p->name +
                        "' has the wrong shape");
    p->value = m;
  }
}

std::unique_ptr<MtseModel> ModelFromCheckpoint(const Checkpoint &ckpt) {
  if (!ckpt.meta.contains("model"))
    throw ConfigError("checkpoint has no model configuration");
  auto model = std::make_unique<MtseModel>(ckpt.meta.at("model").get<ModelConfig>(),
                                           ckpt.meta.value("init_seed", std::uint64_t{0}));
  GetParameters(ckpt, model->params(), "param/");
  return model;
}

}  // namespace mtse
