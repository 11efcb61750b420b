// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "eqnet/errors.hpp"
#include "eqnet/nn.hpp"

namespace eqnet::nn {
namespace {

constexpr char kMagic[4] = {'E', 'Q', 'N', 'W'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | (static_cast<std::uint64_t>(u32()) << 32);
  }
  float f32() {
    const float f = std::bit_cast<float>(u32());
    if (!std::isfinite(f)) throw ConfigError("weight file: non-finite parameter");
    return f;
  }
  void magic() {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, kMagic, 4) != 0) throw ConfigError("weight file: bad magic");
    pos_ += 4;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ConfigError("weight file: truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const Model& model, std::uint64_t fingerprint) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kWeightFileVersion);
  put_u64(out, fingerprint);
  put_u32(out, static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& l : model.layers()) {
    put_u32(out, static_cast<std::uint32_t>(l.kind));
    put_u32(out, l.width);
    put_u32(out, l.slot);
    put_u32(out, static_cast<std::uint32_t>(l.inputs.size()));
    for (std::uint32_t i : l.inputs) put_u32(out, i);
  }
  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    if (model.layers()[i].kind != LayerKind::dense) continue;
    const auto& p = model.params()[i];
    for (Eigen::Index r = 0; r < p.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < p.weight.cols(); ++c) put_f32(out, p.weight(r, c));
    for (Eigen::Index r = 0; r < p.bias.size(); ++r) put_f32(out, p.bias(r));
  }
  return out;
}

Model deserialize_model(std::span<const std::uint8_t> bytes, std::uint64_t* fingerprint) {
  Reader in(bytes);
  in.magic();
  const std::uint32_t version = in.u32();
  if (version != kWeightFileVersion) throw ConfigError("weight file: unsupported version " + std::to_string(version));
  const std::uint64_t fp = in.u64();
  const std::uint32_t count = in.u32();
  if (count > (1U << 16)) throw ConfigError("weight file: implausible layer count");
  std::vector<LayerSpec> specs(count);
  for (auto& s : specs) {
    s.kind = static_cast<LayerKind>(in.u32());
    s.width = in.u32();
    s.slot = in.u32();
    const std::uint32_t n_in = in.u32();
    if (n_in > count) throw ConfigError("weight file: implausible input count");
    s.inputs.resize(n_in);
    for (auto& i : s.inputs) i = in.u32();
  }
  Model model;
  try {
    model = Model::from_specs(specs);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("weight file: ") + e.what());
  }
  auto& params = model.mutable_params();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].kind != LayerKind::dense) continue;
    auto& p = params[i];
    for (Eigen::Index r = 0; r < p.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < p.weight.cols(); ++c) p.weight(r, c) = in.f32();
    for (Eigen::Index r = 0; r < p.bias.size(); ++r) p.bias(r) = in.f32();
  }
  if (!in.done()) throw ConfigError("weight file: trailing bytes");
  if (fingerprint) *fingerprint = fp;
  return model;
}

void save_model(const Model& model, const std::string& path, std::uint64_t fingerprint) {
  const auto bytes = serialize_model(model, fingerprint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("write failed: " + path);
}

Model load_model(const std::string& path, std::uint64_t* fingerprint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes, fingerprint);
}

}  // namespace eqnet::nn
