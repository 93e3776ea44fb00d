#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "prunekit/arch.hpp"
#include "prunekit/config.hpp"
#include "prunekit/errors.hpp"
#include "prunekit/masks.hpp"
#include "prunekit/model.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {

// Versioned little-endian container: magic, version, arch text, config
// echo, parameter tensors, mask arrays, prune-state snapshot.
inline constexpr char kCheckpointMagic[4] = {'P', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void i32(std::int32_t v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& buf) : buf_(buf) {}

  void raw(void* p, std::size_t n) {
    if (pos_ + n > buf_.size()) throw ConfigError("truncated checkpoint");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  std::int32_t i32() {
    std::int32_t v;
    raw(&v, 4);
    return v;
  }
  double f64() {
    double v;
    raw(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    if (pos_ + n > buf_.size()) throw ConfigError("truncated checkpoint");
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  const std::string& buf_;
  std::size_t pos_ = 0;
};

static_assert(sizeof(double) == 8, "checkpoint format assumes 8-byte doubles");

}  // namespace detail

struct Checkpoint {
  ArchSpec arch;
  std::map<std::string, Tensor> params;
  FilterMask mask;
  PruneState state;
  std::string config_text;
};

inline std::string encode_checkpoint(const Model& model, const FilterMask& mask,
                                     const PruneState& state, const std::string& config_text) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(serialize_arch(model.arch));
  w.str(config_text);

  w.u32(static_cast<std::uint32_t>(model.params.size()));
  for (const auto& [id, t] : model.params) {
    w.str(id);
    w.u32(static_cast<std::uint32_t>(t.ndim()));
    for (std::size_t d : t.shape) w.u64(d);
    for (double v : t.data) w.f64(v);
  }

  w.u32(static_cast<std::uint32_t>(mask.layers.size()));
  for (const auto& [id, states] : mask.layers) {
    w.str(id);
    w.u64(states.size());
    for (FilterState s : states) w.u8(static_cast<std::uint8_t>(s));
  }

  w.i32(state.t);
  w.f64(state.alpha);
  w.f64(state.lambda_h);
  w.u32(static_cast<std::uint32_t>(state.rates.size()));
  for (const auto& [id, r] : state.rates) {
    w.str(id);
    w.f64(r);
  }
  w.u32(static_cast<std::uint32_t>(state.selections.size()));
  for (const auto& [id, sel] : state.selections) {
    w.str(id);
    w.u64(sel.hard.size());
    for (std::size_t j : sel.hard) w.u64(j);
    w.u64(sel.soft.size());
    for (std::size_t j : sel.soft) w.u64(j);
  }
  return w.bytes();
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  detail::ByteReader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw ConfigError("checkpoint magic mismatch (not a PKPT file)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  ck.arch = parse_arch(r.str());
  ck.config_text = r.str();

  const std::uint32_t n_params = r.u32();
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::string id = r.str();
    const std::uint32_t ndim = r.u32();
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = static_cast<std::size_t>(r.u64());
    Tensor t{shape};
    for (double& v : t.data) v = r.f64();
    ck.params[id] = std::move(t);
  }

  const std::uint32_t n_masks = r.u32();
  for (std::uint32_t i = 0; i < n_masks; ++i) {
    const std::string id = r.str();
    const std::uint64_t n = r.u64();
    LayerMask states(n);
    for (auto& s : states) {
      const std::uint8_t v = r.u8();
      if (v > 2) throw ConfigError("checkpoint has invalid filter state " + std::to_string(v));
      s = static_cast<FilterState>(v);
    }
    ck.mask.layers[id] = std::move(states);
  }

  ck.state.t = r.i32();
  ck.state.alpha = r.f64();
  ck.state.lambda_h = r.f64();
  const std::uint32_t n_rates = r.u32();
  for (std::uint32_t i = 0; i < n_rates; ++i) {
    const std::string id = r.str();
    ck.state.rates[id] = r.f64();
  }
  const std::uint32_t n_sel = r.u32();
  for (std::uint32_t i = 0; i < n_sel; ++i) {
    const std::string id = r.str();
    LayerSelection sel;
    sel.hard.resize(r.u64());
    for (auto& j : sel.hard) j = static_cast<std::size_t>(r.u64());
    sel.soft.resize(r.u64());
    for (auto& j : sel.soft) j = static_cast<std::size_t>(r.u64());
    ck.state.selections[id] = std::move(sel);
  }
  if (!r.done()) throw ConfigError("trailing bytes in checkpoint");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Model& model, const FilterMask& mask,
                            const PruneState& state, const std::string& config_text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  const std::string bytes = encode_checkpoint(model, mask, state, config_text);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed to write checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

/// Rebuild an executable model from a checkpoint, verifying every tensor
/// against the arch-derived shape.
inline Model model_from_checkpoint(const Checkpoint& ck) {
  Model m = Model::skeleton(ck.arch);
  for (auto& [id, p] : m.params) {
    auto it = ck.params.find(id);
    if (it == ck.params.end()) throw ConfigError("checkpoint missing parameter '" + id + "'");
    require_shape(it->second, p.shape, "checkpoint parameter '" + id + "'");
    p = it->second;
  }
  if (ck.params.size() != m.params.size())
    throw ConfigError("checkpoint has " + std::to_string(ck.params.size()) +
                      " parameters, arch expects " + std::to_string(m.params.size()));
  return m;
}

}  // namespace prunekit
