#pragma once

// Binary checkpoint, all integers little-endian:
//
//   "RBAM"  u32 version
//   config: u32 blocks, channels, scale, sa_pool, ca_reduction
//           u8  use_ca, use_sa, use_first_order, use_second_order
//   u32 parameter record count, records...
//   u32 optimizer record count, records...
//
// record: u32 name length, name bytes, u8 dtype (0 f32, 1 f64, 2 i64),
//         u32 rank, u64 extents[rank], raw little-endian data.
//
// Optimizer records are "adam.step" and "train.epochs" (rank-0 i64), then
// "adam.m.<param>" and "adam.v.<param>" for every parameter in order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include "rbam/errors.hpp"
#include "rbam/optim.hpp"
#include "rbam/rbam_net.hpp"

namespace rbam {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
struct Checkpoint {
  ModelConfig config;
  ParamStore<T> params;
  AdamState<T> adam;
  std::uint64_t epochs_completed = 0;
};

namespace detail {

enum class DType : std::uint8_t { f32 = 0, f64 = 1, i64 = 2 };

template <class T>
constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, float>) return DType::f32;
  else if constexpr (std::is_same_v<T, double>) return DType::f64;
  else return DType::i64;
}

inline std::size_t dtype_size(DType d) { return d == DType::f32 ? 4 : 8; }

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void bytes(const std::string& s) { buf_ += s; }

  template <class V>
  void values(const V* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      if constexpr (std::is_same_v<V, float>) u32(std::bit_cast<std::uint32_t>(data[i]));
      else if constexpr (std::is_same_v<V, double>) u64(std::bit_cast<std::uint64_t>(data[i]));
      else u64(static_cast<std::uint64_t>(data[i]));
    }
  }

  const std::string& str() const { return buf_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& buf) : buf_(buf) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == buf_.size(); }

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  // Reads n values stored as `stored` and converts them to V.
  template <class V>
  std::vector<V> values(DType stored, std::size_t n) {
    need(n * dtype_size(stored));
    std::vector<V> out(n);
    for (auto& v : out) {
      switch (stored) {
        case DType::f32: v = static_cast<V>(std::bit_cast<float>(u32())); break;
        case DType::f64: v = static_cast<V>(std::bit_cast<double>(u64())); break;
        case DType::i64: v = static_cast<V>(static_cast<std::int64_t>(u64())); break;
      }
    }
    return out;
  }

  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw FormatError("checkpoint truncated", pos_);
  }

 private:
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  const std::string& buf_;
  std::size_t pos_ = 0;
};

template <class V>
void write_record(ByteWriter& w, const std::string& name, const Shape& shape, const V* data) {
  w.u32(static_cast<std::uint32_t>(name.size()));
  w.bytes(name);
  w.u8(static_cast<std::uint8_t>(dtype_of<V>()));
  w.u32(static_cast<std::uint32_t>(shape.size()));
  for (auto e : shape) w.u64(e);
  w.values(data, element_count(shape));
}

template <class V>
struct Record {
  std::string name;
  Shape shape;
  std::vector<V> data;
};

template <class V>
Record<V> read_record(ByteReader& r) {
  Record<V> rec;
  const std::uint32_t len = r.u32();
  if (len > (1u << 16)) throw FormatError("checkpoint record name too long", r.offset());
  rec.name = r.bytes(len);
  const std::size_t dtype_at = r.offset();
  const std::uint8_t tag = r.u8();
  if (tag > 2) throw FormatError("unknown dtype tag " + std::to_string(tag), dtype_at);
  const std::uint32_t rank = r.u32();
  if (rank > 8) throw FormatError("implausible rank " + std::to_string(rank), r.offset());
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint64_t e = r.u64();
    if (e == 0 || e > (std::uint64_t{1} << 32)) throw FormatError("invalid extent", r.offset());
    rec.shape.push_back(static_cast<std::size_t>(e));
    count *= static_cast<std::size_t>(e);
  }
  rec.data = r.values<V>(static_cast<DType>(tag), count);
  return rec;
}

}  // namespace detail

template <class T>
std::string encode_checkpoint(const Checkpoint<T>& ck) {
  detail::ByteWriter w;
  w.bytes("RBAM");
  w.u32(kCheckpointVersion);
  const auto& c = ck.config;
  for (auto v : {c.blocks, c.channels, c.scale, c.sa_pool, c.ca_reduction}) w.u32(static_cast<std::uint32_t>(v));
  for (bool b : {c.use_ca, c.use_sa, c.use_first_order, c.use_second_order}) w.u8(b ? 1 : 0);

  w.u32(static_cast<std::uint32_t>(ck.params.size()));
  for (const auto& e : ck.params) detail::write_record(w, e.name, e.tensor.shape(), e.tensor.data().data());

  const bool has_moments = ck.adam.first_moment.size() == ck.params.size();
  w.u32(static_cast<std::uint32_t>(2 + (has_moments ? 2 * ck.params.size() : 0)));
  const auto step = static_cast<std::int64_t>(ck.adam.step);
  const auto epochs = static_cast<std::int64_t>(ck.epochs_completed);
  detail::write_record(w, "adam.step", {}, &step);
  detail::write_record(w, "train.epochs", {}, &epochs);
  if (has_moments) {
    std::size_t i = 0;
    for (const auto& e : ck.params) {
      detail::write_record(w, "adam.m." + e.name, e.tensor.shape(), ck.adam.first_moment[i].data());
      detail::write_record(w, "adam.v." + e.name, e.tensor.shape(), ck.adam.second_moment[i].data());
      ++i;
    }
  }
  return w.str();
}

template <class T>
Checkpoint<T> decode_checkpoint(const std::string& bytes) {
  detail::ByteReader r(bytes);
  if (r.bytes(4) != "RBAM") throw FormatError("bad checkpoint magic", 0);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
  }
  Checkpoint<T> ck;
  auto& c = ck.config;
  c.blocks = r.u32();
  c.channels = r.u32();
  c.scale = r.u32();
  c.sa_pool = r.u32();
  c.ca_reduction = r.u32();
  c.use_ca = r.u8() != 0;
  c.use_sa = r.u8() != 0;
  c.use_first_order = r.u8() != 0;
  c.use_second_order = r.u8() != 0;
  const std::size_t config_end = r.offset();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint holds an invalid model config: ") + e.what(), config_end);
  }

  const std::uint32_t n_params = r.u32();
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::size_t at = r.offset();
    auto rec = detail::read_record<T>(r);
    if (ck.params.contains(rec.name)) throw FormatError("duplicate parameter '" + rec.name + "'", at);
    ck.params.add(rec.name, Tensor<T>(rec.shape, std::move(rec.data)));
  }

  const std::uint32_t n_opt = r.u32();
  std::vector<detail::Record<T>> moments;
  for (std::uint32_t i = 0; i < n_opt; ++i) {
    const std::size_t at = r.offset();
    // Read through double: exact for f32, f64 and the i64 counters.
    auto rec = detail::read_record<double>(r);
    if (rec.name == "adam.step") {
      ck.adam.step = static_cast<std::uint64_t>(rec.data.at(0));
    } else if (rec.name == "train.epochs") {
      ck.epochs_completed = static_cast<std::uint64_t>(rec.data.at(0));
    } else if (rec.name.rfind("adam.m.", 0) == 0 || rec.name.rfind("adam.v.", 0) == 0) {
      moments.push_back({rec.name, rec.shape, std::vector<T>(rec.data.begin(), rec.data.end())});
    } else {
      throw FormatError("unknown optimizer record '" + rec.name + "'", at);
    }
  }
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint", r.offset());

  if (!moments.empty()) {
    if (moments.size() != 2 * ck.params.size()) throw FormatError("incomplete optimizer state", r.offset());
    std::size_t i = 0;
    for (const auto& e : ck.params) {
      const auto& m = moments[2 * i];
      const auto& v = moments[2 * i + 1];
      if (m.name != "adam.m." + e.name || v.name != "adam.v." + e.name || m.shape != e.tensor.shape() ||
          v.shape != e.tensor.shape()) {
        throw FormatError("optimizer state does not match parameter '" + e.name + "'", r.offset());
      }
      ck.adam.first_moment.push_back(m.data);
      ck.adam.second_moment.push_back(v.data);
      ++i;
    }
  }

  // The parameter set must be exactly what the config builds.
  const auto reference = build<T>(c, 0);
  if (reference.size() != ck.params.size()) {
    throw FormatError("checkpoint parameters do not match its model config", config_end);
  }
  for (const auto& e : reference) {
    if (!ck.params.contains(e.name) || ck.params[e.name].shape() != e.tensor.shape()) {
      throw FormatError("checkpoint parameter '" + e.name + "' missing or misshapen", config_end);
    }
  }
  return ck;
}

template <class T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  const auto bytes = encode_checkpoint(ck);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for checkpoint '" + path + "'");
}

template <class T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint<T>(bytes);
}

}  // namespace rbam
