#pragma once

// The residual bilinear attention super-resolution network.
//
//   head conv 3x3 (1 -> C)
//   B residual attention blocks, then a global skip from the head output
//   log2(r) sub-pixel stages (3x3 conv C -> 4C, shuffle by 2)
//   1x1 reconstruction conv (C -> 1)
//
// Each block runs conv-ReLU-conv, gates the result with channel attention
// (CA) and spatial attention (SA) built from first-order (mean) and
// second-order (covariance) pooling, fuses the gated maps with a 1x1 conv
// and adds the block input.

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rbam/errors.hpp"
#include "rbam/nn_ops.hpp"
#include "rbam/random.hpp"
#include "rbam/tensor.hpp"

namespace rbam {

struct ModelConfig {
  std::size_t blocks = 5;
  std::size_t channels = 64;
  std::size_t scale = 2;
  std::size_t sa_pool = 8;
  std::size_t ca_reduction = 4;
  bool use_ca = true;
  bool use_sa = true;
  bool use_first_order = true;
  bool use_second_order = true;

  bool operator==(const ModelConfig&) const = default;

  bool attention_enabled() const { return use_ca || use_sa; }
  bool sa_needs_pool() const { return use_sa && use_second_order; }
  std::size_t upsample_stages() const { return scale == 4 ? 2 : 1; }

  void validate() const {
    if (blocks < 1) throw ConfigError("blocks must be >= 1");
    if (ca_reduction < 1) throw ConfigError("ca_reduction must be >= 1");
    if (channels < ca_reduction) throw ConfigError("channels must be >= ca_reduction");
    if (scale != 2 && scale != 4) throw ConfigError("scale must be 2 or 4, got " + std::to_string(scale));
    if (sa_pool < 1) throw ConfigError("sa_pool must be >= 1");
    if (attention_enabled() && !use_first_order && !use_second_order) {
      throw ConfigError("an enabled attention branch needs first- or second-order pooling");
    }
    if (use_ca && channels % ca_reduction != 0) {
      throw ConfigError("channels (" + std::to_string(channels) + ") must be divisible by ca_reduction (" +
                        std::to_string(ca_reduction) + ")");
    }
    if (sa_needs_pool() && channels < 2) throw ConfigError("second-order spatial attention needs channels >= 2");
  }
};

// Named learnable tensors in a fixed insertion order.
template <class T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
  };

  void add(std::string name, Tensor<T> tensor) {
    if (index_.count(name)) throw StateError("duplicate parameter '" + name + "'");
    tensor.set_requires_grad(true);
    index_.emplace(name, entries_.size());
    entries_.push_back({std::move(name), std::move(tensor)});
  }

  bool contains(std::string_view name) const { return index_.find(name) != index_.end(); }

  const Tensor<T>& get(std::string_view name) const { return entries_[locate(name)].tensor; }
  Tensor<T>& get(std::string_view name) { return entries_[locate(name)].tensor; }
  const Tensor<T>& operator[](std::string_view name) const { return get(name); }
  Tensor<T>& operator[](std::string_view name) { return get(name); }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  std::size_t size() const { return entries_.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.numel();
    return n;
  }

  // Deep copy with fresh leaves and no gradients.
  ParamStore clone() const { return cast<T>(); }

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& e : entries_) {
      const auto src = e.tensor.data();
      out.add(e.name, Tensor<U>(e.tensor.shape(), std::vector<U>(src.begin(), src.end())));
    }
    return out;
  }

  void zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
  }

 private:
  std::size_t locate(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("missing parameter '" + std::string(name) + "'");
    return it->second;
  }

  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

namespace detail {

inline std::string block_prefix(std::size_t b) { return "block" + std::to_string(b) + "."; }

template <class T>
Tensor<T> he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<T> v(element_count(shape));
  for (auto& x : v) x = static_cast<T>(uniform(rng, -bound, bound));
  return Tensor<T>(std::move(shape), std::move(v));
}

template <class T>
void add_conv(ParamStore<T>& store, const std::string& name, std::size_t cout, std::size_t cin, std::size_t k,
              Rng& rng) {
  store.add(name + ".weight", he_uniform<T>({cout, cin, k, k}, cin * k * k, rng));
  store.add(name + ".bias", Tensor<T>::zeros({cout}));
}

template <class T>
void add_dense(ParamStore<T>& store, const std::string& name, std::size_t out, std::size_t in, Rng& rng) {
  store.add(name + ".weight", he_uniform<T>({out, in}, in, rng));
  store.add(name + ".bias", Tensor<T>::zeros({out}));
}

template <class T>
Tensor<T> conv(const ParamStore<T>& p, const std::string& name, const Tensor<T>& x, Padding pad) {
  return conv2d(x, p[name + ".weight"], p[name + ".bias"], pad);
}

}  // namespace detail

// He-uniform weights (bound sqrt(6 / fan_in)), zero biases, fixed naming:
// head, block{b}.{conv1,conv2,ca.*,sa.*,fuse}, upsample{s}, reconstruct.
template <class T>
ParamStore<T> build(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = make_rng(seed, 0);
  ParamStore<T> store;
  const std::size_t c = cfg.channels;
  const std::size_t pool_cells = cfg.sa_pool * cfg.sa_pool;
  detail::add_conv(store, "head", c, 1, 3, rng);
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    const std::string pre = detail::block_prefix(b);
    detail::add_conv(store, pre + "conv1", c, c, 3, rng);
    detail::add_conv(store, pre + "conv2", c, c, 3, rng);
    if (cfg.use_ca) {
      if (cfg.use_second_order) detail::add_dense(store, pre + "ca.row", 1, c, rng);
      detail::add_dense(store, pre + "ca.fc1", c / cfg.ca_reduction, c, rng);
      detail::add_dense(store, pre + "ca.fc2", c, c / cfg.ca_reduction, rng);
    }
    if (cfg.use_sa) {
      if (cfg.use_second_order) detail::add_dense(store, pre + "sa.row", 1, pool_cells, rng);
      detail::add_conv(store, pre + "sa.conv", 1, 1, 1, rng);
    }
    const std::size_t fuse_in = (cfg.use_ca && cfg.use_sa) ? 2 * c : c;
    detail::add_conv(store, pre + "fuse", c, fuse_in, 1, rng);
  }
  for (std::size_t s = 0; s < cfg.upsample_stages(); ++s) {
    detail::add_conv(store, "upsample" + std::to_string(s), 4 * c, c, 3, rng);
  }
  detail::add_conv(store, "reconstruct", 1, c, 1, rng);
  return store;
}

// Per-channel gate in (0, 1), shape (C, 1, 1).
template <class T>
Tensor<T> ca_gate(const ParamStore<T>& p, const std::string& prefix, const Tensor<T>& h_conv,
                  const ModelConfig& cfg) {
  const std::size_t c = h_conv.extent(0);
  if (c % cfg.ca_reduction != 0) throw ConfigError("channel attention: C not divisible by ca_reduction");
  Tensor<T> pooled;
  if (cfg.use_first_order) pooled = reshape(channel_avg_pool_spatial(h_conv), {c});
  if (cfg.use_second_order) {
    auto second = rowwise_conv(channel_covariance(h_conv), p[prefix + "ca.row.weight"], p[prefix + "ca.row.bias"]);
    pooled = pooled.defined() ? add(pooled, second) : second;
  }
  auto z = relu(linear(pooled, p[prefix + "ca.fc1.weight"], p[prefix + "ca.fc1.bias"]));
  z = linear(z, p[prefix + "ca.fc2.weight"], p[prefix + "ca.fc2.bias"]);
  return reshape(sigmoid(z), {c, 1, 1});
}

template <class T>
Tensor<T> ca_branch(const ParamStore<T>& p, const std::string& prefix, const Tensor<T>& h_conv,
                    const ModelConfig& cfg) {
  return mul(h_conv, ca_gate(p, prefix, h_conv, cfg));
}

// Per-pixel gate in (0, 1) shared by all channels, shape (1, H, W).
template <class T>
Tensor<T> sa_gate(const ParamStore<T>& p, const std::string& prefix, const Tensor<T>& h_conv,
                  const ModelConfig& cfg) {
  const std::size_t h = h_conv.extent(1), w = h_conv.extent(2);
  Tensor<T> pooled;
  if (cfg.use_first_order) pooled = spatial_avg_pool_channel(h_conv);
  if (cfg.use_second_order) {
    const std::size_t cells = cfg.sa_pool;
    if (h < cells || w < cells) {
      throw ShapeError("spatial attention: feature map " + std::to_string(h) + "x" + std::to_string(w) +
                       " is smaller than sa_pool " + std::to_string(cells) + "x" + std::to_string(cells));
    }
    auto sigma = spatial_covariance(adaptive_avg_pool(h_conv, cells, cells));
    auto response = rowwise_conv(sigma, p[prefix + "sa.row.weight"], p[prefix + "sa.row.bias"]);
    auto second = nearest_upsample(reshape(response, {1, cells, cells}), h, w);
    pooled = pooled.defined() ? add(pooled, second) : second;
  }
  return sigmoid(detail::conv(p, prefix + "sa.conv", pooled, Padding{}));
}

template <class T>
Tensor<T> sa_branch(const ParamStore<T>& p, const std::string& prefix, const Tensor<T>& h_conv,
                    const ModelConfig& cfg) {
  return mul(h_conv, sa_gate(p, prefix, h_conv, cfg));
}

// 1x1 conv on the features, plus the block input. Used directly when at most
// one attention branch is active.
template <class T>
Tensor<T> fuse(const ParamStore<T>& p, const std::string& prefix, const Tensor<T>& features,
               const Tensor<T>& skip_in) {
  auto mixed = detail::conv(p, prefix + "fuse", features, Padding{});
  if (mixed.shape() != skip_in.shape()) {
    throw ShapeError("fuse: output " + to_string(mixed.shape()) + " does not match skip " +
                     to_string(skip_in.shape()));
  }
  return add(mixed, skip_in);
}

// Both branches active: features are the (CA, SA) channel concatenation.
template <class T>
Tensor<T> fuse(const ParamStore<T>& p, const std::string& prefix, const Tensor<T>& h_ca, const Tensor<T>& h_sa,
               const Tensor<T>& skip_in) {
  if (h_ca.shape() != h_sa.shape()) {
    throw ShapeError("fuse: branch shapes differ " + to_string(h_ca.shape()) + " vs " + to_string(h_sa.shape()));
  }
  return fuse(p, prefix, concat(h_ca, h_sa, 0), skip_in);
}

template <class T>
Tensor<T> rbam_block(const ParamStore<T>& p, const ModelConfig& cfg, std::size_t b, const Tensor<T>& x) {
  if (x.rank() != 3 || x.extent(0) != cfg.channels) {
    throw ShapeError("rbam_block: expected (" + std::to_string(cfg.channels) + ", H, W), got " +
                     to_string(x.shape()));
  }
  const std::string pre = detail::block_prefix(b);
  const auto same = Padding::same(3);
  auto h_conv = detail::conv(p, pre + "conv2", relu(detail::conv(p, pre + "conv1", x, same)), same);
  if (cfg.use_ca && cfg.use_sa) {
    return fuse(p, pre, ca_branch(p, pre, h_conv, cfg), sa_branch(p, pre, h_conv, cfg), x);
  }
  if (cfg.use_ca) return fuse(p, pre, ca_branch(p, pre, h_conv, cfg), x);
  if (cfg.use_sa) return fuse(p, pre, sa_branch(p, pre, h_conv, cfg), x);
  return fuse(p, pre, h_conv, x);
}

// (C, H, W) -> (1, rH, rW).
template <class T>
Tensor<T> upsample_head(const ParamStore<T>& p, const ModelConfig& cfg, const Tensor<T>& h) {
  if (cfg.scale != 2 && cfg.scale != 4) throw ConfigError("upsample: unsupported scale " + std::to_string(cfg.scale));
  Tensor<T> x = h;
  for (std::size_t s = 0; s < cfg.upsample_stages(); ++s) {
    x = pixel_shuffle(detail::conv(p, "upsample" + std::to_string(s), x, Padding::same(3)), 2);
  }
  return detail::conv(p, "reconstruct", x, Padding{});
}

// lr_image: (1, H, W) -> (1, rH, rW).
template <class T>
Tensor<T> forward(const ParamStore<T>& p, const ModelConfig& cfg, const Tensor<T>& lr_image) {
  cfg.validate();
  if (lr_image.rank() != 3 || lr_image.extent(0) != 1) {
    throw ShapeError("forward: expected a (1, H, W) image, got " + to_string(lr_image.shape()));
  }
  if (cfg.sa_needs_pool() && (lr_image.extent(1) < cfg.sa_pool || lr_image.extent(2) < cfg.sa_pool)) {
    throw ShapeError("forward: input " + to_string(lr_image.shape()) + " must be at least sa_pool (" +
                     std::to_string(cfg.sa_pool) + ") pixels per side when second-order spatial attention is on");
  }
  const auto h0 = detail::conv(p, "head", lr_image, Padding::same(3));
  Tensor<T> h = h0;
  for (std::size_t b = 0; b < cfg.blocks; ++b) h = rbam_block(p, cfg, b, h);
  return upsample_head(p, cfg, add(h, h0));
}

}  // namespace rbam
