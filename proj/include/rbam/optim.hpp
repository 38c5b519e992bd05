#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rbam/errors.hpp"
#include "rbam/rbam_net.hpp"
#include "rbam/tensor.hpp"

namespace rbam {

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t patch_size = 48;  // LR patch side
  double lr0 = 1e-4;
  std::size_t lr_halve_every = 50;
  std::size_t epochs = 300;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t scale = 2;
  std::size_t checkpoint_every = 10;
  std::size_t steps_per_epoch = 0;  // 0: derived from the training set size

  bool operator==(const TrainConfig&) const = default;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (patch_size < 1) throw ConfigError("patch_size must be >= 1");
    if (scale != 2 && scale != 4) throw ConfigError("scale must be 2 or 4");
    if (patch_size % scale != 0) throw ConfigError("patch_size must be divisible by scale");
    if (lr_halve_every < 1) throw ConfigError("lr_halve_every must be >= 1");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
    if (!(lr0 >= 0.0)) throw ConfigError("lr0 must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  }
};

// lr0 * 0.5^floor(epoch / lr_halve_every).
inline double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.lr0 * std::ldexp(1.0, -static_cast<int>(epoch / cfg.lr_halve_every));
}

// Mean absolute difference. The subgradient at zero difference is zero.
template <class T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("l1_loss: shapes differ " + to_string(pred.shape()) + " vs " + to_string(target.shape()));
  }
  const auto p = pred.data();
  const auto t = target.data();
  T total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) total += std::abs(p[i] - t[i]);
  const T inv_n = T(1) / static_cast<T>(p.size());
  return detail::make_result<T>("l1_loss", {}, {total * inv_n}, {&pred, &target}, [inv_n](Node<T>& self) {
    const auto& p = self.inputs[0]->value;
    const auto& t = self.inputs[1]->value;
    T* gp = detail::input_grad(self, 0);
    T* gt = detail::input_grad(self, 1);
    const T g = self.grad[0] * inv_n;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const T d = p[i] - t[i];
      const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
      if (gp) gp[i] += g * s;
      if (gt) gt[i] -= g * s;
    }
  });
}

template <class T>
struct AdamState {
  std::vector<std::vector<T>> first_moment;   // parallel to ParamStore order
  std::vector<std::vector<T>> second_moment;
  std::uint64_t step = 0;

  bool operator==(const AdamState&) const = default;

  static AdamState for_params(const ParamStore<T>& params) {
    AdamState s;
    for (const auto& e : params) {
      s.first_moment.emplace_back(e.tensor.numel(), T(0));
      s.second_moment.emplace_back(e.tensor.numel(), T(0));
    }
    return s;
  }
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update in parameter order; gradients are cleared afterwards.
template <class T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, double lr, const AdamHyper& hyper = {}) {
  if (state.first_moment.size() != params.size()) {
    state = AdamState<T>::for_params(params);
  }
  std::size_t i = 0;
  for (auto& e : params) {
    if (!e.tensor.has_grad()) throw StateError("adam_step: parameter '" + e.name + "' has no gradient");
    if (state.first_moment[i].size() != e.tensor.numel()) {
      throw StateError("adam_step: optimizer state does not match parameter '" + e.name + "'");
    }
    ++i;
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(hyper.beta1), b2 = static_cast<T>(hyper.beta2);
  i = 0;
  for (auto& e : params) {
    auto value = e.tensor.mutable_data();
    const auto grad = e.tensor.grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t k = 0; k < value.size(); ++k) {
      const T g = grad[k];
      m[k] = b1 * m[k] + (T(1) - b1) * g;
      v[k] = b2 * v[k] + (T(1) - b2) * g * g;
      const double m_hat = static_cast<double>(m[k]) / bc1;
      const double v_hat = static_cast<double>(v[k]) / bc2;
      value[k] = static_cast<T>(static_cast<double>(value[k]) - lr * m_hat / (std::sqrt(v_hat) + hyper.eps));
    }
    e.tensor.zero_grad();
    ++i;
  }
}

}  // namespace rbam
