#pragma once

// End-to-end finite-difference check of the network gradients, one result
// per parameter tensor.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rbam/optim.hpp"
#include "rbam/random.hpp"
#include "rbam/rbam_net.hpp"

namespace rbam {

struct GradcheckOptions {
  std::size_t height = 8;
  std::size_t width = 8;
  double step = 1e-6;
  double tolerance = 1e-5;
  std::uint64_t seed = 0;
};

struct GroupError {
  std::string name;
  std::size_t count = 0;
  double rel_error = 0.0;
  double analytic_norm = 0.0;
};

struct GradcheckResult {
  std::vector<GroupError> groups;

  const GroupError& worst() const {
    return *std::max_element(groups.begin(), groups.end(),
                             [](const GroupError& a, const GroupError& b) { return a.rel_error < b.rel_error; });
  }
  bool passed(double tolerance) const {
    for (const auto& g : groups)
      if (!(g.rel_error < tolerance)) return false;
    return true;
  }
};

// ||a - n|| / max(||a||, ||n||); absolute difference when both are tiny.
inline double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nn));
  if (scale < 1e-10) return std::sqrt(diff);
  return std::sqrt(diff) / scale;
}

// L1 loss of the forward pass against a target that sits a random, bounded
// distance away from the initial prediction, so no output difference lies
// near the kink of |.|.
inline GradcheckResult gradcheck(const ModelConfig& cfg, const GradcheckOptions& opt = {}) {
  cfg.validate();
  auto params = build<double>(cfg, opt.seed);
  Rng rng = make_rng(opt.seed, 0x6C4E);
  std::vector<double> input(opt.height * opt.width);
  for (auto& v : input) v = uniform(rng, 0.0, 1.0);
  const Tensor<double> x({1, opt.height, opt.width}, input);

  Tensor<double> target;
  {
    NoGradGuard no_grad;
    const auto pred = forward(params, cfg, x);
    std::vector<double> t(pred.numel());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double offset = uniform(rng, 0.05, 0.5);
      t[i] = pred.data()[i] + (uniform01(rng) < 0.5 ? -offset : offset);
    }
    target = Tensor<double>(pred.shape(), std::move(t));
  }

  auto loss_value = [&]() {
    NoGradGuard no_grad;
    return l1_loss(forward(params, cfg, x), target).item();
  };

  params.zero_grad();
  l1_loss(forward(params, cfg, x), target).backward();

  GradcheckResult result;
  for (auto& e : params) {
    std::vector<double> analytic(e.tensor.numel(), 0.0);
    if (e.tensor.has_grad()) {
      const auto g = e.tensor.grad();
      analytic.assign(g.begin(), g.end());
    }
    std::vector<double> numeric(analytic.size());
    auto values = e.tensor.mutable_data();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + opt.step;
      const double up = loss_value();
      values[k] = saved - opt.step;
      const double down = loss_value();
      values[k] = saved;
      numeric[k] = (up - down) / (2.0 * opt.step);
    }
    double norm = 0.0;
    for (double a : analytic) norm += a * a;
    result.groups.push_back({e.name, analytic.size(), relative_error(analytic, numeric), std::sqrt(norm)});
  }
  return result;
}

struct NamedConfig {
  std::string name;
  ModelConfig config;
};

// The attention corners {CA, SA} x {1st, 2nd}, plus the full model and the
// attention-free baseline.
inline std::vector<NamedConfig> gradcheck_corners(ModelConfig base) {
  std::vector<NamedConfig> out;
  auto with = [&](const char* name, bool ca, bool sa, bool first, bool second) {
    ModelConfig c = base;
    c.use_ca = ca;
    c.use_sa = sa;
    c.use_first_order = first;
    c.use_second_order = second;
    out.push_back({name, c});
  };
  with("full", true, true, true, true);
  with("ca-1st", true, false, true, false);
  with("ca-2nd", true, false, false, true);
  with("sa-1st", false, true, true, false);
  with("sa-2nd", false, true, false, true);
  with("baseline", false, false, true, true);
  return out;
}

}  // namespace rbam
