#pragma once

// Ablation sweep over the attention switches with a shared seed and step
// budget.

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "rbam/gradcheck.hpp"
#include "rbam/train.hpp"

namespace rbam {

// baseline, CA-1st, CA-2nd, CA-both, SA-both, CA+SA-both.
inline std::vector<NamedConfig> ablation_grid(ModelConfig base) {
  std::vector<NamedConfig> out;
  auto with = [&](const char* name, bool ca, bool sa, bool first, bool second) {
    ModelConfig c = base;
    c.use_ca = ca;
    c.use_sa = sa;
    c.use_first_order = first;
    c.use_second_order = second;
    out.push_back({name, c});
  };
  with("baseline", false, false, true, true);
  with("CA-1st", true, false, true, false);
  with("CA-2nd", true, false, false, true);
  with("CA-both", true, false, true, true);
  with("SA-both", false, true, true, true);
  with("CA+SA-both", true, true, true, true);
  return out;
}

struct AblationRow {
  std::string variant;
  ModelConfig config;
  std::size_t parameters = 0;
  std::size_t steps = 0;
  double final_loss = 0.0;  // mean L1 of the last epoch
};

template <class T = float>
std::vector<AblationRow> run_ablation(const ModelConfig& base, const std::vector<GrayImage>& images,
                                      const TrainConfig& cfg, const TrainOptions& options = {}) {
  std::vector<AblationRow> rows;
  for (const auto& v : ablation_grid(base)) {
    Checkpoint<T> ck{v.config, build<T>(v.config, cfg.seed), {}, 0};
    TrainOptions opt = options;
    if (!opt.checkpoint_dir.empty()) opt.checkpoint_dir += "/" + v.name;
    const auto result = train(ck, images, cfg, opt);
    rows.push_back({v.name, v.config, ck.params.parameter_count(), result.step_losses.size(),
                    result.epochs.empty() ? 0.0 : result.epochs.back().mean_l1});
  }
  return rows;
}

inline void write_ablation_table(std::ostream& os, const std::vector<AblationRow>& rows) {
  os << "variant,use_ca,use_sa,first_order,second_order,parameters,steps,final_l1\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.9g", r.final_loss);
    os << r.variant << ',' << r.config.use_ca << ',' << r.config.use_sa << ',' << r.config.use_first_order << ','
       << r.config.use_second_order << ',' << r.parameters << ',' << r.steps << ',' << buf << '\n';
  }
}

}  // namespace rbam
