#pragma once

// Patch-based training: seeded HR crops, on-the-fly bicubic LR synthesis,
// dihedral augmentation, L1 loss and Adam with step-halved learning rate.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "rbam/checkpoint.hpp"
#include "rbam/image.hpp"
#include "rbam/optim.hpp"
#include "rbam/random.hpp"
#include "rbam/rbam_net.hpp"

namespace rbam {

struct EpochRecord {
  std::size_t epoch = 0;  // zero-based, the value fed to lr_schedule
  double lr = 0.0;
  double mean_l1 = 0.0;
  double wallclock_s = 0.0;
};

inline std::string format_log_line(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.3f", r.epoch, r.lr, r.mean_l1, r.wallclock_s);
  return buf;
}

inline constexpr const char* kTrainLogHeader = "epoch,lr,mean_l1,wallclock_s";

struct TrainOptions {
  std::string checkpoint_dir;  // empty: no checkpoints or log file
  std::function<void(const std::string&)> warn;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;
  std::vector<std::string> checkpoints;
};

// ceil(total HR pixels / (batch_size * (r * patch)^2)) unless
// cfg.steps_per_epoch is set.
inline std::size_t steps_per_epoch(const std::vector<GrayImage>& images, const TrainConfig& cfg) {
  if (cfg.steps_per_epoch > 0) return cfg.steps_per_epoch;
  std::size_t pixels = 0;
  for (const auto& img : images) pixels += img.height * img.width;
  const std::size_t hr_side = cfg.scale * cfg.patch_size;
  const std::size_t per_batch = cfg.batch_size * hr_side * hr_side;
  return std::max<std::size_t>(1, (pixels + per_batch - 1) / per_batch);
}

inline Rng epoch_rng(std::uint64_t seed, std::size_t epoch) { return make_rng(seed, 0x7A11 + epoch); }

// One batch: image chosen uniformly with replacement, uniform crop of side
// r*patch, bicubic downsample by r, then a shared dihedral transform.
inline std::vector<PatchPair> sample_batch(const std::vector<GrayImage>& images, const TrainConfig& cfg, Rng& rng) {
  const std::size_t hr_side = cfg.scale * cfg.patch_size;
  std::vector<PatchPair> batch;
  batch.reserve(cfg.batch_size);
  for (std::size_t i = 0; i < cfg.batch_size; ++i) {
    const auto& img = images[uniform_index(rng, images.size())];
    const std::size_t top = uniform_index(rng, img.height - hr_side + 1);
    const std::size_t left = uniform_index(rng, img.width - hr_side + 1);
    PatchPair pair;
    pair.hr = extract_patch(img, top, left, hr_side);
    pair.lr = downsample(pair.hr, cfg.scale);
    batch.push_back(augment(pair, rng));
  }
  return batch;
}

// Forward, L1 and backward for every pair; returns the batch-mean loss.
// Gradients accumulate in params in batch order.
template <class T>
double accumulate_batch_gradients(ParamStore<T>& params, const ModelConfig& model, const std::vector<PatchPair>& batch) {
  double total = 0.0;
  const T weight = T(1) / static_cast<T>(batch.size());
  for (const auto& pair : batch) {
    auto pred = forward(params, model, to_tensor<T>(pair.lr));
    auto loss = l1_loss(pred, to_tensor<T>(pair.hr));
    total += static_cast<double>(loss.item());
    scale(loss, weight).backward();
  }
  return total / static_cast<double>(batch.size());
}

template <class T>
double train_step(ParamStore<T>& params, AdamState<T>& adam, const ModelConfig& model,
                  const std::vector<PatchPair>& batch, double lr, const AdamHyper& hyper) {
  const double loss = accumulate_batch_gradients(params, model, batch);
  adam_step(params, adam, lr, hyper);
  return loss;
}

inline std::string checkpoint_name(std::uint64_t epochs_completed) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04llu.rbam", static_cast<unsigned long long>(epochs_completed));
  return buf;
}

// Trains from ck.epochs_completed up to cfg.epochs. Each epoch draws from an
// RNG stream keyed by (seed, epoch), so a resumed run repeats the
// uninterrupted run exactly.
template <class T>
TrainResult train(Checkpoint<T>& ck, const std::vector<GrayImage>& images, const TrainConfig& cfg,
                  const TrainOptions& options = {}) {
  cfg.validate();
  ck.config.validate();
  if (ck.config.scale != cfg.scale) throw ConfigError("model scale and training scale differ");
  const std::size_t hr_side = cfg.scale * cfg.patch_size;
  std::vector<GrayImage> usable;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].height < hr_side || images[i].width < hr_side) {
      if (options.warn) {
        options.warn("skipping training image " + std::to_string(i) + ": smaller than " + std::to_string(hr_side) +
                     " pixels per side");
      }
      continue;
    }
    usable.push_back(images[i]);
  }
  if (usable.empty()) throw ContractError("no training image is large enough for the configured patch size");
  if (ck.adam.first_moment.size() != ck.params.size()) ck.adam = AdamState<T>::for_params(ck.params);

  const AdamHyper hyper{cfg.beta1, cfg.beta2, cfg.eps};
  const std::size_t steps = steps_per_epoch(usable, cfg);
  TrainResult result;
  std::ofstream log;
  if (!options.checkpoint_dir.empty()) {
    std::filesystem::create_directories(options.checkpoint_dir);
    const auto log_path = std::filesystem::path(options.checkpoint_dir) / "train_log.csv";
    const bool fresh = !std::filesystem::exists(log_path);
    log.open(log_path, std::ios::app);
    if (fresh) log << kTrainLogHeader << '\n';
  }

  const auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = ck.epochs_completed; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    Rng rng = epoch_rng(cfg.seed, epoch);
    double sum = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      const auto batch = sample_batch(usable, cfg, rng);
      const double loss = train_step(ck.params, ck.adam, ck.config, batch, lr, hyper);
      result.step_losses.push_back(loss);
      sum += loss;
    }
    ck.epochs_completed = epoch + 1;
    EpochRecord rec{epoch, lr, sum / static_cast<double>(steps),
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    result.epochs.push_back(rec);
    if (log.is_open()) log << format_log_line(rec) << std::endl;
    if (options.on_epoch) options.on_epoch(rec);
    if (!options.checkpoint_dir.empty() &&
        (ck.epochs_completed % cfg.checkpoint_every == 0 || ck.epochs_completed == cfg.epochs)) {
      const auto path = (std::filesystem::path(options.checkpoint_dir) / checkpoint_name(ck.epochs_completed)).string();
      save_checkpoint(path, ck);
      result.checkpoints.push_back(path);
    }
  }
  return result;
}

}  // namespace rbam
