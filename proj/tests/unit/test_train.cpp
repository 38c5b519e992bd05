#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rbam/synthetic.hpp"
#include "rbam/train.hpp"

namespace fs = std::filesystem;

namespace {

rbam::ModelConfig tiny_model() {
  rbam::ModelConfig c;
  c.blocks = 1;
  c.channels = 4;
  return c;
}

rbam::TrainConfig tiny_train() {
  rbam::TrainConfig t;
  t.batch_size = 2;
  t.patch_size = 8;
  t.epochs = 3;
  t.steps_per_epoch = 2;
  t.checkpoint_every = 2;
  t.lr0 = 1e-3;
  t.seed = 5;
  return t;
}

std::vector<rbam::GrayImage> images() {
  std::vector<rbam::GrayImage> out;
  for (auto& s : rbam::synth::corpus(rbam::synth::texture_kinds(), 3, 24, 20, 1)) out.push_back(s.image);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove_all(path); }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST(StepsPerEpoch, CeilOfPixelCoverage) {
  rbam::TrainConfig cfg;
  std::vector<rbam::GrayImage> imgs(3, rbam::GrayImage(200, 300));
  // 180000 pixels / (16 * 96 * 96) = 1.22 -> 2
  EXPECT_EQ(rbam::steps_per_epoch(imgs, cfg), 2u);
  cfg.steps_per_epoch = 7;
  EXPECT_EQ(rbam::steps_per_epoch(imgs, cfg), 7u);
}

TEST(SampleBatch, PairsAreAlignedAndSized) {
  auto cfg = tiny_train();
  auto rng = rbam::epoch_rng(cfg.seed, 0);
  const auto batch = rbam::sample_batch(images(), cfg, rng);
  ASSERT_EQ(batch.size(), cfg.batch_size);
  for (const auto& p : batch) {
    EXPECT_EQ(p.lr.height, 8u);
    EXPECT_EQ(p.hr.height, 16u);
  }
}

TEST(Train, ZeroModelFirstLossIsMeanHr) {
  auto model = tiny_model();
  rbam::Checkpoint<double> ck{model, rbam::build<double>(model, 0), {}, 0};
  for (auto& e : ck.params)
    for (auto& v : e.tensor.mutable_data()) v = 0.0;
  auto cfg = tiny_train();
  cfg.epochs = 1;
  cfg.steps_per_epoch = 1;
  auto rng = rbam::epoch_rng(cfg.seed, 0);
  const auto batch = rbam::sample_batch(images(), cfg, rng);
  double expected = 0.0;
  for (const auto& p : batch) {
    double s = 0.0;
    for (double v : p.hr.pixels) s += v;
    expected += s / static_cast<double>(p.hr.pixels.size());
  }
  expected /= static_cast<double>(batch.size());
  const auto result = rbam::train(ck, images(), cfg);
  EXPECT_NEAR(result.step_losses.at(0), expected, 1e-12);
}

TEST(Train, IdenticalSeedsGiveIdenticalRuns) {
  TempDir a("rbam_train_a"), b("rbam_train_b");
  auto model = tiny_model();
  auto cfg = tiny_train();
  rbam::Checkpoint<float> ca{model, rbam::build<float>(model, cfg.seed), {}, 0};
  rbam::Checkpoint<float> cb{model, rbam::build<float>(model, cfg.seed), {}, 0};
  const auto ra = rbam::train(ca, images(), cfg, {a.path.string(), {}, {}});
  const auto rb = rbam::train(cb, images(), cfg, {b.path.string(), {}, {}});
  EXPECT_EQ(ra.step_losses, rb.step_losses);
  ASSERT_EQ(ra.checkpoints.size(), 2u);  // epochs 2 and 3
  for (const auto* name : {"epoch_0002.rbam", "epoch_0003.rbam"}) {
    EXPECT_EQ(slurp(a.path / name), slurp(b.path / name)) << name;
  }
}

TEST(Train, ResumeContinuesExactly) {
  TempDir full("rbam_train_full"), part("rbam_train_part");
  auto model = tiny_model();
  auto cfg = tiny_train();
  rbam::Checkpoint<float> ck{model, rbam::build<float>(model, cfg.seed), {}, 0};
  const auto uninterrupted = rbam::train(ck, images(), cfg, {full.path.string(), {}, {}});

  rbam::Checkpoint<float> first{model, rbam::build<float>(model, cfg.seed), {}, 0};
  auto short_cfg = cfg;
  short_cfg.epochs = 2;
  const auto head = rbam::train(first, images(), short_cfg, {part.path.string(), {}, {}});
  auto resumed = rbam::load_checkpoint<float>((part.path / "epoch_0002.rbam").string());
  EXPECT_EQ(resumed.epochs_completed, 2u);
  const auto tail = rbam::train(resumed, images(), cfg, {part.path.string(), {}, {}});

  auto joined = head.step_losses;
  joined.insert(joined.end(), tail.step_losses.begin(), tail.step_losses.end());
  EXPECT_EQ(joined, uninterrupted.step_losses);
  EXPECT_EQ(slurp(full.path / "epoch_0003.rbam"), slurp(part.path / "epoch_0003.rbam"));
}

TEST(Train, LogHasHeaderOnceAndOneLinePerEpoch) {
  TempDir dir("rbam_train_log");
  auto model = tiny_model();
  auto cfg = tiny_train();
  rbam::Checkpoint<float> ck{model, rbam::build<float>(model, cfg.seed), {}, 0};
  rbam::train(ck, images(), cfg, {dir.path.string(), {}, {}});
  std::ifstream in(dir.path / "train_log.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, rbam::kTrainLogHeader);
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.rfind(std::to_string(rows) + ",", 0), 0u) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 3);
}

TEST(Train, LearningRateFollowsSchedule) {
  auto model = tiny_model();
  auto cfg = tiny_train();
  cfg.lr_halve_every = 2;
  cfg.epochs = 4;
  cfg.steps_per_epoch = 1;
  rbam::Checkpoint<float> ck{model, rbam::build<float>(model, 0), {}, 0};
  const auto r = rbam::train(ck, images(), cfg);
  ASSERT_EQ(r.epochs.size(), 4u);
  EXPECT_EQ(r.epochs[1].lr, 1e-3);
  EXPECT_EQ(r.epochs[2].lr, 5e-4);
}

TEST(Train, UndersizedImagesAreSkippedWithWarning) {
  auto model = tiny_model();
  auto cfg = tiny_train();
  cfg.epochs = 1;
  auto imgs = images();
  imgs.emplace_back(10, 10);
  std::vector<std::string> warnings;
  rbam::Checkpoint<float> ck{model, rbam::build<float>(model, 0), {}, 0};
  rbam::train(ck, imgs, cfg, {"", [&](const std::string& w) { warnings.push_back(w); }, {}});
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("image 3"), std::string::npos);
  rbam::Checkpoint<float> ck2{model, rbam::build<float>(model, 0), {}, 0};
  EXPECT_THROW(rbam::train(ck2, {rbam::GrayImage(10, 10)}, cfg), rbam::ContractError);
}
