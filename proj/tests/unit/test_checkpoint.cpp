#include <gtest/gtest.h>

#include <filesystem>

#include "rbam/checkpoint.hpp"
#include "test_util.hpp"

using testutil::to_vector;

namespace {

rbam::ModelConfig small() {
  rbam::ModelConfig c;
  c.blocks = 1;
  c.channels = 4;
  return c;
}

rbam::Checkpoint<float> trained_checkpoint() {
  const auto c = small();
  rbam::Checkpoint<float> ck{c, rbam::build<float>(c, 9), {}, 3};
  const auto x = rbam::Tensor<float>::full({1, 8, 8}, 0.25f);
  const auto y = rbam::Tensor<float>::full({1, 16, 16}, 0.5f);
  for (int i = 0; i < 2; ++i) {
    rbam::l1_loss(rbam::forward(ck.params, c, x), y).backward();
    rbam::adam_step(ck.params, ck.adam, 1e-3);
  }
  return ck;
}

long offset_of(const std::string& bytes) {
  try {
    rbam::decode_checkpoint<float>(bytes);
  } catch (const rbam::FormatError& e) {
    return static_cast<long>(e.offset());
  }
  return -1;
}

}  // namespace

TEST(Checkpoint, RoundTripIsExact) {
  const auto ck = trained_checkpoint();
  const auto bytes = rbam::encode_checkpoint(ck);
  const auto back = rbam::decode_checkpoint<float>(bytes);
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.epochs_completed, 3u);
  EXPECT_EQ(back.adam, ck.adam);
  ASSERT_EQ(back.params.size(), ck.params.size());
  for (const auto& e : ck.params) {
    const auto a = back.params[e.name].data(), b = e.tensor.data();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end())) << e.name;
  }
  EXPECT_EQ(rbam::encode_checkpoint(back), bytes);
}

TEST(Checkpoint, ForwardIsBitIdenticalAfterReload) {
  const auto ck = trained_checkpoint();
  const auto path = std::filesystem::temp_directory_path() / "rbam_ck_test.rbam";
  rbam::save_checkpoint(path.string(), ck);
  const auto back = rbam::load_checkpoint<float>(path.string());
  std::filesystem::remove(path);
  auto rng = rbam::make_rng(1);
  std::vector<float> v(10 * 12);
  for (auto& x : v) x = static_cast<float>(rbam::uniform01(rng));
  const rbam::Tensor<float> x({1, 10, 12}, v);
  rbam::NoGradGuard g;
  const auto a = rbam::forward(ck.params, ck.config, x);
  const auto b = rbam::forward(back.params, back.config, x);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(Checkpoint, DoubleToFloatConversion) {
  const auto c = small();
  rbam::Checkpoint<double> ck{c, rbam::build<double>(c, 2), {}, 0};
  const auto back = rbam::decode_checkpoint<float>(rbam::encode_checkpoint(ck));
  EXPECT_EQ(back.params["head.weight"].data()[0], static_cast<float>(ck.params["head.weight"].data()[0]));
}

TEST(Checkpoint, CorruptionIsReportedWithOffset) {
  const auto bytes = rbam::encode_checkpoint(trained_checkpoint());
  EXPECT_EQ(offset_of("XBAM" + bytes.substr(4)), 0);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_EQ(offset_of(bad_version), 4);
  EXPECT_GT(offset_of(bytes.substr(0, bytes.size() - 3)), 0);
  EXPECT_GT(offset_of(bytes + "x"), 0);
  auto bad_scale = bytes;
  bad_scale[16] = 3;  // config.scale
  EXPECT_GT(offset_of(bad_scale), 0);
}

TEST(Checkpoint, ParameterSetMustMatchConfig) {
  auto ck = trained_checkpoint();
  ck.config.use_sa = false;  // params still hold the SA tensors
  EXPECT_THROW(rbam::decode_checkpoint<float>(rbam::encode_checkpoint(ck)), rbam::FormatError);
}
