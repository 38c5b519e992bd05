#include <gtest/gtest.h>

#include "rbam/synthetic.hpp"

using rbam::synth::Kind;

TEST(Synthetic, DeterministicAndInRange) {
  const auto a = rbam::synth::corpus(rbam::synth::texture_kinds(), 10, 20, 24, 3);
  const auto b = rbam::synth::corpus(rbam::synth::texture_kinds(), 10, 20, 24, 3);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].image, b[i].image);
    EXPECT_EQ(a[i].image.height, 20u);
    EXPECT_EQ(a[i].image.width, 24u);
    for (double v : a[i].image.pixels) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  }
  EXPECT_EQ(a[0].image_id, "checkerboard_000");
  EXPECT_EQ(a[6].kind, Kind::stripes);
}

TEST(Synthetic, CheckerboardAlternates) {
  auto rng = rbam::make_rng(1);
  const auto img = rbam::synth::checkerboard(8, 8, rng, 1, 1);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x + 1 < 8; ++x) EXPECT_NE(img.at(y, x), img.at(y, x + 1));
}

TEST(Synthetic, GradientIsSmooth) {
  auto rng = rbam::make_rng(2);
  const auto img = rbam::synth::gradient(32, 32, rng);
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x + 1 < 32; ++x) EXPECT_LT(std::abs(img.at(y, x) - img.at(y, x + 1)), 0.05);
}
