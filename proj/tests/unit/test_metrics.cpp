#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rbam/metrics.hpp"
#include "test_util.hpp"

using rbam::GrayImage;

namespace {

GrayImage random_image(rbam::Rng& rng, std::size_t h, std::size_t w) {
  return GrayImage(h, w, testutil::random_values(rng, h * w, 0.0, 1.0));
}

}  // namespace

TEST(Psnr, UniformOneLevelDifference) {
  const GrayImage a(16, 16, 0.5), b(16, 16, 0.5 + 1.0 / 255.0);
  EXPECT_NEAR(rbam::psnr(a, b), 20.0 * std::log10(255.0), 1e-6);
}

TEST(Psnr, IdenticalImagesGiveInfinity) {
  const GrayImage a(4, 4, 0.3);
  EXPECT_TRUE(std::isinf(rbam::psnr(a, a)));
  EXPECT_THROW(rbam::psnr(a, GrayImage(4, 5)), rbam::ShapeError);
}

TEST(Psnr, MatchesOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto rng = rbam::make_rng(seed, 0xD0);
    const auto a = random_image(rng, 9, 13), b = random_image(rng, 9, 13);
    EXPECT_NEAR(rbam::psnr(a, b), oracle::psnr(a.pixels, b.pixels), 1e-12);
  }
}

TEST(Ssim, SelfSimilarityIsExactlyOne) {
  auto rng = rbam::make_rng(1);
  const auto a = random_image(rng, 20, 17);
  EXPECT_EQ(rbam::ssim(a, a), 1.0);
  const GrayImage flat(11, 11, 0.4);
  EXPECT_EQ(rbam::ssim(flat, flat), 1.0);
}

TEST(Ssim, MatchesWindowedOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto rng = rbam::make_rng(seed, 0xD1);
    const std::size_t h = 11 + seed % 7, w = 12 + seed % 5;
    const auto a = random_image(rng, h, w);
    auto b = a;
    for (auto& v : b.pixels) v = std::clamp(v + rbam::uniform(rng, -0.2, 0.2), 0.0, 1.0);
    EXPECT_NEAR(rbam::ssim(a, b), oracle::ssim(a.pixels, b.pixels, h, w), 1e-8);
  }
}

TEST(Ssim, SmallImagesRejected) {
  EXPECT_THROW(rbam::ssim(GrayImage(10, 20), GrayImage(10, 20)), rbam::ContractError);
}

TEST(MeanSem, HandComputed) {
  // mean 5, population variance ((9+1+1+9)/4) = 5, sem = sqrt(5)/2
  const auto s = rbam::mean_and_sem({2, 4, 6, 8});
  EXPECT_DOUBLE_EQ(s.mean, 5.0);
  EXPECT_DOUBLE_EQ(s.sem, std::sqrt(5.0) / 2.0);
  EXPECT_EQ(s.count, 4u);
}

TEST(MeanSem, InfiniteValuesExcluded) {
  const auto s = rbam::mean_and_sem({1.0, rbam::kInfinitePsnr, 3.0});
  EXPECT_EQ(s.count, 2u);
  EXPECT_EQ(s.excluded, 1u);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.sem, 1.0 / std::sqrt(2.0));
}

TEST(Evaluate, BicubicBaselineMatchesPerImageOracle) {
  std::vector<rbam::EvalItem> items;
  for (std::uint64_t i = 0; i < 4; ++i) {
    auto rng = rbam::make_rng(i, 0xD2);
    items.push_back({"img" + std::to_string(i), random_image(rng, 24, 28)});
  }
  const auto report = rbam::evaluate(rbam::bicubic_upscaler(2), items, 2);
  ASSERT_EQ(report.images.size(), 4u);
  std::vector<double> expected;
  for (const auto& it : items) {
    const auto lr = oracle::bicubic(it.hr.pixels, 24, 28, 12, 14);
    const auto sr = oracle::bicubic(lr, 12, 14, 24, 28);
    expected.push_back(oracle::psnr(sr, it.hr.pixels));
  }
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(report.images[i].psnr_db, expected[i], 1e-9);
  const auto ms = rbam::mean_and_sem(expected);
  EXPECT_NEAR(report.psnr_mean, ms.mean, 1e-9);
}

TEST(Evaluate, ConstantImageGivesInfinityWithWarning) {
  const std::vector<rbam::EvalItem> items = {{"flat", GrayImage(16, 16, 0.25)}};
  const auto report = rbam::evaluate(rbam::bicubic_upscaler(2), items, 2);
  EXPECT_TRUE(std::isinf(report.images.at(0).psnr_db));
  EXPECT_EQ(report.warnings.size(), 1u);
}

TEST(Evaluate, SkipsIndivisibleAndReportsEmpty) {
  const std::vector<rbam::EvalItem> items = {{"odd", GrayImage(15, 16, 0.25)}};
  const auto report = rbam::evaluate(rbam::bicubic_upscaler(2), items, 2);
  EXPECT_TRUE(report.images.empty());
  EXPECT_EQ(report.warnings.size(), 1u);
  std::ostringstream os;
  rbam::write_report(os, report);
  EXPECT_EQ(os.str().substr(0, 30), "image_id,psnr_db,ssim,seconds\n");
}

TEST(Report, Format) {
  rbam::MetricReport r;
  r.images.push_back({"a", 30.0, 0.9, 0.5});
  r.images.push_back({"b", 32.0, 0.8, 0.25});
  rbam::finalize_report(r);
  std::ostringstream os;
  rbam::write_report(os, r);
  EXPECT_EQ(os.str(),
            "image_id,psnr_db,ssim,seconds\n"
            "a,30.000000,0.900000,0.500000\n"
            "b,32.000000,0.800000,0.250000\n"
            "mean±sem,31.000000±0.707107,0.850000,0.375000\n");
}
