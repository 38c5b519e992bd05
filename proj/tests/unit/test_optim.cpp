#include <gtest/gtest.h>

#include <cmath>

#include "rbam/optim.hpp"
#include "test_util.hpp"

using T = rbam::Tensor<double>;
using testutil::to_vector;

TEST(LrSchedule, HalvesEveryFiftyEpochs) {
  rbam::TrainConfig cfg;
  EXPECT_EQ(rbam::lr_schedule(0, cfg), 1e-4);
  EXPECT_EQ(rbam::lr_schedule(49, cfg), 1e-4);
  EXPECT_EQ(rbam::lr_schedule(50, cfg), 5e-5);
  EXPECT_EQ(rbam::lr_schedule(100, cfg), 2.5e-5);
  EXPECT_EQ(rbam::lr_schedule(299, cfg), 1e-4 / 32.0);
}

TEST(TrainConfig, DefaultsAndValidation) {
  rbam::TrainConfig cfg;
  EXPECT_EQ(cfg.batch_size, 16u);
  EXPECT_EQ(cfg.patch_size, 48u);
  EXPECT_EQ(cfg.epochs, 300u);
  EXPECT_NO_THROW(cfg.validate());
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), rbam::ConfigError);
  cfg = {};
  cfg.patch_size = 47;
  EXPECT_THROW(cfg.validate(), rbam::ConfigError);
}

TEST(L1Loss, ValueAndSubgradient) {
  T p({4}, {0.5, 0.2, 0.3, 0.9}, true);
  T t({4}, {0.0, 0.2, 0.5, 1.0});
  auto loss = rbam::l1_loss(p, t);
  EXPECT_DOUBLE_EQ(loss.item(), (0.5 + 0.0 + 0.2 + 0.1) / 4.0);
  loss.backward();
  EXPECT_EQ(to_vector(p.grad()), (std::vector<double>{0.25, 0.0, -0.25, -0.25}));
  EXPECT_THROW(rbam::l1_loss(T::zeros({2}), T::zeros({3})), rbam::ShapeError);
}

TEST(L1Loss, GradientMatchesFiniteDifferencesOffTheKink) {
  auto rng = rbam::make_rng(8);
  auto p = testutil::random_tensor(rng, {3, 4});
  auto t = testutil::random_tensor(rng, {3, 4}, false);
  rbam::l1_loss(p, t).backward();
  auto f = [&](const std::vector<double>& v) { return rbam::l1_loss(T({3, 4}, v), t).item(); };
  EXPECT_LT(oracle::rel_error(to_vector(p.grad()), oracle::finite_difference(f, to_vector(p.data()))), 1e-8);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  rbam::ParamStore<double> params;
  params.add("w", T({3}, {1.0, -2.0, 0.5}));
  params["w"].mutable_grad()[0] = 0.3;
  params["w"].mutable_grad()[1] = -4.0;
  params["w"].mutable_grad()[2] = 0.0;
  rbam::AdamState<double> state;
  rbam::adam_step(params, state, 0.1);
  const auto w = to_vector(params["w"].data());
  EXPECT_NEAR(w[0], 1.0 - 0.1 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(w[1], -2.0 + 0.1 * 4.0 / (4.0 + 1e-8), 1e-15);
  EXPECT_EQ(w[2], 0.5);
  EXPECT_EQ(state.step, 1u);
  EXPECT_FALSE(params["w"].has_grad());
}

TEST(Adam, MatchesHandRolledRecurrence) {
  rbam::ParamStore<double> params;
  params.add("w", T({1}, {2.0}));
  rbam::AdamState<double> state;
  double w = 2.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 5; ++t) {
    const double g = 2.0 * w;  // d/dw w^2
    rbam::sum(params["w"] * params["w"]).backward();
    rbam::adam_step(params, state, 0.05);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
    w -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(params["w"].data()[0], w, 1e-14) << t;
  }
}

TEST(Adam, MissingGradientIsAnError) {
  rbam::ParamStore<double> params;
  params.add("a", T({1}, {1.0}));
  params.add("b", T({1}, {1.0}));
  params["a"].mutable_grad()[0] = 1.0;
  rbam::AdamState<double> state;
  EXPECT_THROW(rbam::adam_step(params, state, 0.1), rbam::StateError);
  EXPECT_EQ(params["a"].data()[0], 1.0);
}
