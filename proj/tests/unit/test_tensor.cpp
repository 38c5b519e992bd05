#include <gtest/gtest.h>

#include "rbam/tensor.hpp"
#include "test_util.hpp"

using rbam::Tensor;
using T = Tensor<double>;

TEST(Tensor, RejectsMismatchedValueCount) {
  EXPECT_THROW(T({2, 3}, std::vector<double>(5)), rbam::ShapeError);
  EXPECT_THROW(T({2, 0}, {}), rbam::ShapeError);
}

TEST(Tensor, RowMajorIndexing) {
  T t({2, 3}, {0, 1, 2, 3, 4, 5});
  EXPECT_EQ(t.at({1, 2}), 5.0);
  EXPECT_EQ(t.at({0, 1}), 1.0);
  EXPECT_THROW(t.at({2, 0}), rbam::ShapeError);
}

TEST(Tensor, ElementwiseValues) {
  T a({2}, {2, 3}), b({2}, {4, 5});
  EXPECT_EQ(testutil::to_vector(mul(a, b).data()), (std::vector<double>{8, 15}));
  EXPECT_EQ(testutil::to_vector(relu(T({3}, {-1, 0, 2})).data()), (std::vector<double>{0, 0, 2}));
  EXPECT_EQ(sigmoid(T::scalar(0.0)).item(), 0.5);
}

TEST(Tensor, BroadcastAdd) {
  T a({2, 3}, {1, 2, 3, 4, 5, 6}), b({3}, {10, 20, 30});
  EXPECT_EQ(testutil::to_vector((a + b).data()), (std::vector<double>{11, 22, 33, 14, 25, 36}));
  EXPECT_THROW(a + T({2}, {1, 2}), rbam::ShapeError);
}

TEST(Tensor, MulGradientIsOtherOperand) {
  T a({2}, {2, 3}, true), b({2}, {4, 5}, true);
  sum(mul(a, b)).backward();
  EXPECT_EQ(testutil::to_vector(a.grad()), (std::vector<double>{4, 5}));
  EXPECT_EQ(testutil::to_vector(b.grad()), (std::vector<double>{2, 3}));
}

TEST(Tensor, ReluGradientAtZeroIsZero) {
  T a({3}, {-1, 0, 2}, true);
  sum(relu(a)).backward();
  EXPECT_EQ(testutil::to_vector(a.grad()), (std::vector<double>{0, 0, 1}));
}

TEST(Tensor, GradientsAccumulateAcrossUses) {
  T a({1}, {3}, true);
  sum(a * a + a).backward();
  EXPECT_DOUBLE_EQ(a.grad()[0], 7.0);
}

TEST(Tensor, ReshapePreservesScanOrder) {
  T a({2, 2, 3}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  auto r = reshape(a, {2, 6});
  EXPECT_EQ(testutil::to_vector(r.data()), testutil::to_vector(a.data()));
  EXPECT_THROW(reshape(a, {5}), rbam::ShapeError);
}

TEST(Tensor, PermuteAndTranspose) {
  T a({2, 3}, {0, 1, 2, 3, 4, 5});
  EXPECT_EQ(testutil::to_vector(transpose(a).data()), (std::vector<double>{0, 3, 1, 4, 2, 5}));
  T b({2, 1, 3}, {0, 1, 2, 3, 4, 5});
  auto p = permute(b, {2, 0, 1});
  EXPECT_EQ(p.shape(), (rbam::Shape{3, 2, 1}));
  EXPECT_EQ(p.at({2, 1, 0}), 5.0);
}

TEST(Tensor, ConcatAlongAxes) {
  T a({1, 2}, {1, 2}), b({1, 2}, {3, 4});
  EXPECT_EQ(testutil::to_vector(concat(a, b, 0).data()), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(testutil::to_vector(concat(a, b, 1).data()), (std::vector<double>{1, 2, 3, 4}));
  T c({2, 1}, {1, 2}), d({2, 1}, {3, 4});
  EXPECT_EQ(testutil::to_vector(concat(c, d, 1).data()), (std::vector<double>{1, 3, 2, 4}));
}

TEST(Tensor, MatmulMatchesLoop) {
  auto rng = rbam::make_rng(1);
  auto a = testutil::random_tensor(rng, {3, 4});
  auto b = testutil::random_tensor(rng, {4, 2});
  auto c = matmul(a, b);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += a.at({i, k}) * b.at({k, j});
      EXPECT_NEAR(c.at({i, j}), s, 1e-14);
    }
  EXPECT_THROW(matmul(a, a), rbam::ShapeError);
}

struct OpCase {
  const char* name;
  std::vector<rbam::Shape> shapes;
  std::function<T(const std::vector<T>&)> op;
};

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const auto& c = GetParam();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto rng = rbam::make_rng(seed, 17);
    std::vector<T> inputs;
    for (const auto& s : c.shapes) inputs.push_back(testutil::random_tensor(rng, s));
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      EXPECT_LT(testutil::gradient_error(c.op, inputs, i, rng), 1e-6) << c.name << " input " << i << " seed " << seed;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(
    Ops, OpGradient,
    ::testing::Values(
        OpCase{"add_broadcast", {{2, 3}, {3}}, [](const std::vector<T>& v) { return v[0] + v[1]; }},
        OpCase{"sub_broadcast", {{2, 1}, {2, 3}}, [](const std::vector<T>& v) { return v[0] - v[1]; }},
        OpCase{"mul", {{3, 2}, {3, 2}}, [](const std::vector<T>& v) { return v[0] * v[1]; }},
        OpCase{"sigmoid", {{5}}, [](const std::vector<T>& v) { return sigmoid(v[0]); }},
        OpCase{"scale", {{4}}, [](const std::vector<T>& v) { return scale(v[0], 2.5); }},
        OpCase{"mean", {{2, 3}}, [](const std::vector<T>& v) { return mean(v[0]); }},
        OpCase{"sum_axis", {{2, 3, 2}}, [](const std::vector<T>& v) { return sum_axis(v[0], 1, false); }},
        OpCase{"broadcast_to", {{3, 1}}, [](const std::vector<T>& v) { return broadcast_to(v[0], {2, 3, 4}); }},
        OpCase{"matmul", {{3, 4}, {4, 2}}, [](const std::vector<T>& v) { return matmul(v[0], v[1]); }},
        OpCase{"permute", {{2, 3, 4}}, [](const std::vector<T>& v) { return permute(v[0], {2, 0, 1}); }},
        OpCase{"concat", {{2, 3}, {2, 1}}, [](const std::vector<T>& v) { return concat(v[0], v[1], 1); }}),
    [](const auto& info) { return std::string(info.param.name); });

TEST(Tensor, ReluGradientOffTheKink) {
  auto rng = rbam::make_rng(3);
  std::vector<double> v = testutil::random_values(rng, 8);
  for (auto& x : v) x += x > 0 ? 0.1 : -0.1;
  T a({8}, v, true);
  EXPECT_LT(testutil::gradient_error([](const std::vector<T>& in) { return relu(in[0]); }, {a}, 0, rng), 1e-8);
}

TEST(Tensor, BackwardRequiresScalarLoss) {
  T a({2}, {1, 2}, true);
  EXPECT_THROW((a * a).backward(), rbam::ContractError);
  EXPECT_THROW(sum(T({2}, {1, 2})).backward(), rbam::ContractError);
}

TEST(Tensor, GraphIsReleasedAfterBackward) {
  T a({2}, {1, 2}, true);
  auto loss = sum(a * a);
  loss.backward();
  EXPECT_THROW(loss.backward(), rbam::StateError);
}

TEST(Tensor, NoGradGuardSkipsGraph) {
  T a({2}, {1, 2}, true);
  {
    rbam::NoGradGuard guard;
    auto y = a * a;
    EXPECT_FALSE(y.requires_grad());
    EXPECT_TRUE(y.is_leaf());
  }
  EXPECT_TRUE((a * a).requires_grad());
}

TEST(Tensor, OnlyLeavesAreMutable) {
  T a({2}, {1, 2}, true);
  auto y = a * a;
  EXPECT_THROW(y.mutable_data(), rbam::StateError);
  EXPECT_THROW(y.set_requires_grad(false), rbam::StateError);
  EXPECT_NO_THROW(a.mutable_data()[0] = 4.0);
}

TEST(Tensor, GradAccessWithoutBackwardThrows) {
  T a({2}, {1, 2}, true);
  EXPECT_FALSE(a.has_grad());
  EXPECT_THROW(a.grad(), rbam::StateError);
}

TEST(Tensor, SigmoidFaultInjectionPerturbsGradient) {
  T a({1}, {0.3}, true);
  sum(sigmoid(a)).backward();
  const double clean = a.grad()[0];
  a.zero_grad();
  rbam::FaultInjection::sigmoid_backward = true;
  sum(sigmoid(a)).backward();
  rbam::FaultInjection::sigmoid_backward = false;
  EXPECT_NEAR(a.grad()[0] / clean, 1.01, 1e-12);
}
