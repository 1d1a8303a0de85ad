#include <gtest/gtest.h>

#include <cmath>

#include "faircl/adam.hpp"
#include "faircl/error.hpp"
#include "faircl/loss.hpp"
#include "support.hpp"

namespace faircl {
namespace {

Tensor one_hot(std::size_t rows, std::size_t cols, const std::vector<std::size_t>& cls) {
  Tensor t({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) t(r, cls[r]) = 1.0;
  return t;
}

TEST(SoftmaxCrossEntropy, UniformLogits) {
  const auto r = softmax_cross_entropy(Tensor({1, 4}), one_hot(1, 4, {2}));
  EXPECT_NEAR(r.value, std::log(4.0), 1e-15);
}

TEST(SoftmaxCrossEntropy, DoublingWeightsDoublesLoss) {
  std::mt19937_64 rng(2);
  const Tensor z = testing::random_tensor({3, 5}, rng, -3, 3);
  const Tensor y = one_hot(3, 5, {0, 4, 2});
  const std::vector<double> w{0.5, 1.5, 2.0};
  const std::vector<double> w2{1.0, 3.0, 4.0};
  EXPECT_EQ(softmax_cross_entropy(z, y, w2).value, 2.0 * softmax_cross_entropy(z, y, w).value);
}

TEST(SoftmaxCrossEntropy, WeightedMatchesHandSum) {
  for (int seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor z = testing::random_tensor({3, 4}, rng, -4, 4);
    std::vector<std::size_t> cls(3);
    std::vector<double> w(3);
    for (std::size_t r = 0; r < 3; ++r) {
      cls[r] = rng() % 4;
      w[r] = std::uniform_real_distribution<double>(0.1, 3.0)(rng);
    }
    double expected = 0.0;
    for (std::size_t r = 0; r < 3; ++r) {
      double denom = 0.0;
      for (std::size_t c = 0; c < 4; ++c) denom += std::exp(z(r, c));
      expected += w[r] * -std::log(std::exp(z(r, cls[r])) / denom);
    }
    expected /= 3.0;
    EXPECT_NEAR(softmax_cross_entropy(z, one_hot(3, 4, cls), w).value, expected, 1e-12);
  }
}

TEST(SoftmaxCrossEntropy, UnitWeightsEqualUnweighted) {
  std::mt19937_64 rng(5);
  const Tensor z = testing::random_tensor({4, 3}, rng, -2, 2);
  const Tensor y = one_hot(4, 3, {0, 1, 2, 1});
  const std::vector<double> ones(4, 1.0);
  EXPECT_EQ(softmax_cross_entropy(z, y, ones).value, softmax_cross_entropy(z, y).value);
}

TEST(SoftmaxCrossEntropy, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  Tensor z = testing::random_tensor({3, 4}, rng, -2, 2);
  const Tensor y = one_hot(3, 4, {1, 3, 0});
  const std::vector<double> w{1.0, 0.5, 2.0};
  const auto r = softmax_cross_entropy(z, y, w);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double keep = z[i];
    z[i] = keep + 1e-6;
    const double up = softmax_cross_entropy(z, y, w).value;
    z[i] = keep - 1e-6;
    const double down = softmax_cross_entropy(z, y, w).value;
    z[i] = keep;
    EXPECT_NEAR(r.grad[i], (up - down) / 2e-6, 1e-8);
  }
}

TEST(SoftmaxCrossEntropy, Errors) {
  Tensor bad({1, 3});
  bad(0, 0) = 1.0;
  bad(0, 1) = 1.0;
  EXPECT_THROW(softmax_cross_entropy(Tensor({1, 3}), bad), InputError);
  const std::vector<double> zero{0.0};
  EXPECT_THROW(softmax_cross_entropy(Tensor({1, 3}), one_hot(1, 3, {0}), zero), InputError);
}

TEST(Softmax, RowsSumToOne) {
  std::mt19937_64 rng(4);
  const Tensor p = softmax(testing::random_tensor({20, 7}, rng, -50, 50));
  for (std::size_t r = 0; r < 20; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) s += p(r, c);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  const Tensor q = sigmoid(testing::random_tensor({10, 10}, rng, -30, 30));
  for (double v : q.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(SigmoidBce, Examples) {
  Tensor y({1, 1}, 1.0);
  EXPECT_NEAR(sigmoid_binary_cross_entropy(Tensor({1, 1}), y).value, std::log(2.0), 1e-15);
  EXPECT_LT(sigmoid_binary_cross_entropy(Tensor({2, 12}, 20.0), Tensor({2, 12}, 1.0)).value, 1e-8);
  Tensor bad({1, 1}, 0.5);
  EXPECT_THROW(sigmoid_binary_cross_entropy(Tensor({1, 1}), bad), InputError);
}

TEST(SigmoidBce, MatchesElementwiseOracle) {
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor z = testing::random_tensor({4, 12}, rng, -6, 6);
    Tensor y({4, 12});
    for (double& v : y.data()) v = static_cast<double>(rng() % 2);
    double expected = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-z[i]));
      expected -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
    }
    expected /= 48.0;
    const auto r = sigmoid_binary_cross_entropy(z, y);
    EXPECT_NEAR(r.value, expected, 1e-12);
    for (std::size_t i = 0; i < z.size(); ++i) {
      EXPECT_NEAR(r.grad[i], (1.0 / (1.0 + std::exp(-z[i])) - y[i]) / 48.0, 1e-15);
    }
  }
}

ParameterSet single(double v, std::size_t n = 1) {
  ParameterSet p;
  p.add("w", Tensor({n}, v));
  return p;
}

TEST(Adam, FirstStepIsBiasCorrected) {
  ParameterSet p = single(0.0, 5);
  AdamState s(p);
  adam_step(p, single(1.0, 5), s, 1e-3);
  for (double v : p.at("w").data()) EXPECT_NEAR(v, -1e-3 / (1.0 + 1e-8), 1e-18);
  EXPECT_EQ(s.step(), 1u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ParameterSet p = single(0.7, 3);
  AdamState s(p);
  adam_step(p, single(0.0, 3), s, 1e-2);
  EXPECT_EQ(p, single(0.7, 3));
}

TEST(Adam, DescendsQuadratic) {
  ParameterSet p = single(2.0);
  AdamState s(p);
  double prev = 4.0;
  for (int i = 0; i < 3; ++i) {
    adam_step(p, single(2.0 * p.at("w")[0]), s, 0.1);
    const double loss = p.at("w")[0] * p.at("w")[0];
    EXPECT_LT(loss, prev);
    prev = loss;
  }
}

TEST(Adam, Deterministic) {
  std::mt19937_64 rng(1);
  ParameterSet p;
  p.add("a", testing::random_tensor({4}, rng));
  ParameterSet g;
  g.add("a", testing::random_tensor({4}, rng));
  ParameterSet p1 = p, p2 = p;
  AdamState s1(p), s2(p);
  adam_step(p1, g, s1, 0.01);
  adam_step(p2, g, s2, 0.01);
  EXPECT_EQ(p1, p2);
  EXPECT_EQ(s1.first_moment(), s2.first_moment());
  for (double v : s1.second_moment().at("a").data()) EXPECT_GE(v, 0.0);
}

TEST(Adam, NanGradientNamesParameter) {
  ParameterSet p = single(1.0);
  AdamState s(p);
  try {
    adam_step(p, single(std::nan("")), s, 0.1);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("'w'"), std::string::npos);
  }
  EXPECT_EQ(p, single(1.0));
  EXPECT_THROW(adam_step(p, single(1.0), s, 0.0), ConfigError);
}

}  // namespace
}  // namespace faircl
