#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "faircl/checkpoint.hpp"
#include "faircl/error.hpp"
#include "faircl/loss.hpp"
#include "faircl/model.hpp"
#include "support.hpp"

namespace faircl {
namespace {

ModelConfig desk_config() {
  ModelConfig cfg;
  cfg.input_shape = {16, 16, 3};
  cfg.conv_widths = {8, 16, 16, 32};
  cfg.dense_widths = {64, 32, 16};
  cfg.num_classes = 7;
  return cfg;
}

TEST(Forward, IdentityDense) {
  Model m({4}, {}, {HeadKind::kSingle, 4, 4, 1, true});
  Tensor& w = m.parameters().at("head.weight");
  for (std::size_t i = 0; i < 4; ++i) w(i, i) = 1.0;
  const auto r = forward(m, Tensor({1, 4}, 1.0));
  EXPECT_EQ(r.logits, Tensor({1, 4}, 1.0));
}

TEST(Forward, ZeroWeightsGiveBias) {
  Model m({3}, {}, {HeadKind::kSingle, 3, 2, 1, true});
  m.parameters().at("head.bias") = Tensor({2}, std::vector<double>{0.25, -1.5});
  std::mt19937_64 rng(0);
  const auto r = forward(m, testing::random_tensor({2, 3}, rng));
  EXPECT_EQ(r.logits.values(), (std::vector<double>{0.25, -1.5, 0.25, -1.5}));
}

TEST(Forward, TwoLayerMatchesHandMatmul) {
  std::mt19937_64 rng(11);
  Model m({5}, {DenseLayer{"d", 5, 4, true}, ReluLayer{"r"}}, {HeadKind::kSingle, 4, 3, 1, true});
  testing::randomize(m.parameters(), rng);
  const Tensor x = testing::random_tensor({3, 5}, rng);
  const Tensor logits = forward(m, x).logits;
  const auto& p = m.parameters();
  for (std::size_t b = 0; b < 3; ++b) {
    std::vector<double> h(4);
    for (std::size_t j = 0; j < 4; ++j) {
      double s = p.at("d.bias")[j];
      for (std::size_t i = 0; i < 5; ++i) s += x(b, i) * p.at("d.weight")(i, j);
      h[j] = s > 0 ? s : 0;
    }
    for (std::size_t k = 0; k < 3; ++k) {
      double s = p.at("head.bias")[k];
      for (std::size_t j = 0; j < 4; ++j) s += h[j] * p.at("head.weight")(j, k);
      EXPECT_NEAR(logits(b, k), s, 1e-12);
    }
  }
}

TEST(Forward, ShapeMismatchNamesLayer) {
  Model m = build_model(desk_config(), 0);
  try {
    forward(m, Tensor({1, 8, 8, 3}));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("block0.conv0"), std::string::npos) << e.what();
  }
}

TEST(Backward, ScalarLinear) {
  Model m({1}, {}, {HeadKind::kSingle, 1, 1, 1, false});
  m.parameters().at("head.weight")[0] = 0.4;
  auto r = forward(m, Tensor({1, 1}, 3.0));
  const Gradients g = backward(r.tape, Tensor({1, 1}, 1.0));
  EXPECT_DOUBLE_EQ(g.at("head.weight")[0], 3.0);
}

TEST(Backward, TapeConsumedOnce) {
  Model m = build_model(desk_config(), 1);
  std::mt19937_64 rng(0);
  const Tensor x = testing::random_tensor({2, 16, 16, 3}, rng, 0, 1);
  auto r = forward(m, x, {Phase::kTrain, 5});
  const Tensor up(r.logits.shape(), 1.0);
  const Gradients g1 = backward(r.tape, up);
  EXPECT_THROW(backward(r.tape, up), UsageError);
  auto r2 = forward(m, x, {Phase::kTrain, 5});
  EXPECT_EQ(g1, backward(r2.tape, up));
  EXPECT_TRUE(g1.same_layout(m.parameters()));
}

TEST(BuildModel, DeskScaleShapes) {
  ModelConfig cfg = desk_config();
  EXPECT_EQ(build_model(cfg, 0).output_units(), 7u);
  cfg.head = HeadKind::kDomainDiscriminative;
  cfg.num_domains = 3;
  EXPECT_EQ(build_model(cfg, 0).output_units(), 21u);
}

TEST(BuildModel, SeedDeterminism) {
  EXPECT_EQ(build_model(desk_config(), 42).parameters(), build_model(desk_config(), 42).parameters());
  EXPECT_FALSE(build_model(desk_config(), 42).parameters() == build_model(desk_config(), 43).parameters());
}

TEST(BuildModel, InvalidConfig) {
  ModelConfig cfg = desk_config();
  cfg.num_classes = 1;
  EXPECT_THROW(build_model(cfg, 0), ConfigError);
  cfg = desk_config();
  cfg.conv_widths[2] = 0;
  EXPECT_THROW(build_model(cfg, 0), ConfigError);
  cfg = desk_config();
  cfg.head = HeadKind::kDomainIndependent;
  cfg.num_domains = 1;
  EXPECT_THROW(build_model(cfg, 0), ConfigError);
}

TEST(BuildModel, BackboneIdenticalAcrossHeads) {
  auto backbone = [](HeadKind kind) {
    ModelConfig cfg = desk_config();
    cfg.head = kind;
    cfg.num_domains = kind == HeadKind::kSingle ? 1 : 3;
    Model m = build_model(cfg, 0);
    std::size_t n = 0;
    for (const auto& [name, v] : m.parameters()) {
      if (!name.starts_with("head")) n += v.size();
    }
    return n;
  };
  EXPECT_EQ(backbone(HeadKind::kSingle), backbone(HeadKind::kDomainDiscriminative));
  EXPECT_EQ(backbone(HeadKind::kSingle), backbone(HeadKind::kDomainIndependent));
}

TEST(BuildModel, EvaluationIsDeterministic) {
  Model m = build_model(desk_config(), 3);
  std::mt19937_64 rng(0);
  const Tensor x = testing::random_tensor({4, 16, 16, 3}, rng, 0, 1);
  EXPECT_EQ(predict_logits(m, x), predict_logits(m, x));
  EXPECT_EQ(forward(m, x).logits, predict_logits(m, x));
}

TEST(DdcDecode, Examples) {
  Tensor p = ddc_decode(Tensor({1, 6}), 2, 3);
  for (double v : p.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  Tensor z({1, 6});
  z(0, ddc_joint_index(1, 2, 3)) = 30.0;
  EXPECT_NEAR(ddc_decode(z, 2, 3)(0, 2), 1.0, 1e-12);
  EXPECT_THROW(ddc_decode(Tensor({1, 5}), 2, 3), InputError);
}

TEST(DdcDecode, MatchesEnumeration) {
  for (int seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 2 + seed % 3, m = 2 + seed % 5;
    const Tensor z = testing::random_tensor({4, n * m}, rng, -5, 5);
    const Tensor p = ddc_decode(z, n, m);
    for (std::size_t r = 0; r < 4; ++r) {
      double denom = 0.0;
      for (std::size_t d = 0; d < n; ++d)
        for (std::size_t c = 0; c < m; ++c) denom += std::exp(z(r, d * m + c));
      double row = 0.0;
      for (std::size_t c = 0; c < m; ++c) {
        double s = 0.0;
        for (std::size_t d = 0; d < n; ++d) s += std::exp(z(r, d * m + c)) / denom;
        EXPECT_NEAR(p(r, c), s, 1e-12);
        row += p(r, c);
      }
      EXPECT_NEAR(row, 1.0, 1e-12);
    }
  }
}

TEST(DdcDecode, JointIndexBijective) {
  std::set<std::size_t> seen;
  for (std::size_t d = 0; d < 3; ++d)
    for (std::size_t c = 0; c < 7; ++c) seen.insert(ddc_joint_index(d, c, 7));
  EXPECT_EQ(seen.size(), 21u);
  EXPECT_EQ(*seen.rbegin(), 20u);
}

Model dic_model(std::size_t domains) {
  return Model({3}, {DenseLayer{"d", 3, 4, true}, ReluLayer{"r"}}, {HeadKind::kDomainIndependent, 4, 3, domains, true});
}

TEST(Dic, IdenticalHeadsDoubleLogits) {
  std::mt19937_64 rng(1);
  Model m = dic_model(2);
  testing::randomize(m.parameters(), rng);
  m.parameters().at("head.1.weight") = m.parameters().at("head.0.weight");
  m.parameters().at("head.1.bias") = m.parameters().at("head.0.bias");
  const Tensor x = testing::random_tensor({5, 3}, rng);
  const std::vector<int> zeros(5, 0);
  const Tensor one = predict_logits(m, x, zeros);
  const Tensor both = predict_logits(m, x);
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_EQ(both[i], 2.0 * one[i]);
}

TEST(Dic, RoutingIsolatesHeads) {
  std::mt19937_64 rng(2);
  Model m = dic_model(2);
  testing::randomize(m.parameters(), rng);
  const std::vector<int> ids{0};
  auto r = forward(m, testing::random_tensor({1, 3}, rng), {Phase::kTrain, 0, ids});
  const Gradients g = backward(r.tape, Tensor({1, 3}, 1.0));
  for (double v : g.at("head.1.weight").data()) EXPECT_EQ(v, 0.0);
  for (double v : g.at("head.1.bias").data()) EXPECT_EQ(v, 0.0);
  EXPECT_GT(g.at("head.0.bias").squared_norm(), 0.0);
}

TEST(Dic, InferenceEqualsPerHeadSum) {
  std::mt19937_64 rng(3);
  Model m = dic_model(2);
  testing::randomize(m.parameters(), rng);
  const Tensor x = testing::random_tensor({4, 3}, rng);
  const std::vector<int> d0(4, 0), d1(4, 1);
  const Tensor sum = predict_logits(m, x);
  const Tensor a = predict_logits(m, x, d0), b = predict_logits(m, x, d1);
  for (std::size_t i = 0; i < sum.size(); ++i) EXPECT_NEAR(sum[i], a[i] + b[i], 1e-12);
  const std::vector<int> bad(4, 2);
  EXPECT_THROW(predict_logits(m, x, bad), InputError);
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  ModelConfig cfg = desk_config();
  cfg.head = HeadKind::kDomainIndependent;
  cfg.num_domains = 2;
  Model m = build_model(cfg, 9);
  std::mt19937_64 rng(0);
  testing::randomize(m.parameters(), rng);
  m.buffers().at(m.buffers().entry(0).name) = testing::random_tensor(m.buffers().entry(0).value.shape(), rng);
  const auto path = std::filesystem::temp_directory_path() / "faircl_ckpt_test.json";
  save_checkpoint(path, make_checkpoint(m, nlohmann::json{{"k", 1}}));
  const Checkpoint c = load_checkpoint(path);
  const Model back = restore_model(c);
  std::filesystem::remove(path);
  const Tensor x = testing::random_tensor({3, 16, 16, 3}, rng, 0, 1);
  EXPECT_EQ(predict_logits(m, x), predict_logits(back, x));
  EXPECT_EQ(c.strategy["k"], 1);
  EXPECT_EQ(back.config(), m.config());
}

}  // namespace
}  // namespace faircl
