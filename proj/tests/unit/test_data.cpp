#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "faircl/data.hpp"
#include "faircl/error.hpp"
#include "faircl/image.hpp"
#include "faircl/manifest.hpp"
#include "faircl/synthetic.hpp"
#include "support.hpp"

namespace faircl {
namespace {

namespace fs = std::filesystem;

const char* kHeader =
    R"({"mode": "multiclass", "num_classes": 3, "attributes": {"gender": ["Male", "Female"], )"
    R"("race": ["Caucasian", "Asian"]}, "image_shape": [1, 2, 1]})";

DatasetManifest parse(const std::string& body) {
  std::istringstream in(std::string(kHeader) + "\n" + body);
  return parse_manifest(in, fs::temp_directory_path());
}

TEST(Manifest, MinimalLoads) {
  const auto m = parse("a,inline:0 1,2,Male,Asian,train\nb,inline:0.5 0.5,0,Female,Asian,test\n");
  ASSERT_EQ(m.rows.size(), 2u);
  const auto counts = m.counts("gender");
  EXPECT_EQ(counts.at("Male"), (std::vector<std::size_t>{0, 0, 1}));
  EXPECT_EQ(counts.at("Female"), (std::vector<std::size_t>{1, 0, 0}));
  EXPECT_EQ(m.rows[0].input->values(), (std::vector<double>{0.0, 1.0}));
}

TEST(Manifest, UnsureRowsExcluded) {
  std::istringstream in(
      R"({"mode": "multiclass", "num_classes": 3, "attributes": {"gender": ["Male", "Female"], "race": ["Caucasian"]}, "image_shape": [1, 2, 1]})"
      "\na,inline:0 1,2,Male,Caucasian,train\nb,inline:0 1,1,Unsure,Caucasian,train\n");
  const auto m = parse_manifest(in, ".");
  EXPECT_EQ(m.rows.size(), 1u);
  EXPECT_EQ(m.excluded_rows, 1u);
}

TEST(Manifest, MalformedLabelNamesRow) {
  std::string body;
  for (int i = 1; i <= 6; ++i) body += "r" + std::to_string(i) + ",inline:0 0,1,Male,Asian,train\n";
  body += "r7,inline:0 0,x,Male,Asian,train\n";
  try {
    parse(body);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("row 7"), std::string::npos) << e.what();
  }
}

TEST(Manifest, UnknownAttributeListsVocabulary) {
  try {
    parse("a,inline:0 0,1,Robot,Asian,train\n");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("Male"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse("a,inline:0 0,1,Male,Asian,train\na,inline:0 0,1,Male,Asian,train\n"), InputError);
  EXPECT_THROW(parse("a,inline:0 0,1,Male,Asian,dev\n"), InputError);
}

TEST(Manifest, WriteParseRoundTrip) {
  SyntheticSpec spec;
  spec.counts = {{3, 2, 2, 1}, {1, 2, 3, 4}};
  spec.image_shape = {2, 2, 1};
  const auto m = generate_synthetic(spec);
  std::stringstream io;
  write_manifest(io, m);
  const auto back = parse_manifest(io, ".");
  ASSERT_EQ(back.rows.size(), m.rows.size());
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].id, m.rows[i].id);
    EXPECT_EQ(*back.rows[i].input, *m.rows[i].input);
    EXPECT_EQ(back.rows[i].split, m.rows[i].split);
  }
}

TEST(Manifest, MultilabelRows) {
  std::istringstream in(
      R"({"mode": "multilabel", "num_labels": 3, "attributes": {"gender": ["Male"], "race": ["Asian"]}, "image_shape": [1, 1, 1]})"
      "\na,inline:0.5,1;0;1,Male,Asian,train\n");
  const auto m = parse_manifest(in, ".");
  EXPECT_EQ(m.rows[0].label_bits, (std::vector<std::uint8_t>{1, 0, 1}));
  std::istringstream bad(
      R"({"mode": "multilabel", "num_labels": 3, "attributes": {"gender": ["Male"], "race": ["Asian"]}, "image_shape": [1, 1, 1]})"
      "\na,inline:0.5,1;2;1,Male,Asian,train\n");
  EXPECT_THROW(parse_manifest(bad, "."), InputError);
}

// Triangle-kernel form of half-pixel bilinear interpolation.
double bilinear_oracle(const Tensor& img, std::size_t oh, std::size_t ow, std::size_t y, std::size_t x, std::size_t c) {
  const std::size_t ih = img.dim(0), iw = img.dim(1), ch = img.dim(2);
  const double fy = std::clamp((y + 0.5) * double(ih) / double(oh) - 0.5, 0.0, double(ih - 1));
  const double fx = std::clamp((x + 0.5) * double(iw) / double(ow) - 0.5, 0.0, double(iw - 1));
  double s = 0.0;
  for (std::size_t i = 0; i < ih; ++i)
    for (std::size_t j = 0; j < iw; ++j) {
      const double k = std::max(0.0, 1.0 - std::abs(fy - double(i))) * std::max(0.0, 1.0 - std::abs(fx - double(j)));
      s += k * img[(i * iw + j) * ch + c];
    }
  return s;
}

TEST(Preprocess, SolidGrayStaysGray) {
  RawImage raw{200, 200, 3, std::vector<std::uint8_t>(200 * 200 * 3, 255)};
  Tensor out = preprocess(raw, {100, 100, 3});
  ASSERT_EQ(out.shape(), (Shape{100, 100, 3}));
  for (double v : out.data()) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(resize_bilinear(Tensor({200, 200, 3}, 0.5), 100, 100), Tensor({100, 100, 3}, 0.5));
}

TEST(Preprocess, CorrectSizePassesThrough) {
  RawImage raw{2, 2, 1, {0, 51, 102, 255}};
  const Tensor out = preprocess(raw, {2, 2, 1});
  EXPECT_EQ(out.values(), (std::vector<double>{0.0, 51 / 255.0, 102 / 255.0, 1.0}));
}

TEST(Preprocess, CheckerboardMatchesOracle) {
  Tensor board({8, 8, 2});
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x)
      for (std::size_t c = 0; c < 2; ++c) board[(y * 8 + x) * 2 + c] = ((y + x + c) % 2) ? 1.0 : 0.0;
  for (auto [oh, ow] : {std::pair<std::size_t, std::size_t>{5, 5}, {13, 7}, {3, 16}}) {
    const Tensor r = resize_bilinear(board, oh, ow);
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x)
        for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(r[(y * ow + x) * 2 + c], bilinear_oracle(board, oh, ow, y, x, c), 1e-6);
  }
}

TEST(Preprocess, PnmDecodeAndValueRange) {
  const fs::path p = fs::temp_directory_path() / "faircl_test.ppm";
  RawImage raw{3, 4, 3, {}};
  for (std::size_t i = 0; i < 36; ++i) raw.pixels.push_back(static_cast<std::uint8_t>(i * 7));
  write_pnm(p, raw);
  const RawImage back = decode_image(p);
  EXPECT_EQ(back.pixels, raw.pixels);
  const Tensor t = preprocess(back, {5, 5, 1});
  for (double v : t.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  std::ofstream(p) << "not an image";
  EXPECT_THROW(decode_image(p), InputError);
  fs::remove(p);
}

std::vector<Sample> images(std::size_t n, std::mt19937_64& rng) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(testing::make_sample("s" + std::to_string(i), testing::random_tensor({2, 3, 2}, rng, 0, 1), int(i % 3)));
  }
  return out;
}

TEST(Augment, ProbabilityZeroIsIdentity) {
  std::mt19937_64 rng(0);
  const auto data = images(20, rng);
  const auto out = augment(data, 5, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) EXPECT_EQ(out[i].input, data[i].input);
}

TEST(Augment, FlipIsInvolution) {
  std::mt19937_64 rng(1);
  const auto data = images(10, rng);
  const auto once = augment(data, 3, 1.0);
  const auto twice = augment(once, 4, 1.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(twice[i].input, data[i].input);
    EXPECT_EQ(once[i].input, flip_horizontal(data[i].input));
    EXPECT_EQ(once[i].class_id, data[i].class_id);
    EXPECT_EQ(once[i].gender, data[i].gender);
  }
  const Tensor row({1, 3, 1}, std::vector<double>{1, 2, 3});
  EXPECT_EQ(flip_horizontal(row).values(), (std::vector<double>{3, 2, 1}));
}

TEST(Augment, FlipFrequencyIsHalf) {
  Tensor asym({1, 2, 1}, std::vector<double>{0.0, 1.0});
  std::vector<Sample> data{testing::make_sample("x", asym, 0)};
  std::size_t flips = 0;
  constexpr std::size_t kDraws = 10000;
  for (std::size_t s = 0; s < kDraws; ++s) flips += augment(data, s)[0].input[0] == 1.0 ? 1 : 0;
  EXPECT_LE(std::abs(double(flips) - kDraws * 0.5), 3.0 * std::sqrt(kDraws * 0.25));
  const auto a = augment(data, 17), b = augment(data, 17);
  EXPECT_EQ(a[0].input, b[0].input);
}

std::vector<Sample> attributed(std::mt19937_64& rng) {
  std::vector<Sample> out;
  const char* genders[] = {"Male", "Female"};
  for (int i = 0; i < 12; ++i) {
    out.push_back(testing::make_sample("g" + std::to_string(i), testing::random_tensor({1, 1, 1}, rng, 0, 1), i % 3,
                                       -1, genders[(i * 7) % 2 == 0 ? 0 : 1]));
  }
  return out;
}

TEST(SplitStream, PartitionsInOrder) {
  std::mt19937_64 rng(2);
  const auto train = attributed(rng), test = attributed(rng);
  const std::vector<std::string> vocab{"Male", "Female"};
  const auto s = split_stream(train, test, "gender", {"Male", "Female"}, vocab, TaskMode::kMulticlass, 3);
  ASSERT_EQ(s.tasks.size(), 2u);
  EXPECT_EQ(s.tasks[0].name, "Male");
  std::set<std::string> ids;
  for (std::size_t t = 0; t < 2; ++t) {
    for (const auto& x : s.tasks[t].train) {
      EXPECT_EQ(x.gender, s.tasks[t].name);
      EXPECT_EQ(x.domain, int(t));
      EXPECT_TRUE(ids.insert(x.id).second);
    }
  }
  EXPECT_EQ(ids.size(), train.size());
  const auto r = split_stream(train, test, "gender", {"Female", "Male"}, vocab, TaskMode::kMulticlass, 3);
  EXPECT_EQ(r.tasks[0].train.size(), s.tasks[1].train.size());
  EXPECT_EQ(r.tasks[1].name, "Male");
  EXPECT_EQ(r.union_train().size(), train.size());
  EXPECT_THROW(split_stream(train, test, "gender", {"Male"}, vocab, TaskMode::kMulticlass, 3), ConfigError);
}

TEST(Targets, Layouts) {
  std::mt19937_64 rng(3);
  auto data = images(3, rng);
  for (int i = 0; i < 3; ++i) data[i].domain = i % 2;
  const auto ptrs = testing::pointers(data);
  const Tensor j = joint_targets(ptrs, 2, 3);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(j(r, data[r].domain * 3 + data[r].class_id), 1.0);
  EXPECT_EQ(j.sum(), 3.0);
  const Tensor x = stack_inputs(ptrs);
  EXPECT_EQ(x.shape(), (Shape{3, 2, 3, 2}));
  data[1].domain = -1;
  EXPECT_THROW(joint_targets(testing::pointers(data), 2, 3), InputError);
}

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.counts = {{10, 10, 10, 10}, {10, 10, 10, 10}};
  s.image_shape = {4, 4, 1};
  return s;
}

TEST(Synthetic, CountsAndStratifiedSplit) {
  SyntheticSpec s = small_spec();
  s.counts = {{900, 20, 20, 20}, {100, 20, 20, 20}};
  const auto m = generate_synthetic(s);
  const auto all = m.counts("gender");
  EXPECT_EQ(all.at("Male"), (std::vector<std::size_t>{900, 20, 20, 20}));
  EXPECT_EQ(all.at("Female"), (std::vector<std::size_t>{100, 20, 20, 20}));
  const auto test = m.counts("gender", "test");
  EXPECT_EQ(test.at("Male"), (std::vector<std::size_t>{180, 4, 4, 4}));
  EXPECT_EQ(test.at("Female"), (std::vector<std::size_t>{20, 4, 4, 4}));
  for (const auto& row : m.rows)
    for (double v : row.input->data()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
}

TEST(Synthetic, BitReproducible) {
  std::stringstream a, b;
  write_manifest(a, generate_synthetic(small_spec()));
  write_manifest(b, generate_synthetic(small_spec()));
  EXPECT_EQ(a.str(), b.str());
  SyntheticSpec other = small_spec();
  other.seed = 1;
  std::stringstream c;
  write_manifest(c, generate_synthetic(other));
  EXPECT_NE(a.str(), c.str());
}

TEST(Synthetic, NoiselessNearestPrototypeIsPerfect) {
  SyntheticSpec s = small_spec();
  s.noise = 0.0;
  s.domain_shift = 0.3;
  s.class_separation = 0.15;
  const auto m = generate_synthetic(s);
  const auto p = synthetic_patterns(s);
  for (const auto& row : m.rows) {
    const std::size_t d = row.gender == "Male" ? 0 : 1;
    std::size_t best = 0;
    double best_dist = 1e300;
    for (std::size_t dd = 0; dd < 2; ++dd)
      for (std::size_t c = 0; c < s.num_classes; ++c) {
        double dist = 0.0;
        for (std::size_t i = 0; i < row.input->size(); ++i) {
          const double mean = std::clamp(0.5 + s.class_separation * p.class_patterns[c][i] +
                                             s.domain_shift * p.domain_patterns[dd][i], 0.0, 1.0);
          dist += std::pow((*row.input)[i] - mean, 2);
        }
        if (dist < best_dist) {
          best_dist = dist;
          best = dd * s.num_classes + c;
        }
      }
    EXPECT_EQ(best, d * s.num_classes + std::size_t(row.class_id)) << row.id;
  }
}

TEST(Synthetic, ZeroShiftMakesDomainsIdenticallyDistributed) {
  SyntheticSpec s = small_spec();
  s.domain_shift = 0.0;
  s.noise = 0.0;
  const auto m = generate_synthetic(s);
  std::map<int, Tensor> by_class;
  for (const auto& row : m.rows) {
    auto [it, fresh] = by_class.emplace(row.class_id, *row.input);
    if (!fresh) EXPECT_EQ(it->second, *row.input);
  }
}

TEST(Synthetic, InvalidSpec) {
  SyntheticSpec s = small_spec();
  s.counts = {{0, 0, 0, 0}, {1, 1, 1, 1}};
  EXPECT_THROW(generate_synthetic(s), ConfigError);
  s = small_spec();
  s.noise = -1;
  EXPECT_THROW(generate_synthetic(s), ConfigError);
}

}  // namespace
}  // namespace faircl
