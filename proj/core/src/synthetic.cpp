#include "faircl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>

#include "faircl/error.hpp"
#include "faircl/log.hpp"
#include "faircl/rng.hpp"

namespace faircl {
namespace {

Tensor sign_pattern(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  std::bernoulli_distribution coin(0.5);
  for (double& v : t.data()) v = coin(rng) ? 1.0 : -1.0;
  return t;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw ConfigError("synthetic: num_classes must be >= 2");
  if (domains.empty()) throw ConfigError("synthetic: at least one domain required");
  if (attribute != "gender" && attribute != "race") {
    throw ConfigError("synthetic: attribute must be gender or race, got '" + attribute + "'");
  }
  if (counts.size() != domains.size()) {
    throw ConfigError("synthetic: counts has " + std::to_string(counts.size()) + " rows for " +
                      std::to_string(domains.size()) + " domains");
  }
  for (std::size_t d = 0; d < counts.size(); ++d) {
    if (counts[d].size() != num_classes) {
      throw ConfigError("synthetic: counts row " + std::to_string(d) + " must have " + std::to_string(num_classes) +
                        " entries");
    }
    if (std::accumulate(counts[d].begin(), counts[d].end(), std::size_t{0}) == 0) {
      throw ConfigError("synthetic: domain '" + domains[d] + "' has no samples");
    }
  }
  if (domain_shift < 0 || class_separation < 0 || noise < 0 || interaction < 0) {
    throw ConfigError("synthetic: shift, separation, interaction and noise must be >= 0");
  }
  if (image_shape.size() != 3 || shape_volume(image_shape) == 0) {
    throw ConfigError("synthetic: image_shape must be [H, W, C]");
  }
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("synthetic: test_fraction must lie in [0, 1)");
}

nlohmann::json to_json(const SyntheticSpec& s) {
  return {{"num_classes", s.num_classes}, {"attribute", s.attribute},       {"domains", s.domains},
          {"counts", s.counts},           {"domain_shift", s.domain_shift}, {"class_separation", s.class_separation},
          {"interaction", s.interaction}, {"noise", s.noise},               {"image_shape", s.image_shape},
          {"test_fraction", s.test_fraction}, {"seed", s.seed}};
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  try {
    s.num_classes = j.value("num_classes", s.num_classes);
    s.attribute = j.value("attribute", s.attribute);
    if (j.contains("domains")) s.domains = j.at("domains").get<std::vector<std::string>>();
    if (j.contains("counts")) s.counts = j.at("counts").get<std::vector<std::vector<std::size_t>>>();
    s.domain_shift = j.value("domain_shift", s.domain_shift);
    s.class_separation = j.value("class_separation", s.class_separation);
    s.interaction = j.value("interaction", s.interaction);
    s.noise = j.value("noise", s.noise);
    if (j.contains("image_shape")) s.image_shape = j.at("image_shape").get<Shape>();
    s.test_fraction = j.value("test_fraction", s.test_fraction);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  return s;
}

SyntheticPatterns synthetic_patterns(const SyntheticSpec& spec) {
  Rng rng = make_rng(spec.seed, 0);
  SyntheticPatterns p;
  for (std::size_t c = 0; c < spec.num_classes; ++c) p.class_patterns.push_back(sign_pattern(spec.image_shape, rng));
  for (std::size_t d = 0; d < spec.domains.size(); ++d) {
    p.domain_patterns.push_back(sign_pattern(spec.image_shape, rng));
  }
  p.cell_patterns.resize(spec.domains.size());
  for (std::size_t d = 0; d < spec.domains.size(); ++d) {
    for (std::size_t c = 0; c < spec.num_classes; ++c) p.cell_patterns[d].push_back(sign_pattern(spec.image_shape, rng));
  }
  return p;
}

DatasetManifest generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const SyntheticPatterns patterns = synthetic_patterns(spec);
  Rng rng = make_rng(spec.seed, 1);
  std::normal_distribution<double> gauss(0.0, 1.0);

  DatasetManifest m;
  m.mode = TaskMode::kMulticlass;
  m.num_classes = spec.num_classes;
  m.image_shape = spec.image_shape;
  m.attributes[spec.attribute] = spec.domains;
  m.attributes[spec.attribute == "gender" ? "race" : "gender"] = {"n/a"};

  for (std::size_t d = 0; d < spec.domains.size(); ++d) {
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
      const std::size_t n = spec.counts[d][c];
      Tensor mean(spec.image_shape, 0.5);
      for (std::size_t i = 0; i < mean.size(); ++i) {
        mean[i] += spec.class_separation * patterns.class_patterns[c][i] +
                   spec.domain_shift * patterns.domain_patterns[d][i] +
                   spec.interaction * patterns.cell_patterns[d][c][i];
      }
      const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.test_fraction + 0.5));
      if (n > 0 && n_test == 0 && spec.test_fraction > 0.0) {
        log_warning("synthetic: cell (" + spec.domains[d] + ", class " + std::to_string(c) + ") has " +
                    std::to_string(n) + " samples and an empty test split");
      }
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<bool> is_test(n, false);
      for (std::size_t k = 0; k < n_test; ++k) is_test[order[k]] = true;

      for (std::size_t k = 0; k < n; ++k) {
        Tensor x = mean;
        for (double& v : x.data()) v = std::clamp(v + spec.noise * gauss(rng), 0.0, 1.0);
        ManifestRow row;
        row.id = "d" + std::to_string(d) + "_c" + std::to_string(c) + "_" + std::to_string(k);
        row.input = std::move(x);
        row.class_id = static_cast<int>(c);
        (spec.attribute == "gender" ? row.gender : row.race) = spec.domains[d];
        (spec.attribute == "gender" ? row.race : row.gender) = "n/a";
        row.split = is_test[k] ? "test" : "train";
        m.rows.push_back(std::move(row));
      }
    }
  }
  return m;
}

}  // namespace faircl
