#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "faircl/manifest.hpp"

namespace faircl {

// Biased image dataset with a known generative structure:
//   x = clamp(0.5 + separation * P[class] + shift * D[domain]
//                 + interaction * Q[domain][class] + noise * N(0, 1), 0, 1)
// where P, D, Q are fixed random sign patterns. `counts[d][c]` fixes the
// number of samples per (domain, class) cell, which is how imbalance is
// expressed.
struct SyntheticSpec {
  std::size_t num_classes = 4;
  std::string attribute = "gender";  // manifest column that carries the domain
  std::vector<std::string> domains{"Male", "Female"};
  std::vector<std::vector<std::size_t>> counts;  // [domain][class]
  double domain_shift = 0.3;
  double class_separation = 0.25;
  double interaction = 0.0;
  double noise = 0.1;
  Shape image_shape{16, 16, 3};
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

nlohmann::json to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

// The noiseless mean image of a (domain, class) cell, before clamping.
struct SyntheticPatterns {
  std::vector<Tensor> class_patterns;                // [M] unit sign patterns
  std::vector<Tensor> domain_patterns;               // [N]
  std::vector<std::vector<Tensor>> cell_patterns;    // [N][M]
};
SyntheticPatterns synthetic_patterns(const SyntheticSpec& spec);

// Inline-data manifest; 80/20 (test_fraction) split stratified by
// (domain, class). Bit-reproducible for a fixed spec.
DatasetManifest generate_synthetic(const SyntheticSpec& spec);

}  // namespace faircl
