#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "faircl/data.hpp"
#include "faircl/model.hpp"
#include "faircl/parameters.hpp"
#include "faircl/tensor.hpp"

namespace faircl::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline void randomize(ParameterSet& params, std::mt19937_64& rng, double scale = 0.5) {
  std::normal_distribution<double> n(0.0, scale);
  for (auto& [name, value] : params) {
    for (double& v : value.data()) v = n(rng);
  }
}

// |a - b| / max(|a|, |b|, floor)
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Largest relative error between `analytic` and central differences of `f`
// with respect to every scalar of `params`.
inline double max_fd_error(ParameterSet& params, const ParameterSet& analytic, const std::function<double()>& f,
                           double step = 1e-5, std::string* worst = nullptr) {
  double max_err = 0.0;
  for (std::size_t e = 0; e < params.size(); ++e) {
    auto& entry = params.entry(e);
    const auto& g = analytic.at(entry.name);
    for (std::size_t i = 0; i < entry.value.size(); ++i) {
      const double keep = entry.value[i];
      entry.value[i] = keep + step;
      const double up = f();
      entry.value[i] = keep - step;
      const double down = f();
      entry.value[i] = keep;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(g[i], numeric);
      if (err > max_err) {
        max_err = err;
        if (worst != nullptr) {
          *worst = entry.name + "[" + std::to_string(i) + "] analytic " + std::to_string(g[i]) + " numeric " +
                   std::to_string(numeric);
        }
      }
    }
  }
  return max_err;
}

inline std::vector<const Sample*> pointers(const std::vector<Sample>& samples) {
  std::vector<const Sample*> out;
  for (const auto& s : samples) out.push_back(&s);
  return out;
}

inline Sample make_sample(const std::string& id, Tensor input, int cls, int domain = 0,
                          const std::string& gender = "Male") {
  Sample s;
  s.id = id;
  s.input = std::move(input);
  s.class_id = cls;
  s.domain = domain;
  s.gender = gender;
  s.race = "n/a";
  return s;
}

}  // namespace faircl::testing
