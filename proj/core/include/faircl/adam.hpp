#pragma once

#include <cstdint>

#include "faircl/parameters.hpp"

namespace faircl {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment estimates for every parameter plus the step count.
class AdamState {
 public:
  AdamState() = default;
  AdamState(const ParameterSet& params, AdamOptions options = {});

  const AdamOptions& options() const { return options_; }
  std::uint64_t step() const { return step_; }
  const ParameterSet& first_moment() const { return m_; }
  const ParameterSet& second_moment() const { return v_; }

 private:
  friend void adam_step(ParameterSet&, const Gradients&, AdamState&, double);

  AdamOptions options_;
  std::uint64_t step_ = 0;
  ParameterSet m_;
  ParameterSet v_;
};

// One bias-corrected Adam update. Throws NumericError naming the first
// parameter whose gradient is not finite; nothing is modified in that case.
void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state, double learning_rate);

}  // namespace faircl
