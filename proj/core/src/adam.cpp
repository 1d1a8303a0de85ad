#include "faircl/adam.hpp"

#include <cmath>

#include "faircl/error.hpp"

namespace faircl {

AdamState::AdamState(const ParameterSet& params, AdamOptions options)
    : options_(options), m_(params.zeros_like()), v_(params.zeros_like()) {
  if (!(options.beta1 >= 0.0 && options.beta1 < 1.0) || !(options.beta2 >= 0.0 && options.beta2 < 1.0)) {
    throw ConfigError("adam: betas must lie in [0, 1)");
  }
  if (!(options.epsilon > 0.0)) throw ConfigError("adam: epsilon must be > 0");
}

void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state, double learning_rate) {
  if (!(learning_rate > 0.0)) throw ConfigError("adam: learning rate must be > 0");
  if (state.m_.empty() && !params.empty()) {
    state = AdamState(params, state.options_);
  }
  params.require_same_layout(grads, "adam gradients");
  params.require_same_layout(state.m_, "adam state");
  for (const auto& g : grads) {
    if (!g.value.all_finite()) throw NumericError("non-finite gradient for parameter '" + g.name + "'");
  }

  const auto& opt = state.options_;
  state.step_ += 1;
  const double t = static_cast<double>(state.step_);
  const double correction1 = 1.0 - std::pow(opt.beta1, t);
  const double correction2 = 1.0 - std::pow(opt.beta2, t);

  for (std::size_t p = 0; p < params.size(); ++p) {
    auto theta = params.entry(p).value.data();
    const auto g = grads.entry(p).value.data();
    auto m = state.m_.entry(p).value.data();
    auto v = state.v_.entry(p).value.data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
  }
}

}  // namespace faircl
