#include "faircl/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "faircl/error.hpp"

namespace faircl {
namespace {

void check_pair(const Tensor& logits, const Tensor& targets, std::span<const double> weights,
                const char* what) {
  if (logits.rank() != 2) {
    throw InputError(std::string(what) + ": logits must be rank 2, got " + shape_string(logits.shape()));
  }
  if (targets.shape() != logits.shape()) {
    throw InputError(std::string(what) + ": targets " + shape_string(targets.shape()) +
                     " do not match logits " + shape_string(logits.shape()));
  }
  if (!weights.empty() && weights.size() != logits.dim(0)) {
    throw InputError(std::string(what) + ": expected " + std::to_string(logits.dim(0)) +
                     " sample weights, got " + std::to_string(weights.size()));
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw InputError(std::string(what) + ": sample weights must be finite and > 0");
    }
  }
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) throw InputError("softmax: logits must be rank 2");
  Tensor out(logits.shape());
  const std::size_t rows = logits.dim(0);
  const std::size_t cols = logits.dim(1);
  for (std::size_t r = 0; r < rows; ++r) {
    double peak = logits(r, 0);
    for (std::size_t c = 1; c < cols; ++c) peak = std::max(peak, logits(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out(r, c) = std::exp(logits(r, c) - peak);
      total += out(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) out(r, c) /= total;
  }
  return out;
}

Tensor sigmoid(const Tensor& logits) {
  Tensor out(logits.shape());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = stable_sigmoid(logits[i]);
  return out;
}

LossResult softmax_cross_entropy(const Tensor& logits, const Tensor& targets,
                                 std::span<const double> weights) {
  check_pair(logits, targets, weights, "softmax_cross_entropy");
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);

  for (std::size_t r = 0; r < batch; ++r) {
    int ones = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double y = targets(r, c);
      if (y == 1.0) {
        ++ones;
      } else if (y != 0.0) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) throw InputError("softmax_cross_entropy: target row " + std::to_string(r) + " is not one-hot");
  }

  LossResult result{0.0, Tensor(logits.shape())};
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    const double w = weights.empty() ? 1.0 : weights[r];
    double peak = logits(r, 0);
    for (std::size_t c = 1; c < classes; ++c) peak = std::max(peak, logits(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(logits(r, c) - peak);
    const double log_norm = peak + std::log(total);
    for (std::size_t c = 0; c < classes; ++c) {
      const double log_p = logits(r, c) - log_norm;
      const double y = targets(r, c);
      if (y != 0.0) result.value -= w * y * log_p * inv_batch;
      result.grad(r, c) = w * (std::exp(log_p) - y) * inv_batch;
    }
  }
  return result;
}

LossResult sigmoid_binary_cross_entropy(const Tensor& logits, const Tensor& targets,
                                        std::span<const double> weights) {
  check_pair(logits, targets, weights, "sigmoid_binary_cross_entropy");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] != 0.0 && targets[i] != 1.0) {
      throw InputError("sigmoid_binary_cross_entropy: label at row " + std::to_string(i / targets.dim(1)) +
                       " is outside {0, 1}");
    }
  }
  const std::size_t batch = logits.dim(0);
  const std::size_t labels = logits.dim(1);
  const double inv_cells = 1.0 / static_cast<double>(batch * labels);

  LossResult result{0.0, Tensor(logits.shape())};
  for (std::size_t r = 0; r < batch; ++r) {
    const double w = weights.empty() ? 1.0 : weights[r];
    for (std::size_t c = 0; c < labels; ++c) {
      const double z = logits(r, c);
      const double y = targets(r, c);
      // -[y log s(z) + (1-y) log(1 - s(z))] = softplus(z) - y z
      result.value += w * (softplus(z) - y * z) * inv_cells;
      result.grad(r, c) = w * (stable_sigmoid(z) - y) * inv_cells;
    }
  }
  return result;
}

}  // namespace faircl
