#pragma once

#include <span>

#include "faircl/tensor.hpp"

namespace faircl {

struct LossResult {
  double value = 0.0;
  Tensor grad;  // d(value)/d(logits), same shape as logits
};

// Row-wise softmax using the max-shifted log-sum-exp form.
Tensor softmax(const Tensor& logits);
Tensor sigmoid(const Tensor& logits);

// loss = -(1/B) * sum_s w_s * sum_c y_sc * log softmax(z)_sc
// `targets` rows must be one-hot. Empty `weights` means all ones.
LossResult softmax_cross_entropy(const Tensor& logits, const Tensor& targets,
                                 std::span<const double> weights = {});

// Mean over all B*L cells of the binary cross-entropy on sigmoid(z). Per-sample
// weights scale each row's contribution; empty means all ones.
LossResult sigmoid_binary_cross_entropy(const Tensor& logits, const Tensor& targets,
                                        std::span<const double> weights = {});

}  // namespace faircl
