#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "faircl/adam.hpp"
#include "faircl/data.hpp"
#include "faircl/loss.hpp"
#include "faircl/metrics.hpp"
#include "faircl/model.hpp"
#include "faircl/strategies.hpp"

namespace faircl {

struct TrainOptions {
  std::size_t epochs = 25;
  std::size_t batch_size = 24;
  double learning_rate = 1e-4;
  bool augment = true;  // horizontal flip with probability 0.5, on the fly
  std::uint64_t seed = 0;
  AdamOptions adam;
};

struct StepLog {
  std::size_t task = 0;
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;     // task loss
  double penalty = 0.0;  // strategy penalty
  std::size_t new_count = 0;
  std::size_t replay_count = 0;
  bool replay_fallback = false;  // rehearsal with an empty buffer
};

using StepCallback = std::function<void(const StepLog&)>;

// Per-domain loss weights indexed by Sample::domain; empty means all 1.
struct LossWeights {
  std::vector<double> by_domain;
};

// Trains `model` on `data` for options.epochs with a fresh Adam state.
// The strategy (may be null) contributes its penalty to every step and, for
// rehearsal, replaces half of every batch with buffered samples. Returns the
// task loss of the final step. Throws NumericError on a non-finite loss or
// gradient, naming the step.
double train_task(Model& model, std::span<const Sample> data, const TrainOptions& options, std::size_t task = 0,
                  ContinualStrategy* strategy = nullptr, const LossWeights& weights = {},
                  const StepCallback& on_step = {});

// Task loss and its logit gradient for a batch, by head kind and task mode.
LossResult batch_loss(const Model& model, const Tensor& logits, std::span<const Sample* const> batch,
                      const LossWeights& weights = {});

// Evaluation-mode class scores [n, M]: softmax / sigmoid probabilities;
// ddc marginalizes over domains; dic sums the head logits.
Tensor predict(const Model& model, std::span<const Sample> samples, std::size_t batch_size = 64);

// Targets in the layout `accuracy()` expects.
Tensor targets_of(std::span<const Sample> samples, TaskMode mode, std::size_t classes);

double evaluate(const Model& model, std::span<const Sample> samples, std::size_t batch_size = 64);

}  // namespace faircl
