#pragma once

#include <map>
#include <string>
#include <vector>

#include "faircl/data.hpp"
#include "faircl/metrics.hpp"
#include "faircl/model.hpp"
#include "faircl/strategies.hpp"
#include "faircl/trainer.hpp"

namespace faircl {

// w_i = total / (N * count_i) over the N domains with count_i > 0. Domains
// with a zero count are left out with a warning. Throws InputError when no
// domain has samples.
std::map<std::string, double> compute_ss_weights(const std::map<std::string, std::size_t>& counts);

struct SequentialHooks {
  StepCallback on_step;
  // Called after task t is trained and evaluated.
  std::function<void(std::size_t task, const Model&, const ContinualStrategy*, const AccuracyMatrix&)> on_task_end;
  // Evaluate task j after learning task i also for j > i.
  bool evaluate_future = false;
  // Tasks before this index are assumed done (resume); their rows must
  // already be in `resume_matrix`.
  std::size_t first_task = 0;
  AccuracyMatrix resume_matrix;
};

struct SequentialResult {
  AccuracyMatrix matrix;
  std::vector<double> final_accuracies;  // accuracy on every task after the last one
};

// Trains task by task, evaluating every task's test split after each one.
SequentialResult run_sequential(Model& model, const TaskStream& stream, const TrainOptions& options,
                                ContinualStrategy* strategy, const SequentialHooks& hooks = {});

// Plain sequential training without any mechanism against forgetting.
SequentialResult run_finetune(Model& model, const TaskStream& stream, const TrainOptions& options,
                              const SequentialHooks& hooks = {});

struct UnionResult {
  std::vector<double> domain_accuracies;  // one per task of the stream, in order
};

// One training phase over the union of every task's training split, then
// per-domain evaluation.
UnionResult run_offline(Model& model, const TaskStream& stream, const TrainOptions& options,
                        const StepCallback& on_step = {});
// Offline training with the loss weighted by compute_ss_weights.
UnionResult run_ss(Model& model, const TaskStream& stream, const TrainOptions& options,
                   const StepCallback& on_step = {});
// Offline training of a ddc / dic headed model. Throws ConfigError on a
// head mismatch and InputError when a sample lacks a domain label.
UnionResult run_ddc(Model& model, const TaskStream& stream, const TrainOptions& options,
                    const StepCallback& on_step = {});
UnionResult run_dic(Model& model, const TaskStream& stream, const TrainOptions& options,
                    const StepCallback& on_step = {});

}  // namespace faircl
