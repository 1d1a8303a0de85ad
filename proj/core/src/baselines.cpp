#include "faircl/baselines.hpp"

#include "faircl/error.hpp"
#include "faircl/log.hpp"

namespace faircl {
namespace {

void require_tasks(const TaskStream& stream) {
  if (stream.tasks.empty()) throw InputError("task stream is empty");
  for (const auto& t : stream.tasks) {
    if (t.train.empty()) throw InputError("task '" + t.name + "' has no training samples");
    if (t.test.empty()) throw InputError("task '" + t.name + "' has no test samples");
  }
}

UnionResult train_union(Model& model, const TaskStream& stream, const TrainOptions& options,
                        const LossWeights& weights, const StepCallback& on_step) {
  require_tasks(stream);
  const auto data = stream.union_train();
  train_task(model, data, options, 0, nullptr, weights, on_step);
  UnionResult out;
  for (const auto& t : stream.tasks) out.domain_accuracies.push_back(evaluate(model, t.test));
  return out;
}

void require_head(const Model& model, HeadKind kind, const TaskStream& stream) {
  if (model.head().kind != kind) {
    throw ConfigError("expected a " + to_string(kind) + " head, model has " + to_string(model.head().kind));
  }
  if (model.head().domains != stream.tasks.size()) {
    throw ConfigError("model head covers " + std::to_string(model.head().domains) + " domains, stream has " +
                      std::to_string(stream.tasks.size()));
  }
}

}  // namespace

std::map<std::string, double> compute_ss_weights(const std::map<std::string, std::size_t>& counts) {
  std::size_t total = 0;
  std::size_t present = 0;
  for (const auto& [name, n] : counts) {
    total += n;
    if (n > 0) ++present;
  }
  if (present == 0) throw InputError("strategic sampling: no domain has samples");
  std::map<std::string, double> w;
  for (const auto& [name, n] : counts) {
    if (n == 0) {
      log_warning("strategic sampling: domain '" + name + "' has no samples and gets no weight");
      continue;
    }
    w[name] = static_cast<double>(total) / (static_cast<double>(present) * static_cast<double>(n));
  }
  return w;
}

SequentialResult run_sequential(Model& model, const TaskStream& stream, const TrainOptions& options,
                                ContinualStrategy* strategy, const SequentialHooks& hooks) {
  require_tasks(stream);
  const std::size_t n = stream.tasks.size();
  SequentialResult out;
  out.matrix = hooks.first_task > 0 ? hooks.resume_matrix : AccuracyMatrix(n);
  if (out.matrix.tasks() != n) throw InputError("resume matrix does not match the task stream");
  for (std::size_t t = hooks.first_task; t < n; ++t) {
    train_task(model, stream.tasks[t].train, options, t, strategy, {}, hooks.on_step);
    const std::size_t last = hooks.evaluate_future ? n - 1 : t;
    for (std::size_t j = 0; j <= last; ++j) out.matrix.set(t, j, evaluate(model, stream.tasks[j].test));
    if (hooks.on_task_end) hooks.on_task_end(t, model, strategy, out.matrix);
  }
  for (std::size_t j = 0; j < n; ++j) out.final_accuracies.push_back(out.matrix.at(n - 1, j));
  return out;
}

SequentialResult run_finetune(Model& model, const TaskStream& stream, const TrainOptions& options,
                              const SequentialHooks& hooks) {
  return run_sequential(model, stream, options, nullptr, hooks);
}

UnionResult run_offline(Model& model, const TaskStream& stream, const TrainOptions& options,
                        const StepCallback& on_step) {
  return train_union(model, stream, options, {}, on_step);
}

UnionResult run_ss(Model& model, const TaskStream& stream, const TrainOptions& options,
                   const StepCallback& on_step) {
  require_tasks(stream);
  std::map<std::string, std::size_t> counts;
  for (const auto& t : stream.tasks) counts[t.name] = t.train.size();
  const auto w = compute_ss_weights(counts);
  LossWeights weights;
  for (const auto& t : stream.tasks) weights.by_domain.push_back(w.at(t.name));
  return train_union(model, stream, options, weights, on_step);
}

UnionResult run_ddc(Model& model, const TaskStream& stream, const TrainOptions& options,
                    const StepCallback& on_step) {
  require_head(model, HeadKind::kDomainDiscriminative, stream);
  return train_union(model, stream, options, {}, on_step);
}

UnionResult run_dic(Model& model, const TaskStream& stream, const TrainOptions& options,
                    const StepCallback& on_step) {
  require_head(model, HeadKind::kDomainIndependent, stream);
  return train_union(model, stream, options, {}, on_step);
}

}  // namespace faircl
