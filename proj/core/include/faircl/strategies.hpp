#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "faircl/data.hpp"
#include "faircl/model.hpp"
#include "faircl/parameters.hpp"
#include "faircl/replay.hpp"

namespace faircl {

enum class StrategyKind { kNone, kEwc, kEwcOnline, kSi, kMas, kRehearsal };

std::string to_string(StrategyKind kind);
// "none", "ewc", "ewc-online", "si", "mas", "nr".
StrategyKind parse_strategy_kind(std::string_view text);

// `coefficient` is the effective value used in the formulas: lambda for EWC,
// EWC-Online and MAS, c for SI, buffer capacity in samples for NR.
struct StrategyConfig {
  StrategyKind kind = StrategyKind::kNone;
  double coefficient = 0.0;
  double gamma = 1.0;  // EWC-Online decay
  double xi = 0.1;     // SI damping

  // Coefficient tables are printed in units of 10^3.
  static StrategyConfig from_table(StrategyKind kind, double tabled);

  void validate() const;  // throws ConfigError
};

nlohmann::json to_json(const StrategyConfig& cfg);
// Accepts {"kind", "coefficient" | "tabled", "gamma", "xi"}.
StrategyConfig strategy_config_from_json(const nlohmann::json& j);

// Adds `scale * (params - anchor) * weight` into `grad` when non-null and
// returns sum(weight * (params - anchor)^2). Shapes must match.
double weighted_squared_distance(const ParameterSet& params, const ParameterSet& anchor, const ParameterSet& weight,
                                 double grad_scale = 0.0, Gradients* grad = nullptr);

// ---- EWC -------------------------------------------------------------------

struct EwcConsolidation {
  struct Entry {
    ParameterSet anchor;
    ParameterSet fisher;
  };
  std::vector<Entry> entries;
};

// Mean over samples of the squared gradient of log p(y | x) at the
// ground-truth labels, evaluated with frozen batch-norm statistics.
// Single-head models only. Throws InputError on empty data.
ParameterSet empirical_fisher(const Model& model, std::span<const Sample> samples);

void ewc_consolidate(EwcConsolidation& state, const Model& model, std::span<const Sample> samples);

// (lambda / 2) * sum_tasks sum_i F_i (theta_i - anchor_i)^2. Adds the
// gradient into `grad` when non-null.
double ewc_penalty(const ParameterSet& params, const EwcConsolidation& state, double lambda,
                   Gradients* grad = nullptr);

// ---- EWC-Online ------------------------------------------------------------

struct EwcOnlineState {
  ParameterSet fisher;  // running F~, empty before the first update
  ParameterSet anchor;
  double gamma = 1.0;
};

// F~ <- gamma * F~ + new_fisher; anchor <- params. Throws ConfigError when
// gamma is outside (0, 1].
void ewc_online_update(EwcOnlineState& state, const ParameterSet& new_fisher, const ParameterSet& params);

// lambda * sum_i F~_i (theta_i - anchor_i)^2.
double ewc_online_penalty(const ParameterSet& params, const EwcOnlineState& state, double lambda,
                          Gradients* grad = nullptr);

// ---- Synaptic Intelligence -------------------------------------------------

struct SiState {
  ParameterSet omega;       // path integral of the current task
  ParameterSet importance;  // accumulated Omega
  ParameterSet start;       // parameters at the start of the current task
  double xi = 0.1;
};

// Zero omega and importance, start = params.
void si_init(SiState& state, const ParameterSet& params, double xi);
// omega += -grad * delta.
void si_accumulate(SiState& state, const Gradients& grads, const ParameterSet& delta);
// Omega += max(omega, 0) / ((end - start)^2 + xi); omega <- 0; start <- end.
void si_consolidate(SiState& state, const ParameterSet& end);
// c * sum_k Omega_k (start_k - theta_k)^2.
double si_penalty(const ParameterSet& params, const SiState& state, double c, Gradients* grad = nullptr);

// ---- Memory Aware Synapses -------------------------------------------------

enum class OutputTransform {
  kSoftmax,   // multiclass probabilities
  kSigmoid,   // multilabel probabilities
  kIdentity,  // raw logits
};

struct MasState {
  ParameterSet importance;  // empty before the first update
  ParameterSet anchor;
};

// Mean over samples of |d ||f(x)||^2 / d theta|, with f the transformed
// model output. Labels are not used. Throws InputError on empty data.
ParameterSet mas_estimate_importance(const Model& model, std::span<const Sample> samples,
                                     OutputTransform transform);

// Omega += new_importance; anchor <- params.
void mas_update(MasState& state, const ParameterSet& new_importance, const ParameterSet& params);

// lambda * sum Omega (theta - anchor)^2.
double mas_penalty(const ParameterSet& params, const MasState& state, double lambda, Gradients* grad = nullptr);

// ---- Training-loop interface -----------------------------------------------

class ContinualStrategy {
 public:
  virtual ~ContinualStrategy() = default;

  virtual StrategyKind kind() const = 0;
  virtual void begin_task(const Model& model, std::size_t task);
  // Penalty value at `params`; its gradient is added into `grad` when non-null.
  virtual double penalty(const ParameterSet& params, Gradients* grad) const;
  // Called after every optimizer step with the task-loss gradient.
  virtual void after_step(const Gradients& task_grads, const ParameterSet& before, const ParameterSet& after);
  virtual void end_task(const Model& model, std::span<const Sample> train);
  virtual const ReplayBuffer* replay() const { return nullptr; }

  virtual nlohmann::json save() const = 0;
  virtual void load(const nlohmann::json& state) = 0;
};

// Returns nullptr for StrategyKind::kNone.
std::unique_ptr<ContinualStrategy> make_strategy(const StrategyConfig& cfg, TaskMode mode, std::uint64_t seed);

}  // namespace faircl
