#include "faircl/strategies.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "faircl/checkpoint.hpp"
#include "faircl/error.hpp"
#include "faircl/loss.hpp"

namespace faircl {
namespace {

void require_single_head(const Model& model, const char* what) {
  if (model.head().kind != HeadKind::kSingle) {
    throw ConfigError(std::string(what) + " requires a single-head model, got " + to_string(model.head().kind));
  }
}

// Per-sample gradient of a function of the logits, evaluated in eval phase.
template <class LogitGrad, class Accumulate>
void per_sample_gradients(const Model& model, std::span<const Sample> samples, LogitGrad logit_grad,
                          Accumulate accumulate) {
  for (const Sample& s : samples) {
    const Sample* ptr = &s;
    const Tensor x = stack_inputs(std::span<const Sample* const>(&ptr, 1));
    ForwardOptions opt;
    opt.phase = Phase::kEval;
    auto fwd = forward(model, x, opt);
    const Tensor g = logit_grad(fwd.logits, s);
    accumulate(backward(fwd.tape, g));
  }
}

ParameterSet params_from(const nlohmann::json& j, const char* key) {
  return j.contains(key) ? parameter_set_from_json(j.at(key)) : ParameterSet();
}

}  // namespace

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kNone:
      return "none";
    case StrategyKind::kEwc:
      return "ewc";
    case StrategyKind::kEwcOnline:
      return "ewc-online";
    case StrategyKind::kSi:
      return "si";
    case StrategyKind::kMas:
      return "mas";
    case StrategyKind::kRehearsal:
      return "nr";
  }
  return "none";
}

StrategyKind parse_strategy_kind(std::string_view text) {
  if (text == "none") return StrategyKind::kNone;
  if (text == "ewc") return StrategyKind::kEwc;
  if (text == "ewc-online") return StrategyKind::kEwcOnline;
  if (text == "si") return StrategyKind::kSi;
  if (text == "mas") return StrategyKind::kMas;
  if (text == "nr") return StrategyKind::kRehearsal;
  throw ConfigError("unknown strategy '" + std::string(text) + "' (expected none, ewc, ewc-online, si, mas, nr)");
}

StrategyConfig StrategyConfig::from_table(StrategyKind kind, double tabled) {
  StrategyConfig cfg;
  cfg.kind = kind;
  cfg.coefficient = tabled * 1e3;
  return cfg;
}

void StrategyConfig::validate() const {
  if (!(coefficient >= 0.0) || !std::isfinite(coefficient)) {
    throw ConfigError("strategy coefficient must be finite and >= 0");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("ewc-online gamma must lie in (0, 1]");
  if (!(xi > 0.0)) throw ConfigError("si xi must be > 0");
  if (kind == StrategyKind::kRehearsal && (coefficient < 1.0 || coefficient != std::floor(coefficient))) {
    throw ConfigError("nr coefficient is a buffer capacity and must be a positive integer");
  }
}

nlohmann::json to_json(const StrategyConfig& cfg) {
  return {{"kind", to_string(cfg.kind)}, {"coefficient", cfg.coefficient}, {"gamma", cfg.gamma}, {"xi", cfg.xi}};
}

StrategyConfig strategy_config_from_json(const nlohmann::json& j) {
  StrategyConfig cfg;
  try {
    cfg.kind = parse_strategy_kind(j.value("kind", std::string("none")));
    if (j.contains("tabled")) {
      if (j.contains("coefficient")) throw ConfigError("strategy: give either coefficient or tabled, not both");
      cfg.coefficient = StrategyConfig::from_table(cfg.kind, j.at("tabled").get<double>()).coefficient;
    } else {
      cfg.coefficient = j.value("coefficient", cfg.coefficient);
    }
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.xi = j.value("xi", cfg.xi);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("strategy config: ") + e.what());
  }
  return cfg;
}

double weighted_squared_distance(const ParameterSet& params, const ParameterSet& anchor, const ParameterSet& weight,
                                 double grad_scale, Gradients* grad) {
  params.require_same_layout(anchor, "penalty anchor");
  params.require_same_layout(weight, "penalty importance");
  double total = 0.0;
  for (std::size_t e = 0; e < params.size(); ++e) {
    const auto& theta = params.entry(e).value;
    const auto& star = anchor.entry(e).value;
    const auto& w = weight.entry(e).value;
    double* g = grad != nullptr ? grad->at(params.entry(e).name).data().data() : nullptr;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double d = theta[i] - star[i];
      total += w[i] * d * d;
      if (g != nullptr) g[i] += grad_scale * w[i] * d;
    }
  }
  return total;
}

ParameterSet empirical_fisher(const Model& model, std::span<const Sample> samples) {
  require_single_head(model, "empirical_fisher");
  if (samples.empty()) throw InputError("empirical_fisher: no samples");
  const std::size_t units = model.output_units();
  const bool multilabel = model.mode() == TaskMode::kMultilabel;
  ParameterSet fisher = model.parameters().zeros_like();
  per_sample_gradients(
      model, samples,
      [&](const Tensor& logits, const Sample& s) {
        const Sample* ptr = &s;
        std::span<const Sample* const> one(&ptr, 1);
        // d(-log p(y|x))/dz: p - y for softmax, sigmoid(z) - y per label.
        if (multilabel) return sigmoid(logits) - multilabel_targets(one, units);
        return softmax(logits) - one_hot_targets(one, units);
      },
      [&](const Gradients& g) {
        for (std::size_t e = 0; e < g.size(); ++e) {
          auto& f = fisher.entry(e).value;
          const auto& ge = g.entry(e).value;
          for (std::size_t i = 0; i < f.size(); ++i) f[i] += ge[i] * ge[i];
        }
      });
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (auto& [name, f] : fisher) f *= inv;
  return fisher;
}

void ewc_consolidate(EwcConsolidation& state, const Model& model, std::span<const Sample> samples) {
  state.entries.push_back({model.parameters(), empirical_fisher(model, samples)});
}

double ewc_penalty(const ParameterSet& params, const EwcConsolidation& state, double lambda, Gradients* grad) {
  double total = 0.0;
  for (const auto& e : state.entries) total += weighted_squared_distance(params, e.anchor, e.fisher, lambda, grad);
  return 0.5 * lambda * total;
}

void ewc_online_update(EwcOnlineState& state, const ParameterSet& new_fisher, const ParameterSet& params) {
  if (!(state.gamma > 0.0 && state.gamma <= 1.0)) throw ConfigError("ewc-online gamma must lie in (0, 1]");
  new_fisher.require_same_layout(params, "ewc-online fisher");
  if (state.fisher.empty()) {
    state.fisher = new_fisher;
  } else {
    state.fisher.require_same_layout(new_fisher, "ewc-online fisher");
    for (std::size_t e = 0; e < state.fisher.size(); ++e) {
      auto& f = state.fisher.entry(e).value;
      f *= state.gamma;
      f += new_fisher.entry(e).value;
    }
  }
  state.anchor = params;
}

double ewc_online_penalty(const ParameterSet& params, const EwcOnlineState& state, double lambda, Gradients* grad) {
  if (state.fisher.empty()) return 0.0;
  return lambda * weighted_squared_distance(params, state.anchor, state.fisher, 2.0 * lambda, grad);
}

void si_init(SiState& state, const ParameterSet& params, double xi) {
  if (!(xi > 0.0)) throw ConfigError("si xi must be > 0");
  state.xi = xi;
  state.omega = params.zeros_like();
  state.importance = params.zeros_like();
  state.start = params;
}

void si_accumulate(SiState& state, const Gradients& grads, const ParameterSet& delta) {
  state.omega.require_same_layout(grads, "si gradients");
  state.omega.require_same_layout(delta, "si parameter change");
  for (std::size_t e = 0; e < state.omega.size(); ++e) {
    auto& w = state.omega.entry(e).value;
    const auto& g = grads.entry(e).value;
    const auto& d = delta.entry(e).value;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= g[i] * d[i];
  }
}

void si_consolidate(SiState& state, const ParameterSet& end) {
  if (!(state.xi > 0.0)) throw ConfigError("si xi must be > 0");
  state.start.require_same_layout(end, "si consolidation");
  for (std::size_t e = 0; e < state.omega.size(); ++e) {
    auto& big = state.importance.entry(e).value;
    auto& w = state.omega.entry(e).value;
    const auto& a = state.start.entry(e).value;
    const auto& b = end.entry(e).value;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double d = b[i] - a[i];
      big[i] += std::max(w[i], 0.0) / (d * d + state.xi);
      w[i] = 0.0;
    }
  }
  state.start = end;
}

double si_penalty(const ParameterSet& params, const SiState& state, double c, Gradients* grad) {
  if (state.importance.empty()) return 0.0;
  return c * weighted_squared_distance(params, state.start, state.importance, 2.0 * c, grad);
}

ParameterSet mas_estimate_importance(const Model& model, std::span<const Sample> samples,
                                     OutputTransform transform) {
  if (samples.empty()) throw InputError("mas_estimate_importance: no samples");
  ParameterSet omega = model.parameters().zeros_like();
  per_sample_gradients(
      model, samples,
      [&](const Tensor& logits, const Sample&) {
        // d ||f(z)||^2 / dz for the chosen output map.
        Tensor g(logits.shape());
        switch (transform) {
          case OutputTransform::kIdentity:
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * logits[i];
            break;
          case OutputTransform::kSigmoid: {
            const Tensor p = sigmoid(logits);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * p[i] * p[i] * (1.0 - p[i]);
            break;
          }
          case OutputTransform::kSoftmax: {
            const Tensor p = softmax(logits);
            for (std::size_t r = 0; r < p.dim(0); ++r) {
              double sq = 0.0;
              for (std::size_t c = 0; c < p.dim(1); ++c) sq += p(r, c) * p(r, c);
              for (std::size_t c = 0; c < p.dim(1); ++c) g(r, c) = 2.0 * p(r, c) * (p(r, c) - sq);
            }
            break;
          }
        }
        return g;
      },
      [&](const Gradients& g) {
        for (std::size_t e = 0; e < g.size(); ++e) {
          auto& o = omega.entry(e).value;
          const auto& ge = g.entry(e).value;
          for (std::size_t i = 0; i < o.size(); ++i) o[i] += std::abs(ge[i]);
        }
      });
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (auto& [name, o] : omega) o *= inv;
  return omega;
}

void mas_update(MasState& state, const ParameterSet& new_importance, const ParameterSet& params) {
  new_importance.require_same_layout(params, "mas importance");
  if (state.importance.empty()) {
    state.importance = new_importance;
  } else {
    state.importance.require_same_layout(new_importance, "mas importance");
    for (std::size_t e = 0; e < state.importance.size(); ++e) {
      state.importance.entry(e).value += new_importance.entry(e).value;
    }
  }
  state.anchor = params;
}

double mas_penalty(const ParameterSet& params, const MasState& state, double lambda, Gradients* grad) {
  if (state.importance.empty()) return 0.0;
  return lambda * weighted_squared_distance(params, state.anchor, state.importance, 2.0 * lambda, grad);
}

void ContinualStrategy::begin_task(const Model&, std::size_t) {}
double ContinualStrategy::penalty(const ParameterSet&, Gradients*) const { return 0.0; }
void ContinualStrategy::after_step(const Gradients&, const ParameterSet&, const ParameterSet&) {}
void ContinualStrategy::end_task(const Model&, std::span<const Sample>) {}

namespace {

class EwcStrategy final : public ContinualStrategy {
 public:
  explicit EwcStrategy(double lambda) : lambda_(lambda) {}
  StrategyKind kind() const override { return StrategyKind::kEwc; }
  double penalty(const ParameterSet& params, Gradients* grad) const override {
    return ewc_penalty(params, state_, lambda_, grad);
  }
  void end_task(const Model& model, std::span<const Sample> train) override { ewc_consolidate(state_, model, train); }
  nlohmann::json save() const override {
    auto entries = nlohmann::json::array();
    for (const auto& e : state_.entries) entries.push_back({{"anchor", to_json(e.anchor)}, {"fisher", to_json(e.fisher)}});
    return {{"entries", entries}};
  }
  void load(const nlohmann::json& j) override {
    state_.entries.clear();
    for (const auto& e : j.at("entries")) {
      state_.entries.push_back({parameter_set_from_json(e.at("anchor")), parameter_set_from_json(e.at("fisher"))});
    }
  }

 private:
  double lambda_;
  EwcConsolidation state_;
};

class EwcOnlineStrategy final : public ContinualStrategy {
 public:
  EwcOnlineStrategy(double lambda, double gamma) : lambda_(lambda) { state_.gamma = gamma; }
  StrategyKind kind() const override { return StrategyKind::kEwcOnline; }
  double penalty(const ParameterSet& params, Gradients* grad) const override {
    return ewc_online_penalty(params, state_, lambda_, grad);
  }
  void end_task(const Model& model, std::span<const Sample> train) override {
    ewc_online_update(state_, empirical_fisher(model, train), model.parameters());
  }
  nlohmann::json save() const override {
    return {{"fisher", to_json(state_.fisher)}, {"anchor", to_json(state_.anchor)}, {"gamma", state_.gamma}};
  }
  void load(const nlohmann::json& j) override {
    state_.fisher = params_from(j, "fisher");
    state_.anchor = params_from(j, "anchor");
    state_.gamma = j.at("gamma").get<double>();
  }

 private:
  double lambda_;
  EwcOnlineState state_;
};

class SiStrategy final : public ContinualStrategy {
 public:
  SiStrategy(double c, double xi) : c_(c), xi_(xi) {}
  StrategyKind kind() const override { return StrategyKind::kSi; }
  void begin_task(const Model& model, std::size_t) override {
    if (state_.start.empty()) si_init(state_, model.parameters(), xi_);
  }
  double penalty(const ParameterSet& params, Gradients* grad) const override {
    return si_penalty(params, state_, c_, grad);
  }
  void after_step(const Gradients& task_grads, const ParameterSet& before, const ParameterSet& after) override {
    ParameterSet delta = after;
    for (std::size_t e = 0; e < delta.size(); ++e) delta.entry(e).value -= before.entry(e).value;
    si_accumulate(state_, task_grads, delta);
  }
  void end_task(const Model& model, std::span<const Sample>) override { si_consolidate(state_, model.parameters()); }
  nlohmann::json save() const override {
    return {{"omega", to_json(state_.omega)},
            {"importance", to_json(state_.importance)},
            {"start", to_json(state_.start)},
            {"xi", state_.xi}};
  }
  void load(const nlohmann::json& j) override {
    state_.omega = params_from(j, "omega");
    state_.importance = params_from(j, "importance");
    state_.start = params_from(j, "start");
    state_.xi = j.at("xi").get<double>();
  }

 private:
  double c_;
  double xi_;
  SiState state_;
};

class MasStrategy final : public ContinualStrategy {
 public:
  MasStrategy(double lambda, OutputTransform transform) : lambda_(lambda), transform_(transform) {}
  StrategyKind kind() const override { return StrategyKind::kMas; }
  double penalty(const ParameterSet& params, Gradients* grad) const override {
    return mas_penalty(params, state_, lambda_, grad);
  }
  void end_task(const Model& model, std::span<const Sample> train) override {
    mas_update(state_, mas_estimate_importance(model, train, transform_), model.parameters());
  }
  nlohmann::json save() const override {
    return {{"importance", to_json(state_.importance)}, {"anchor", to_json(state_.anchor)}};
  }
  void load(const nlohmann::json& j) override {
    state_.importance = params_from(j, "importance");
    state_.anchor = params_from(j, "anchor");
  }

 private:
  double lambda_;
  OutputTransform transform_;
  MasState state_;
};

class RehearsalStrategy final : public ContinualStrategy {
 public:
  RehearsalStrategy(std::size_t capacity, std::uint64_t seed) : buffer_(capacity, seed) {}
  StrategyKind kind() const override { return StrategyKind::kRehearsal; }
  void end_task(const Model&, std::span<const Sample> train) override { buffer_.insert(train); }
  const ReplayBuffer* replay() const override { return &buffer_; }
  nlohmann::json save() const override { return {{"buffer", buffer_.save()}}; }
  void load(const nlohmann::json& j) override { buffer_ = ReplayBuffer::load(j.at("buffer")); }

 private:
  ReplayBuffer buffer_;
};

}  // namespace

std::unique_ptr<ContinualStrategy> make_strategy(const StrategyConfig& cfg, TaskMode mode, std::uint64_t seed) {
  cfg.validate();
  switch (cfg.kind) {
    case StrategyKind::kNone:
      return nullptr;
    case StrategyKind::kEwc:
      return std::make_unique<EwcStrategy>(cfg.coefficient);
    case StrategyKind::kEwcOnline:
      return std::make_unique<EwcOnlineStrategy>(cfg.coefficient, cfg.gamma);
    case StrategyKind::kSi:
      return std::make_unique<SiStrategy>(cfg.coefficient, cfg.xi);
    case StrategyKind::kMas:
      return std::make_unique<MasStrategy>(
          cfg.coefficient, mode == TaskMode::kMultilabel ? OutputTransform::kSigmoid : OutputTransform::kSoftmax);
    case StrategyKind::kRehearsal:
      return std::make_unique<RehearsalStrategy>(static_cast<std::size_t>(cfg.coefficient), seed);
  }
  return nullptr;
}

}  // namespace faircl
