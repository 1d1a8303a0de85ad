#include "faircl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "faircl/error.hpp"
#include "faircl/log.hpp"
#include "faircl/loss.hpp"
#include "faircl/replay.hpp"
#include "faircl/rng.hpp"

namespace faircl {
namespace {

std::vector<double> sample_weights(std::span<const Sample* const> batch, const LossWeights& weights) {
  if (weights.by_domain.empty()) return {};
  std::vector<double> w;
  w.reserve(batch.size());
  for (const Sample* s : batch) {
    if (s->domain < 0 || static_cast<std::size_t>(s->domain) >= weights.by_domain.size()) {
      throw InputError("sample '" + s->id + "' has no loss weight for its domain");
    }
    w.push_back(weights.by_domain[static_cast<std::size_t>(s->domain)]);
  }
  return w;
}

std::vector<int> domain_ids(std::span<const Sample* const> batch, std::size_t domains) {
  std::vector<int> ids;
  ids.reserve(batch.size());
  for (const Sample* s : batch) {
    if (s->domain < 0 || static_cast<std::size_t>(s->domain) >= domains) {
      throw InputError("sample '" + s->id + "' is missing a domain label");
    }
    ids.push_back(s->domain);
  }
  return ids;
}

// Multilabel ddc target: the sample's labels inside its own domain block.
Tensor joint_multilabel_targets(std::span<const Sample* const> batch, std::size_t domains, std::size_t labels) {
  const Tensor bits = multilabel_targets(batch, labels);
  const auto ids = domain_ids(batch, domains);
  Tensor out({batch.size(), domains * labels});
  for (std::size_t r = 0; r < batch.size(); ++r) {
    for (std::size_t l = 0; l < labels; ++l) out(r, static_cast<std::size_t>(ids[r]) * labels + l) = bits(r, l);
  }
  return out;
}

std::vector<const Sample*> pointers(std::span<const Sample> samples) {
  std::vector<const Sample*> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(&s);
  return out;
}

}  // namespace

LossResult batch_loss(const Model& model, const Tensor& logits, std::span<const Sample* const> batch,
                      const LossWeights& weights) {
  const HeadSpec& head = model.head();
  const auto w = sample_weights(batch, weights);
  const bool multilabel = model.mode() == TaskMode::kMultilabel;
  Tensor targets;
  if (head.kind == HeadKind::kDomainDiscriminative) {
    targets = multilabel ? joint_multilabel_targets(batch, head.domains, head.classes)
                         : joint_targets(batch, head.domains, head.classes);
  } else {
    targets = multilabel ? multilabel_targets(batch, head.classes) : one_hot_targets(batch, head.classes);
  }
  return multilabel ? sigmoid_binary_cross_entropy(logits, targets, w) : softmax_cross_entropy(logits, targets, w);
}

double train_task(Model& model, std::span<const Sample> data, const TrainOptions& options, std::size_t task,
                  ContinualStrategy* strategy, const LossWeights& weights, const StepCallback& on_step) {
  if (data.empty()) throw InputError("task " + std::to_string(task) + " has no training samples");
  if (options.epochs == 0) throw ConfigError("epochs must be >= 1");
  if (options.batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (!(options.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");

  const bool dic = model.head().kind == HeadKind::kDomainIndependent;
  const ReplayBuffer* buffer = strategy != nullptr ? strategy->replay() : nullptr;
  const bool rehearse = buffer != nullptr && !buffer->empty();
  if (buffer != nullptr && buffer->empty()) {
    log_info("task " + std::to_string(task) + ": replay buffer empty, training on new samples only");
  }
  if (strategy != nullptr) strategy->begin_task(model, task);

  const std::uint64_t task_seed = mix_seed(options.seed, 1000 + task);
  Rng rng = make_rng(task_seed, 0);
  std::bernoulli_distribution coin(0.5);
  AdamState adam(model.parameters(), options.adam);
  const auto all = pointers(data);
  std::vector<std::size_t> order(all.size());
  double last_loss = 0.0;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      const std::size_t take = std::min(options.batch_size, order.size() - cursor);
      std::vector<const Sample*> fresh(take);
      for (std::size_t k = 0; k < take; ++k) fresh[k] = all[order[cursor + k]];

      StepLog log{task, epoch, step, 0.0, 0.0, take, 0, buffer != nullptr && !rehearse};
      std::vector<const Sample*> batch;
      if (rehearse) {
        MixedBatch mixed = interleave_batch(fresh, *buffer, rng);
        batch = std::move(mixed.samples);
        log.new_count = mixed.new_count;
        log.replay_count = mixed.replay_count;
        cursor += mixed.new_count;
      } else {
        batch = std::move(fresh);
        cursor += take;
      }

      std::vector<std::uint8_t> flips;
      if (options.augment) {
        flips.resize(batch.size());
        for (auto& f : flips) f = coin(rng) ? 1 : 0;
      }
      const Tensor x = stack_inputs(batch, flips);
      std::vector<int> ids;
      ForwardOptions fopt;
      fopt.phase = Phase::kTrain;
      fopt.dropout_seed = mix_seed(task_seed, 1 + step);
      if (dic) {
        ids = domain_ids(batch, model.head().domains);
        fopt.domain_ids = ids;
      }
      auto fwd = forward(model, x, fopt);
      LossResult loss = batch_loss(model, fwd.logits, batch, weights);
      if (!std::isfinite(loss.value)) {
        throw NumericError("task " + std::to_string(task) + ", step " + std::to_string(step) +
                           ": non-finite loss");
      }
      Gradients task_grads = backward(fwd.tape, loss.grad);
      apply_batch_statistics(model, fwd.tape);

      Gradients total = task_grads;
      if (strategy != nullptr) {
        log.penalty = strategy->penalty(model.parameters(), &total);
        if (!std::isfinite(log.penalty)) {
          throw NumericError("task " + std::to_string(task) + ", step " + std::to_string(step) +
                             ": non-finite penalty");
        }
      }
      const bool track = strategy != nullptr && strategy->kind() == StrategyKind::kSi;
      ParameterSet before;
      if (track) before = model.parameters();
      try {
        adam_step(model.parameters(), total, adam, options.learning_rate);
      } catch (const NumericError& e) {
        throw NumericError("task " + std::to_string(task) + ", step " + std::to_string(step) + ": " + e.what());
      }
      if (track) strategy->after_step(task_grads, before, model.parameters());

      log.loss = loss.value;
      last_loss = loss.value;
      if (on_step) on_step(log);
      ++step;
    }
  }
  if (strategy != nullptr) strategy->end_task(model, data);
  return last_loss;
}

Tensor predict(const Model& model, std::span<const Sample> samples, std::size_t batch_size) {
  if (samples.empty()) throw InputError("predict: no samples");
  const HeadSpec& head = model.head();
  const bool multilabel = model.mode() == TaskMode::kMultilabel;
  const auto all = pointers(samples);
  Tensor out({samples.size(), head.classes});
  for (std::size_t start = 0; start < all.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, all.size() - start);
    std::span<const Sample* const> batch(all.data() + start, n);
    const Tensor logits = predict_logits(model, stack_inputs(batch));
    Tensor scores;
    if (head.kind == HeadKind::kDomainDiscriminative) {
      if (multilabel) {
        // Sum over domains of p(domain, label), capped at 1.
        const Tensor p = sigmoid(logits);
        scores = Tensor({n, head.classes});
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t d = 0; d < head.domains; ++d) {
            for (std::size_t l = 0; l < head.classes; ++l) scores(r, l) += p(r, d * head.classes + l);
          }
        }
        for (double& v : scores.data()) v = std::min(v, 1.0);
      } else {
        scores = ddc_decode(logits, head.domains, head.classes);
      }
    } else {
      scores = multilabel ? sigmoid(logits) : softmax(logits);
    }
    std::copy(scores.data().begin(), scores.data().end(), out.data().begin() + start * head.classes);
  }
  return out;
}

Tensor targets_of(std::span<const Sample> samples, TaskMode mode, std::size_t classes) {
  const auto all = pointers(samples);
  return mode == TaskMode::kMultilabel ? multilabel_targets(all, classes) : one_hot_targets(all, classes);
}

double evaluate(const Model& model, std::span<const Sample> samples, std::size_t batch_size) {
  const Tensor scores = predict(model, samples, batch_size);
  return accuracy(scores, targets_of(samples, model.mode(), model.head().classes), model.mode());
}

}  // namespace faircl
