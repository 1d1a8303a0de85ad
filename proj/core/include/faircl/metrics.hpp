#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "faircl/tensor.hpp"
#include "faircl/types.hpp"

namespace faircl {

// Fraction of correct predictions. `scores` are [B, M] class scores
// (multiclass, argmax against the one-hot targets) or [B, L] probabilities
// (multilabel, thresholded at 0.5 and pooled over all B*L cells).
// Throws InputError on empty or mismatched input.
double accuracy(const Tensor& scores, const Tensor& targets, TaskMode mode);

// Multilabel only: accuracy of each label column.
std::vector<double> per_label_accuracy(const Tensor& probabilities, const Tensor& targets);

// min / max over the domain accuracies. 1.0 when every accuracy is 0; 0.0
// when the minimum is 0 and the maximum is not. Throws InputError on empty
// input or values outside [0, 1].
double fairness(std::span<const double> domain_accuracies);
double fairness(const std::map<std::string, double>& domain_accuracies);

// Accuracy of every task after learning every task. at(learned, evaluated)
// holds the accuracy on task `evaluated` right after training on task
// `learned` (0-based). A sequential run fills the entries with
// evaluated <= learned.
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(std::size_t tasks);

  std::size_t tasks() const { return n_; }
  void set(std::size_t learned, std::size_t evaluated, double value);
  double at(std::size_t learned, std::size_t evaluated) const;
  bool has(std::size_t learned, std::size_t evaluated) const;
  // Every entry with evaluated <= learned is present.
  bool lower_complete() const;

  friend bool operator==(const AccuracyMatrix&, const AccuracyMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
  std::vector<bool> present_;
};

nlohmann::json to_json(const AccuracyMatrix& m);
AccuracyMatrix accuracy_matrix_from_json(const nlohmann::json& j);

enum class CfReading {
  // CF_i = mean over j < i of (acc on j after learning j) - (acc on j after learning i).
  kStated,
  // CF_i = mean over j < i of (acc on j after learning j) - (acc on i after learning j).
  kLiteral,
};

std::string to_string(CfReading reading);
CfReading parse_cf_reading(std::string_view text);

// Forgetting after learning task i (0-based). nullopt for i = 0.
std::optional<double> cf_score(const AccuracyMatrix& a, std::size_t i, CfReading reading = CfReading::kStated);

// Mean accuracy over tasks 0..i right after learning task i.
double overall_accuracy(const AccuracyMatrix& a, std::size_t i);

}  // namespace faircl
