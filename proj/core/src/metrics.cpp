#include "faircl/metrics.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

#include "faircl/error.hpp"
#include "faircl/log.hpp"

namespace faircl {
namespace {

void check_scores(const Tensor& scores, const Tensor& targets, const char* what) {
  if (scores.rank() != 2 || scores.dim(0) == 0) throw InputError(std::string(what) + ": empty input");
  if (targets.shape() != scores.shape()) {
    throw InputError(std::string(what) + ": targets " + shape_string(targets.shape()) + " do not match scores " +
                     shape_string(scores.shape()));
  }
}

std::size_t argmax_row(const Tensor& t, std::size_t r) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < t.dim(1); ++c) {
    if (t(r, c) > t(r, best)) best = c;
  }
  return best;
}

}  // namespace

double accuracy(const Tensor& scores, const Tensor& targets, TaskMode mode) {
  check_scores(scores, targets, "accuracy");
  const std::size_t rows = scores.dim(0);
  std::size_t correct = 0;
  if (mode == TaskMode::kMulticlass) {
    for (std::size_t r = 0; r < rows; ++r) correct += argmax_row(scores, r) == argmax_row(targets, r) ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(rows);
  }
  for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] >= 0.5) == (targets[i] >= 0.5) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

std::vector<double> per_label_accuracy(const Tensor& probabilities, const Tensor& targets) {
  check_scores(probabilities, targets, "per_label_accuracy");
  std::vector<double> out(probabilities.dim(1), 0.0);
  for (std::size_t r = 0; r < probabilities.dim(0); ++r) {
    for (std::size_t l = 0; l < out.size(); ++l) {
      out[l] += (probabilities(r, l) >= 0.5) == (targets(r, l) >= 0.5) ? 1.0 : 0.0;
    }
  }
  for (double& v : out) v /= static_cast<double>(probabilities.dim(0));
  return out;
}

double fairness(std::span<const double> accs) {
  if (accs.empty()) throw InputError("fairness: no domain accuracies");
  for (double a : accs) {
    if (!(a >= 0.0 && a <= 1.0)) throw InputError("fairness: accuracy " + std::to_string(a) + " outside [0, 1]");
  }
  const auto [lo, hi] = std::minmax_element(accs.begin(), accs.end());
  if (*hi == 0.0) return 1.0;
  if (*lo == 0.0) {
    log_info("fairness: a domain has zero accuracy; reporting 0");
    return 0.0;
  }
  return *lo / *hi;
}

double fairness(const std::map<std::string, double>& domain_accuracies) {
  std::vector<double> v;
  for (const auto& [name, a] : domain_accuracies) v.push_back(a);
  return fairness(v);
}

AccuracyMatrix::AccuracyMatrix(std::size_t tasks)
    : n_(tasks), values_(tasks * tasks, 0.0), present_(tasks * tasks, false) {}

void AccuracyMatrix::set(std::size_t learned, std::size_t evaluated, double value) {
  if (learned >= n_ || evaluated >= n_) throw UsageError("accuracy matrix index out of range");
  values_[learned * n_ + evaluated] = value;
  present_[learned * n_ + evaluated] = true;
}

double AccuracyMatrix::at(std::size_t learned, std::size_t evaluated) const {
  if (!has(learned, evaluated)) {
    throw UsageError("accuracy matrix entry (" + std::to_string(learned) + ", " + std::to_string(evaluated) +
                     ") is not populated");
  }
  return values_[learned * n_ + evaluated];
}

bool AccuracyMatrix::has(std::size_t learned, std::size_t evaluated) const {
  return learned < n_ && evaluated < n_ && present_[learned * n_ + evaluated];
}

bool AccuracyMatrix::lower_complete() const {
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      if (!has(i, j)) return false;
    }
  }
  return true;
}

nlohmann::json to_json(const AccuracyMatrix& m) {
  auto rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.tasks(); ++i) {
    auto row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.tasks(); ++j) row.push_back(m.has(i, j) ? nlohmann::json(m.at(i, j)) : nlohmann::json());
    rows.push_back(std::move(row));
  }
  return rows;
}

AccuracyMatrix accuracy_matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw InputError("accuracy matrix: expected an array of rows");
  AccuracyMatrix m(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != j.size()) throw InputError("accuracy matrix: rows must be square");
    for (std::size_t k = 0; k < j.size(); ++k) {
      if (!j[i][k].is_null()) m.set(i, k, j[i][k].get<double>());
    }
  }
  return m;
}

std::string to_string(CfReading reading) { return reading == CfReading::kStated ? "stated" : "literal"; }

CfReading parse_cf_reading(std::string_view text) {
  if (text == "stated") return CfReading::kStated;
  if (text == "literal") return CfReading::kLiteral;
  throw ConfigError("unknown cf reading '" + std::string(text) + "' (expected stated or literal)");
}

std::optional<double> cf_score(const AccuracyMatrix& a, std::size_t i, CfReading reading) {
  if (i == 0) return std::nullopt;
  double total = 0.0;
  for (std::size_t j = 0; j < i; ++j) {
    const double later = reading == CfReading::kStated ? a.at(i, j) : a.at(j, i);
    total += a.at(j, j) - later;
  }
  return total / static_cast<double>(i);
}

double overall_accuracy(const AccuracyMatrix& a, std::size_t i) {
  double total = 0.0;
  for (std::size_t j = 0; j <= i; ++j) total += a.at(i, j);
  return total / static_cast<double>(i + 1);
}

}  // namespace faircl
