#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "faircl/data.hpp"
#include "faircl/manifest.hpp"
#include "faircl/metrics.hpp"
#include "faircl/model.hpp"
#include "faircl/strategies.hpp"
#include "faircl/synthetic.hpp"

namespace faircl {

enum class Method { kBaseline, kOffline, kDdc, kDic, kSs, kEwc, kEwcOnline, kSi, kMas, kNr };

std::string to_string(Method method);
// "baseline" (alias "finetune"), "offline", "ddc", "dic", "ss", "ewc",
// "ewc-online", "si", "mas", "nr".
Method parse_method(std::string_view text);
// Baseline and the continual-learning methods consume the ordered stream.
bool is_sequential(Method method);
StrategyKind strategy_kind(Method method);

struct ExperimentConfig {
  std::optional<std::filesystem::path> manifest;  // absolute after loading
  std::optional<SyntheticSpec> synthetic;
  std::string attribute = "gender";
  std::vector<std::string> order;  // empty: vocabulary order
  Method method = Method::kBaseline;
  StrategyConfig strategy;  // kind always follows `method`
  // input_shape empty means "the dataset's image shape"; num_classes, mode,
  // head and num_domains are always derived from the data and the method.
  ModelConfig model;
  std::size_t epochs = 25;
  std::size_t batch_size = 24;
  double learning_rate = 1e-4;
  bool augment = true;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::filesystem::path output_dir = "runs";
  std::size_t workers = 1;
  bool resume = false;
  bool checkpoints = true;
  CfReading cf_reading = CfReading::kStated;

  void validate() const;  // throws ConfigError
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// Relative paths resolve against `base_dir`. Throws ConfigError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// FNV-1a over the canonical JSON of the settings that affect results
// (output location, worker count and resume flag excluded). 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

struct PreparedData {
  TaskStream stream;
  std::vector<std::string> vocabulary;
  Shape image_shape;
  LoadReport report;
};

PreparedData prepare_data(const ExperimentConfig& cfg);
// Model config with the data- and method-derived fields filled in.
ModelConfig resolve_model_config(const ExperimentConfig& cfg, const PreparedData& data);

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single value

  friend bool operator==(const Stat&, const Stat&) = default;
};

Stat mean_std(std::span<const double> values);

struct SeedResult {
  std::uint64_t seed = 0;
  std::optional<AccuracyMatrix> matrix;   // sequential methods
  std::vector<double> domain_accuracies;  // final model, per task/domain
  double fairness = 0.0;
  std::vector<std::optional<double>> cf;  // per task, sequential methods
  std::vector<double> overall;            // per task, sequential methods
  std::vector<double> per_label;          // multilabel: final per-label accuracy over all test data

  friend bool operator==(const SeedResult&, const SeedResult&) = default;
};

struct ResultBundle {
  std::string method;
  std::string attribute;
  std::vector<std::string> domains;
  std::vector<std::uint64_t> seeds;
  std::string config_hash;
  std::string cf_reading = "stated";
  nlohmann::json config;
  std::vector<SeedResult> runs;

  // Derived from `runs` by summarize().
  std::vector<Stat> domain_accuracy;
  Stat fairness;                    // over per-seed fairness values
  double fairness_of_means = 0.0;   // fairness of the mean domain accuracies
  double mean_accuracy = 0.0;       // mean of the mean domain accuracies
  std::vector<std::optional<Stat>> cf;
  std::vector<Stat> overall;

  bool sequential() const;
  friend bool operator==(const ResultBundle&, const ResultBundle&) = default;
};

// Recomputes the derived fields from the per-seed values.
void summarize(ResultBundle& bundle);
// Human-readable list of absent cells; empty when the bundle is complete.
std::vector<std::string> missing_cells(const ResultBundle& bundle);

nlohmann::json to_json(const ResultBundle& bundle);
ResultBundle result_bundle_from_json(const nlohmann::json& j);

// Per-seed training event written to output_dir/method/attribute/seed_N/steps.jsonl.
struct RunOptions {
  bool write_artifacts = true;
  bool log_steps = true;
};

// Runs every configured seed (in parallel up to cfg.workers) and writes
// result.json and timing.json under output_dir/method/attribute/, with
// per-seed checkpoints and step logs under .../seed_N/.
ResultBundle run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

std::filesystem::path run_directory(const ExperimentConfig& cfg);

// Grid file: {"base": {experiment config}, "grid": {"strategy.coefficient":
// [..], "method": [..]}}. Every cell of the cartesian product runs with its
// own output directory out/cell_K; failures are recorded and the sweep
// continues.
struct SweepCell {
  std::size_t index = 0;
  nlohmann::json overrides;
  std::filesystem::path directory;
  bool ok = false;
  std::string error;
  std::optional<ResultBundle> bundle;
};

struct SweepSummary {
  std::vector<SweepCell> cells;
  std::vector<std::size_t> by_fairness;  // successful cells, best first
  std::vector<std::size_t> by_accuracy;
};

SweepSummary sweep(const nlohmann::json& grid, const std::filesystem::path& base_dir,
                   const std::filesystem::path& out_dir, std::size_t workers);
nlohmann::json to_json(const SweepSummary& summary);

}  // namespace faircl
