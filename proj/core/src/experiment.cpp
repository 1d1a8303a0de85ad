#include "faircl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "faircl/baselines.hpp"
#include "faircl/checkpoint.hpp"
#include "faircl/error.hpp"
#include "faircl/log.hpp"
#include "faircl/rng.hpp"
#include "faircl/trainer.hpp"

namespace faircl {
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kModelSalt = 1;
constexpr std::uint64_t kStrategySalt = 2;
constexpr std::uint64_t kTrainSalt = 3;

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("'" + path.string() + "': " + e.what());
  }
}

nlohmann::json stat_json(const Stat& s) { return {{"mean", s.mean}, {"std", s.stddev}}; }
Stat stat_from(const nlohmann::json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

template <class T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

TrainOptions train_options(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainOptions t;
  t.epochs = cfg.epochs;
  t.batch_size = cfg.batch_size;
  t.learning_rate = cfg.learning_rate;
  t.augment = cfg.augment;
  t.seed = mix_seed(seed, kTrainSalt);
  return t;
}

// Appends step records as JSON lines; one writer per seed directory.
class StepWriter {
 public:
  StepWriter(const fs::path& path, bool enabled) {
    if (!enabled) return;
    fs::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::app);
  }
  void operator()(const StepLog& s) {
    if (!out_.is_open()) return;
    nlohmann::json j{{"task", s.task},       {"epoch", s.epoch},        {"step", s.step},
                     {"loss", s.loss},       {"penalty", s.penalty},    {"new", s.new_count},
                     {"replay", s.replay_count}};
    if (s.replay_fallback) j["replay_fallback"] = true;
    out_ << j.dump() << '\n';
  }

 private:
  std::ofstream out_;
};

fs::path checkpoint_path(const fs::path& seed_dir, std::size_t task) {
  return seed_dir / ("checkpoint_task" + std::to_string(task) + ".json");
}

SeedResult run_seed(const ExperimentConfig& cfg, const PreparedData& data, const ModelConfig& model_cfg,
                    std::uint64_t seed, const std::string& hash, const fs::path& seed_dir, const RunOptions& ro) {
  const TaskStream& stream = data.stream;
  const std::size_t n = stream.tasks.size();
  const TrainOptions topt = train_options(cfg, seed);
  const bool artifacts = ro.write_artifacts;
  Model model = build_model(model_cfg, mix_seed(seed, kModelSalt));
  SeedResult out;
  out.seed = seed;

  if (is_sequential(cfg.method)) {
    StrategyConfig scfg = cfg.strategy;
    scfg.kind = strategy_kind(cfg.method);
    auto strategy = make_strategy(scfg, model_cfg.mode, mix_seed(seed, kStrategySalt));

    SequentialHooks hooks;
    hooks.evaluate_future = cfg.cf_reading == CfReading::kLiteral;
    if (cfg.resume && artifacts) {
      for (std::size_t t = n; t-- > 0;) {
        const fs::path p = checkpoint_path(seed_dir, t);
        if (!fs::exists(p)) continue;
        Checkpoint ck = load_checkpoint(p);
        if (ck.extra.value("config_hash", std::string()) != hash) {
          log_warning("ignoring checkpoint '" + p.string() + "' from a different configuration");
          break;
        }
        model = restore_model(ck);
        if (strategy) strategy->load(ck.strategy);
        hooks.first_task = t + 1;
        hooks.resume_matrix = accuracy_matrix_from_json(ck.extra.at("matrix"));
        log_info("seed " + std::to_string(seed) + ": resuming after task " + std::to_string(t));
        break;
      }
    }
    if (hooks.first_task == 0 && artifacts && ro.log_steps) fs::remove(seed_dir / "steps.jsonl");
    StepWriter writer(seed_dir / "steps.jsonl", artifacts && ro.log_steps);
    hooks.on_step = [&](const StepLog& s) { writer(s); };
    if (artifacts && cfg.checkpoints) {
      hooks.on_task_end = [&](std::size_t t, const Model& m, const ContinualStrategy* s, const AccuracyMatrix& a) {
        nlohmann::json extra{{"config_hash", hash}, {"task", t}, {"seed", seed}, {"matrix", to_json(a)}};
        save_checkpoint(checkpoint_path(seed_dir, t), make_checkpoint(m, s ? s->save() : nlohmann::json(), extra));
      };
    }
    SequentialResult r = hooks.first_task >= n ? SequentialResult{hooks.resume_matrix, {}}
                                               : run_sequential(model, stream, topt, strategy.get(), hooks);
    if (r.final_accuracies.empty()) {
      for (std::size_t j = 0; j < n; ++j) r.final_accuracies.push_back(r.matrix.at(n - 1, j));
    }
    out.domain_accuracies = r.final_accuracies;
    for (std::size_t i = 0; i < n; ++i) {
      out.cf.push_back(cf_score(r.matrix, i, cfg.cf_reading));
      out.overall.push_back(overall_accuracy(r.matrix, i));
    }
    out.matrix = std::move(r.matrix);
  } else {
    const fs::path final_ck = seed_dir / "checkpoint_final.json";
    bool restored = false;
    if (cfg.resume && artifacts && fs::exists(final_ck)) {
      Checkpoint ck = load_checkpoint(final_ck);
      if (ck.extra.value("config_hash", std::string()) == hash) {
        model = restore_model(ck);
        out.domain_accuracies = ck.extra.at("domain_accuracies").get<std::vector<double>>();
        restored = true;
      }
    }
    if (!restored) {
      if (artifacts && ro.log_steps) fs::remove(seed_dir / "steps.jsonl");
      StepWriter writer(seed_dir / "steps.jsonl", artifacts && ro.log_steps);
      StepCallback cb = [&](const StepLog& s) { writer(s); };
      UnionResult u;
      switch (cfg.method) {
        case Method::kOffline:
          u = run_offline(model, stream, topt, cb);
          break;
        case Method::kSs:
          u = run_ss(model, stream, topt, cb);
          break;
        case Method::kDdc:
          u = run_ddc(model, stream, topt, cb);
          break;
        case Method::kDic:
          u = run_dic(model, stream, topt, cb);
          break;
        default:
          throw ConfigError("method " + to_string(cfg.method) + " is not a union method");
      }
      out.domain_accuracies = u.domain_accuracies;
      if (artifacts && cfg.checkpoints) {
        nlohmann::json extra{{"config_hash", hash}, {"seed", seed}, {"domain_accuracies", u.domain_accuracies}};
        save_checkpoint(final_ck, make_checkpoint(model, nullptr, extra));
      }
    }
  }
  out.fairness = fairness(out.domain_accuracies);
  if (model_cfg.mode == TaskMode::kMultilabel) {
    std::vector<Sample> test;
    for (const auto& t : stream.tasks) test.insert(test.end(), t.test.begin(), t.test.end());
    out.per_label = per_label_accuracy(predict(model, test), targets_of(test, TaskMode::kMultilabel,
                                                                        model_cfg.num_classes));
  }
  return out;
}

// Runs jobs [0, count) on up to `workers` threads; job(i) must not throw.
template <class Job>
void parallel_for(std::size_t count, std::size_t workers, Job job) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::kBaseline:
      return "baseline";
    case Method::kOffline:
      return "offline";
    case Method::kDdc:
      return "ddc";
    case Method::kDic:
      return "dic";
    case Method::kSs:
      return "ss";
    case Method::kEwc:
      return "ewc";
    case Method::kEwcOnline:
      return "ewc-online";
    case Method::kSi:
      return "si";
    case Method::kMas:
      return "mas";
    case Method::kNr:
      return "nr";
  }
  return "baseline";
}

Method parse_method(std::string_view text) {
  static const std::pair<std::string_view, Method> table[] = {
      {"baseline", Method::kBaseline}, {"finetune", Method::kBaseline}, {"offline", Method::kOffline},
      {"ddc", Method::kDdc},           {"dic", Method::kDic},           {"ss", Method::kSs},
      {"ewc", Method::kEwc},           {"ewc-online", Method::kEwcOnline}, {"si", Method::kSi},
      {"mas", Method::kMas},           {"nr", Method::kNr}};
  for (const auto& [name, m] : table) {
    if (name == text) return m;
  }
  throw ConfigError("unknown method '" + std::string(text) +
                    "' (expected baseline, offline, ddc, dic, ss, ewc, ewc-online, si, mas, nr)");
}

bool is_sequential(Method m) {
  return m == Method::kBaseline || m == Method::kEwc || m == Method::kEwcOnline || m == Method::kSi ||
         m == Method::kMas || m == Method::kNr;
}

StrategyKind strategy_kind(Method m) {
  switch (m) {
    case Method::kEwc:
      return StrategyKind::kEwc;
    case Method::kEwcOnline:
      return StrategyKind::kEwcOnline;
    case Method::kSi:
      return StrategyKind::kSi;
    case Method::kMas:
      return StrategyKind::kMas;
    case Method::kNr:
      return StrategyKind::kRehearsal;
    default:
      return StrategyKind::kNone;
  }
}

void ExperimentConfig::validate() const {
  if (manifest.has_value() == synthetic.has_value()) {
    throw ConfigError("experiment: give exactly one of dataset.manifest or dataset.synthetic");
  }
  if (synthetic) synthetic->validate();
  if (attribute != "gender" && attribute != "race") {
    throw ConfigError("experiment: attribute must be gender or race, got '" + attribute + "'");
  }
  if (epochs < 1) throw ConfigError("experiment: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("experiment: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("experiment: learning_rate must be > 0");
  if (seeds.empty()) throw ConfigError("experiment: seeds must not be empty");
  if (workers < 1) throw ConfigError("experiment: workers must be >= 1");
  StrategyConfig s = strategy;
  s.kind = strategy_kind(method);
  s.validate();
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json dataset;
  if (cfg.manifest) dataset["manifest"] = cfg.manifest->string();
  if (cfg.synthetic) dataset["synthetic"] = to_json(*cfg.synthetic);
  StrategyConfig s = cfg.strategy;
  s.kind = strategy_kind(cfg.method);
  return {{"dataset", dataset},
          {"attribute", cfg.attribute},
          {"order", cfg.order},
          {"method", to_string(cfg.method)},
          {"strategy", to_json(s)},
          {"model", to_json(cfg.model)},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.learning_rate},
          {"augment", cfg.augment},
          {"seeds", cfg.seeds},
          {"output_dir", cfg.output_dir.string()},
          {"workers", cfg.workers},
          {"resume", cfg.resume},
          {"checkpoints", cfg.checkpoints},
          {"cf_reading", to_string(cfg.cf_reading)}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  ExperimentConfig cfg;
  try {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    const auto& ds = j.at("dataset");
    if (ds.contains("manifest")) cfg.manifest = resolve(ds.at("manifest").get<std::string>(), base_dir);
    if (ds.contains("synthetic")) {
      const auto& s = ds.at("synthetic");
      cfg.synthetic = s.is_string() ? synthetic_spec_from_json(read_json(resolve(s.get<std::string>(), base_dir)))
                                    : synthetic_spec_from_json(s);
    }
    cfg.attribute = j.value("attribute", cfg.attribute);
    if (cfg.synthetic && !j.contains("attribute")) cfg.attribute = cfg.synthetic->attribute;
    if (j.contains("order")) cfg.order = j.at("order").get<std::vector<std::string>>();
    cfg.method = parse_method(j.value("method", std::string("baseline")));
    if (j.contains("strategy")) {
      auto sj = j.at("strategy");
      if (sj.is_object() && !sj.contains("kind")) sj["kind"] = to_string(strategy_kind(cfg.method));
      cfg.strategy = strategy_config_from_json(sj);
    }
    cfg.strategy.kind = strategy_kind(cfg.method);
    if (j.contains("model")) {
      cfg.model = model_config_from_json(j.at("model"));
      if (!j.at("model").contains("input_shape")) cfg.model.input_shape.clear();
    } else {
      cfg.model.input_shape.clear();
    }
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.augment = j.value("augment", cfg.augment);
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("output_dir")) cfg.output_dir = resolve(j.at("output_dir").get<std::string>(), base_dir);
    cfg.workers = j.value("workers", cfg.workers);
    cfg.resume = j.value("resume", cfg.resume);
    cfg.checkpoints = j.value("checkpoints", cfg.checkpoints);
    if (j.contains("cf_reading")) cfg.cf_reading = parse_cf_reading(j.at("cf_reading").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  } catch (const InputError& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return experiment_config_from_json(j, fs::absolute(path).parent_path());
}

std::string config_hash(const ExperimentConfig& cfg) {
  nlohmann::json j = to_json(cfg);
  j.erase("output_dir");
  j.erase("workers");
  j.erase("resume");
  j.erase("checkpoints");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  DatasetManifest manifest = cfg.synthetic ? generate_synthetic(*cfg.synthetic) : load_manifest(*cfg.manifest);
  PreparedData out;
  out.image_shape = cfg.model.input_shape.empty() ? manifest.image_shape : cfg.model.input_shape;
  LoadedData loaded = load_samples(manifest, out.image_shape);
  out.report = loaded.report;
  out.vocabulary = manifest.vocabulary(cfg.attribute);
  const auto& order = cfg.order.empty() ? out.vocabulary : cfg.order;
  out.stream = split_stream(loaded.train, loaded.test, cfg.attribute, order, out.vocabulary, manifest.mode,
                            manifest.num_classes);
  for (const auto& t : out.stream.tasks) {
    if (t.train.empty() || t.test.empty()) {
      throw InputError("domain '" + t.name + "' has " + std::to_string(t.train.size()) + " training and " +
                       std::to_string(t.test.size()) + " test samples; both must be nonempty");
    }
  }
  return out;
}

ModelConfig resolve_model_config(const ExperimentConfig& cfg, const PreparedData& data) {
  ModelConfig m = cfg.model;
  m.input_shape = data.image_shape;
  m.num_classes = data.stream.num_classes;
  m.mode = data.stream.mode;
  m.num_domains = 1;
  m.head = HeadKind::kSingle;
  if (cfg.method == Method::kDdc || cfg.method == Method::kDic) {
    m.head = cfg.method == Method::kDdc ? HeadKind::kDomainDiscriminative : HeadKind::kDomainIndependent;
    m.num_domains = data.stream.tasks.size();
  }
  m.validate();
  return m;
}

Stat mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

bool ResultBundle::sequential() const {
  return std::any_of(runs.begin(), runs.end(), [](const SeedResult& r) { return r.matrix.has_value(); });
}

void summarize(ResultBundle& b) {
  const std::size_t n = b.domains.size();
  b.domain_accuracy.assign(n, {});
  std::vector<double> means(n, 0.0);
  for (std::size_t d = 0; d < n; ++d) {
    std::vector<double> v;
    for (const auto& r : b.runs) {
      if (d < r.domain_accuracies.size()) v.push_back(r.domain_accuracies[d]);
    }
    b.domain_accuracy[d] = mean_std(v);
    means[d] = b.domain_accuracy[d].mean;
  }
  std::vector<double> f;
  for (const auto& r : b.runs) f.push_back(r.fairness);
  b.fairness = mean_std(f);
  b.fairness_of_means = n > 0 && !b.runs.empty() ? fairness(means) : 0.0;
  b.mean_accuracy = n > 0 ? std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(n) : 0.0;
  b.cf.clear();
  b.overall.clear();
  if (!b.sequential()) return;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> cf;
    std::vector<double> ov;
    for (const auto& r : b.runs) {
      if (i < r.cf.size() && r.cf[i]) cf.push_back(*r.cf[i]);
      if (i < r.overall.size()) ov.push_back(r.overall[i]);
    }
    b.cf.push_back(cf.empty() ? std::nullopt : std::optional<Stat>(mean_std(cf)));
    b.overall.push_back(mean_std(ov));
  }
}

std::vector<std::string> missing_cells(const ResultBundle& b) {
  std::vector<std::string> missing;
  if (b.domains.empty()) missing.push_back("domains");
  for (auto seed : b.seeds) {
    const auto it = std::find_if(b.runs.begin(), b.runs.end(), [&](const SeedResult& r) { return r.seed == seed; });
    if (it == b.runs.end()) {
      missing.push_back("seed " + std::to_string(seed));
      continue;
    }
    for (std::size_t d = it->domain_accuracies.size(); d < b.domains.size(); ++d) {
      missing.push_back("seed " + std::to_string(seed) + " accuracy '" + b.domains[d] + "'");
    }
    if (it->matrix) {
      for (std::size_t i = 0; i < b.domains.size(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
          if (!it->matrix->has(i, j)) {
            missing.push_back("seed " + std::to_string(seed) + " matrix (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
          }
        }
      }
    }
  }
  return missing;
}

nlohmann::json to_json(const ResultBundle& b) {
  auto runs = nlohmann::json::array();
  for (const auto& r : b.runs) {
    nlohmann::json jr{{"seed", r.seed}, {"domain_accuracies", r.domain_accuracies}, {"fairness", r.fairness}};
    if (r.matrix) {
      jr["matrix"] = to_json(*r.matrix);
      auto cf = nlohmann::json::array();
      for (const auto& c : r.cf) cf.push_back(optional_json(c));
      jr["cf"] = cf;
      jr["overall"] = r.overall;
    }
    if (!r.per_label.empty()) jr["per_label"] = r.per_label;
    runs.push_back(std::move(jr));
  }
  auto dom = nlohmann::json::array();
  for (const auto& s : b.domain_accuracy) dom.push_back(stat_json(s));
  nlohmann::json summary{{"domain_accuracy", dom},
                         {"fairness", stat_json(b.fairness)},
                         {"fairness_of_means", b.fairness_of_means},
                         {"mean_accuracy", b.mean_accuracy}};
  if (b.sequential()) {
    auto cf = nlohmann::json::array();
    for (const auto& c : b.cf) cf.push_back(c ? stat_json(*c) : nlohmann::json(nullptr));
    auto ov = nlohmann::json::array();
    for (const auto& o : b.overall) ov.push_back(stat_json(o));
    summary["cf"] = cf;
    summary["overall"] = ov;
  }
  return {{"format", "faircl-result"},
          {"method", b.method},
          {"attribute", b.attribute},
          {"domains", b.domains},
          {"seeds", b.seeds},
          {"config_hash", b.config_hash},
          {"cf_reading", b.cf_reading},
          {"config", b.config},
          {"runs", runs},
          {"summary", summary}};
}

ResultBundle result_bundle_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "faircl-result") throw InputError("not a faircl result bundle");
  ResultBundle b;
  try {
    b.method = j.at("method").get<std::string>();
    b.attribute = j.at("attribute").get<std::string>();
    b.domains = j.at("domains").get<std::vector<std::string>>();
    b.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    b.config_hash = j.at("config_hash").get<std::string>();
    b.cf_reading = j.value("cf_reading", std::string("stated"));
    b.config = j.value("config", nlohmann::json());
    for (const auto& jr : j.at("runs")) {
      SeedResult r;
      r.seed = jr.at("seed").get<std::uint64_t>();
      r.domain_accuracies = jr.at("domain_accuracies").get<std::vector<double>>();
      r.fairness = jr.at("fairness").get<double>();
      if (jr.contains("matrix")) {
        r.matrix = accuracy_matrix_from_json(jr.at("matrix"));
        for (const auto& c : jr.at("cf")) r.cf.push_back(c.is_null() ? std::nullopt : std::optional(c.get<double>()));
        r.overall = jr.at("overall").get<std::vector<double>>();
      }
      if (jr.contains("per_label")) r.per_label = jr.at("per_label").get<std::vector<double>>();
      b.runs.push_back(std::move(r));
    }
    const auto& s = j.at("summary");
    for (const auto& d : s.at("domain_accuracy")) b.domain_accuracy.push_back(stat_from(d));
    b.fairness = stat_from(s.at("fairness"));
    b.fairness_of_means = s.at("fairness_of_means").get<double>();
    b.mean_accuracy = s.at("mean_accuracy").get<double>();
    if (s.contains("cf")) {
      for (const auto& c : s.at("cf")) b.cf.push_back(c.is_null() ? std::nullopt : std::optional(stat_from(c)));
      for (const auto& o : s.at("overall")) b.overall.push_back(stat_from(o));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("result bundle: ") + e.what());
  }
  return b;
}

fs::path run_directory(const ExperimentConfig& cfg) {
  return cfg.output_dir / to_string(cfg.method) / cfg.attribute;
}

ResultBundle run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const PreparedData data = prepare_data(cfg);
  const ModelConfig model_cfg = resolve_model_config(cfg, data);
  const std::string hash = config_hash(cfg);
  const fs::path dir = run_directory(cfg);
  if (data.report.skipped > 0) {
    log_warning(std::to_string(data.report.skipped) + " images could not be decoded and were skipped");
  }

  ResultBundle bundle;
  bundle.method = to_string(cfg.method);
  bundle.attribute = cfg.attribute;
  bundle.domains = data.stream.domain_names();
  bundle.seeds = cfg.seeds;
  bundle.config_hash = hash;
  bundle.cf_reading = to_string(cfg.cf_reading);
  bundle.config = to_json(cfg);
  bundle.config.erase("output_dir");
  bundle.config.erase("workers");
  bundle.config.erase("resume");
  if (cfg.manifest) bundle.config["dataset"]["manifest"] = cfg.manifest->filename().string();

  std::vector<std::optional<SeedResult>> results(cfg.seeds.size());
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.workers, [&](std::size_t i) {
    try {
      const auto seed = cfg.seeds[i];
      results[i] = run_seed(cfg, data, model_cfg, seed, hash, dir / ("seed_" + std::to_string(seed)), options);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (auto& r : results) bundle.runs.push_back(std::move(*r));
  summarize(bundle);

  if (options.write_artifacts) {
    write_text(dir / "result.json", to_json(bundle).dump(2) + "\n");
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    nlohmann::json timing{{"config_hash", hash},
                          {"wall_seconds", seconds},
                          {"images_loaded", data.report.loaded},
                          {"images_skipped", data.report.skipped}};
    write_text(dir / "timing.json", timing.dump(2) + "\n");
  }
  return bundle;
}

SweepSummary sweep(const nlohmann::json& grid, const fs::path& base_dir, const fs::path& out_dir,
                   std::size_t workers) {
  if (!grid.is_object() || !grid.contains("base")) throw ConfigError("sweep: grid file needs a 'base' config");
  const nlohmann::json& base = grid.at("base");
  std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;
  if (grid.contains("grid")) {
    for (const auto& [key, values] : grid.at("grid").items()) {
      if (!values.is_array() || values.empty()) throw ConfigError("sweep: axis '" + key + "' needs a nonempty list");
      axes.emplace_back(key, values.get<std::vector<nlohmann::json>>());
    }
  }
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.second.size();
  if (total == 0) throw ConfigError("sweep: grid is empty");

  SweepSummary summary;
  summary.cells.resize(total);
  for (std::size_t k = 0; k < total; ++k) {
    SweepCell& cell = summary.cells[k];
    cell.index = k;
    cell.directory = out_dir / ("cell_" + std::to_string(k));
    cell.overrides = nlohmann::json::object();
    std::size_t rest = k;
    for (std::size_t a = axes.size(); a-- > 0;) {
      const auto& values = axes[a].second;
      cell.overrides[axes[a].first] = values[rest % values.size()];
      rest /= values.size();
    }
  }

  parallel_for(total, workers, [&](std::size_t k) {
    SweepCell& cell = summary.cells[k];
    try {
      nlohmann::json j = base;
      for (const auto& [key, value] : cell.overrides.items()) {
        std::string pointer = "/" + key;
        std::replace(pointer.begin(), pointer.end(), '.', '/');
        j[nlohmann::json::json_pointer(pointer)] = value;
      }
      ExperimentConfig cfg = experiment_config_from_json(j, base_dir);
      cfg.output_dir = cell.directory;
      cfg.workers = 1;
      cell.bundle = run_experiment(cfg);
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.error = e.what();
      log_warning("sweep cell " + std::to_string(k) + " failed: " + cell.error);
    }
  });

  for (const auto& c : summary.cells) {
    if (c.ok) {
      summary.by_fairness.push_back(c.index);
      summary.by_accuracy.push_back(c.index);
    }
  }
  const auto& cells = summary.cells;
  std::stable_sort(summary.by_fairness.begin(), summary.by_fairness.end(), [&](std::size_t a, std::size_t b) {
    return cells[a].bundle->fairness_of_means > cells[b].bundle->fairness_of_means;
  });
  std::stable_sort(summary.by_accuracy.begin(), summary.by_accuracy.end(), [&](std::size_t a, std::size_t b) {
    return cells[a].bundle->mean_accuracy > cells[b].bundle->mean_accuracy;
  });
  write_text(out_dir / "summary.json", to_json(summary).dump(2) + "\n");
  return summary;
}

nlohmann::json to_json(const SweepSummary& s) {
  auto cells = nlohmann::json::array();
  for (const auto& c : s.cells) {
    nlohmann::json jc{{"index", c.index}, {"overrides", c.overrides}, {"directory", c.directory.filename().string()},
                      {"ok", c.ok}};
    if (!c.ok) jc["error"] = c.error;
    if (c.bundle) {
      jc["config_hash"] = c.bundle->config_hash;
      jc["fairness"] = c.bundle->fairness_of_means;
      jc["mean_accuracy"] = c.bundle->mean_accuracy;
    }
    cells.push_back(std::move(jc));
  }
  return {{"cells", cells},
          {"ranking_by_fairness", s.by_fairness},
          {"ranking_by_accuracy", s.by_accuracy},
          {"best_fairness", s.by_fairness.empty() ? nlohmann::json(nullptr) : nlohmann::json(s.by_fairness.front())},
          {"best_accuracy", s.by_accuracy.empty() ? nlohmann::json(nullptr) : nlohmann::json(s.by_accuracy.front())}};
}

}  // namespace faircl
