#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "faircl/error.hpp"
#include "faircl/experiment.hpp"
#include "faircl/log.hpp"
#include "faircl/manifest.hpp"
#include "faircl/report.hpp"
#include "faircl/synthetic.hpp"

namespace fs = std::filesystem;
using namespace faircl;

namespace {

nlohmann::json read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
}

void write_output(const fs::path& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream f(out, std::ios::binary);
  if (!f) throw InputError("cannot write '" + out.string() + "'");
  f << text;
}

int cmd_generate(const fs::path& config, const fs::path& out, const std::vector<std::uint64_t>& seeds) {
  SyntheticSpec spec = synthetic_spec_from_json(read_config(config));
  if (!seeds.empty()) spec.seed = seeds.front();
  const DatasetManifest m = generate_synthetic(spec);
  if (out.empty()) {
    write_manifest(std::cout, m);
  } else {
    save_manifest(out, m);
    std::cerr << "wrote " << m.rows.size() << " rows to " << out.string() << '\n';
  }
  return 0;
}

int cmd_run(const fs::path& config, const fs::path& out, const std::vector<std::uint64_t>& seeds,
            std::size_t workers, bool resume, const std::string& format) {
  ExperimentConfig cfg = load_experiment_config(config);
  if (!seeds.empty()) cfg.seeds = seeds;
  if (!out.empty()) cfg.output_dir = out;
  if (workers > 0) cfg.workers = workers;
  if (resume) cfg.resume = true;
  const ResultBundle bundle = run_experiment(cfg);
  std::cerr << "results in " << run_directory(cfg).string() << '\n';
  const std::vector<ResultBundle> one{bundle};
  std::cout << emit_tables(one, parse_table_format(format));
  return 0;
}

int cmd_sweep(const fs::path& config, const fs::path& out, std::size_t workers) {
  const nlohmann::json grid = read_config(config);
  const fs::path dir = out.empty() ? fs::path("sweep") : out;
  const SweepSummary s = sweep(grid, fs::absolute(config).parent_path(), dir, std::max<std::size_t>(workers, 1));
  std::size_t failed = 0;
  for (const auto& c : s.cells) failed += c.ok ? 0 : 1;
  std::cout << to_json(s).dump(2) << '\n';
  std::cerr << s.cells.size() - failed << " of " << s.cells.size() << " cells succeeded; summary in "
            << (dir / "summary.json").string() << '\n';
  return 0;
}

int cmd_report(const fs::path& dir, const fs::path& out, const std::string& format) {
  const auto bundles = collect_bundles(dir);
  write_output(out, emit_tables(bundles, parse_table_format(format)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-incremental continual learning for bias mitigation"};
  app.require_subcommand(1);

  fs::path config;
  fs::path out;
  std::vector<std::uint64_t> seeds;
  std::size_t workers = 0;
  std::string format = "md";
  bool resume = false;
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress messages");

  auto* gen = app.add_subcommand("generate", "Synthetic spec -> inline-data manifest");
  gen->add_option("--config", config, "Synthetic spec (JSON)")->required();
  gen->add_option("--out", out, "Manifest path (default: stdout)");
  gen->add_option("--seed", seeds, "Override the spec seed");

  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("--config", config, "Experiment config (JSON)")->required();
  run->add_option("--seed", seeds, "Seeds to run (overrides the config)");
  run->add_option("--out", out, "Output directory (overrides the config)");
  run->add_option("--workers", workers, "Parallel seeds");
  run->add_option("--format", format, "Table format printed on completion")
      ->check(CLI::IsMember({"csv", "md", "markdown", "json"}));
  run->add_flag("--resume", resume, "Continue from per-task checkpoints");

  auto* sw = app.add_subcommand("sweep", "Run every cell of a grid file");
  sw->add_option("--config", config, "Grid file (JSON)")->required();
  sw->add_option("--out", out, "Output directory");
  sw->add_option("--workers", workers, "Parallel cells");

  fs::path bundle_dir;
  auto* rep = app.add_subcommand("report", "Result directory -> tables");
  rep->add_option("dir", bundle_dir, "Directory containing result.json files")->required();
  rep->add_option("--out", out, "Output file (default: stdout)");
  rep->add_option("--format", format, "csv, md or json")->check(CLI::IsMember({"csv", "md", "markdown", "json"}));

  CLI11_PARSE(app, argc, argv);

  if (verbose) {
    set_log_sink([](LogLevel level, std::string_view msg) {
      if (level != LogLevel::kDebug) std::cerr << msg << '\n';
    });
  }

  try {
    if (*gen) return cmd_generate(config, out, seeds);
    if (*run) return cmd_run(config, out, seeds, workers, resume, format);
    if (*sw) return cmd_sweep(config, out, workers);
    if (*rep) return cmd_report(bundle_dir, out, format);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const InputError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
