#include "faircl/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "faircl/error.hpp"

namespace faircl {
namespace fs = std::filesystem;

namespace {

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

struct Cell {
  std::string text;
  std::optional<double> key;  // value compared for "best"
};

struct Table {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;
  std::vector<int> better;  // per column: +1 higher is better, -1 lower, 0 not ranked
};

Cell stat_cell(const Stat& s, bool markdown) {
  return {markdown ? fixed3(s.mean) + " ± " + fixed3(s.stddev) : fixed3(s.mean) + "," + fixed3(s.stddev), s.mean};
}

std::vector<Table> build_tables(std::span<const ResultBundle* const> group, bool markdown) {
  const ResultBundle& first = *group.front();
  std::vector<Table> out;

  Table acc;
  acc.title = "Accuracy and fairness by " + first.attribute;
  acc.header.push_back("Method");
  acc.better.push_back(0);
  for (const auto& d : first.domains) {
    if (markdown) {
      acc.header.push_back(d);
    } else {
      acc.header.push_back(d + "_mean");
      acc.header.push_back(d + "_std");
    }
    acc.better.push_back(1);
  }
  acc.header.insert(acc.header.end(), {"Fairness", "Config"});
  acc.better.insert(acc.better.end(), {1, 0});
  for (const ResultBundle* b : group) {
    std::vector<Cell> row{{b->method, std::nullopt}};
    for (const auto& s : b->domain_accuracy) row.push_back(stat_cell(s, markdown));
    row.push_back({fixed3(b->fairness_of_means), b->fairness_of_means});
    row.push_back({b->config_hash, std::nullopt});
    acc.rows.push_back(std::move(row));
  }
  out.push_back(std::move(acc));

  std::vector<const ResultBundle*> seq;
  for (const ResultBundle* b : group) {
    if (b->sequential()) seq.push_back(b);
  }
  if (seq.empty()) return out;
  Table cf;
  cf.title = "Forgetting and overall accuracy after each task, by " + first.attribute;
  cf.header.push_back("Method");
  cf.better.push_back(0);
  for (std::size_t t = 0; t < first.domains.size(); ++t) {
    const std::string task = "Task " + std::to_string(t + 1) + " (" + first.domains[t] + ")";
    if (markdown) {
      cf.header.push_back(task + " CF");
      cf.header.push_back(task + " Acc");
    } else {
      cf.header.insert(cf.header.end(), {task + " CF_mean", task + " CF_std", task + " Acc_mean", task + " Acc_std"});
    }
    cf.better.push_back(-1);
    cf.better.push_back(1);
  }
  cf.header.push_back("Config");
  cf.better.push_back(0);
  for (const ResultBundle* b : seq) {
    std::vector<Cell> row{{b->method, std::nullopt}};
    for (std::size_t t = 0; t < b->domains.size(); ++t) {
      if (t < b->cf.size() && b->cf[t]) {
        row.push_back(stat_cell(*b->cf[t], markdown));
      } else {
        row.push_back({markdown ? "X" : "X,X", std::nullopt});
      }
      row.push_back(stat_cell(b->overall.at(t), markdown));
    }
    row.push_back({b->config_hash, std::nullopt});
    cf.rows.push_back(std::move(row));
  }
  out.push_back(std::move(cf));
  return out;
}

void write_markdown(std::ostream& os, const Table& t) {
  os << "### " << t.title << "\n\n|";
  for (const auto& h : t.header) os << ' ' << h << " |";
  os << "\n|";
  for (std::size_t i = 0; i < t.header.size(); ++i) os << (i == 0 ? " :--- |" : " ---: |");
  os << '\n';
  std::vector<std::optional<double>> best(t.better.size());
  for (std::size_t c = 0; c < t.better.size(); ++c) {
    if (t.better[c] == 0 || t.rows.size() < 2) continue;
    for (const auto& row : t.rows) {
      const auto& k = row[c].key;
      if (!k) continue;
      // Compare at the printed precision so ties are all bold.
      const double v = std::stod(fixed3(*k));
      if (!best[c] || (t.better[c] > 0 ? v > *best[c] : v < *best[c])) best[c] = v;
    }
  }
  for (const auto& row : t.rows) {
    os << '|';
    for (std::size_t c = 0; c < row.size(); ++c) {
      const bool bold = best[c] && row[c].key && std::stod(fixed3(*row[c].key)) == *best[c];
      os << ' ' << (bold ? "**" + row[c].text + "**" : row[c].text) << " |";
    }
    os << '\n';
  }
  os << '\n';
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

void write_csv(std::ostream& os, const Table& t) {
  os << "# " << t.title << '\n';
  for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << csv_field(t.header[i]);
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i].text;
    os << '\n';
  }
  os << '\n';
}

}  // namespace

TableFormat parse_table_format(std::string_view text) {
  if (text == "csv") return TableFormat::kCsv;
  if (text == "md" || text == "markdown") return TableFormat::kMarkdown;
  if (text == "json") return TableFormat::kJson;
  throw ConfigError("unknown table format '" + std::string(text) + "' (expected csv, md, json)");
}

std::string file_extension(TableFormat format) {
  switch (format) {
    case TableFormat::kCsv:
      return ".csv";
    case TableFormat::kMarkdown:
      return ".md";
    case TableFormat::kJson:
      return ".json";
  }
  return ".txt";
}

std::string emit_tables(std::span<const ResultBundle> bundles, TableFormat format) {
  if (bundles.empty()) throw InputError("no result bundles to report");
  std::vector<std::string> missing;
  for (const auto& b : bundles) {
    for (const auto& m : missing_cells(b)) missing.push_back(b.method + "/" + b.attribute + ": " + m);
  }
  if (!missing.empty()) {
    std::string msg = "incomplete result bundle, missing:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw InputError(msg);
  }

  if (format == TableFormat::kJson) {
    auto arr = nlohmann::json::array();
    for (const auto& b : bundles) arr.push_back(to_json(b));
    nlohmann::json doc = nlohmann::json::object();
    doc["bundles"] = std::move(arr);
    return doc.dump(2) + "\n";
  }

  std::map<std::string, std::vector<const ResultBundle*>> groups;
  for (const auto& b : bundles) {
    std::string key = b.attribute;
    for (const auto& d : b.domains) key += "|" + d;
    groups[key].push_back(&b);
  }
  std::ostringstream os;
  for (const auto& [key, group] : groups) {
    for (const auto& t : build_tables(group, format == TableFormat::kMarkdown)) {
      if (format == TableFormat::kMarkdown) {
        write_markdown(os, t);
      } else {
        write_csv(os, t);
      }
    }
  }
  return os.str();
}

std::vector<ResultBundle> collect_bundles(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> paths;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() == "result.json") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<ResultBundle> out;
  for (const auto& p : paths) {
    std::ifstream in(p);
    try {
      out.push_back(result_bundle_from_json(nlohmann::json::parse(in)));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("'" + p.string() + "': " + e.what());
    }
  }
  if (out.empty()) throw InputError("no result.json found under '" + dir.string() + "'");
  return out;
}

std::vector<ResultBundle> parse_json_tables(const std::string& text) {
  std::vector<ResultBundle> out;
  try {
    const auto doc = nlohmann::json::parse(text);
    for (const auto& b : doc.at("bundles")) out.push_back(result_bundle_from_json(b));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("tables: ") + e.what());
  }
  return out;
}

}  // namespace faircl
