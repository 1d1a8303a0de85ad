#include "faircl/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "faircl/error.hpp"
#include "faircl/image.hpp"
#include "faircl/log.hpp"

namespace faircl {
namespace {

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string join(const std::vector<std::string>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ", ";
    out += values[i];
  }
  return out;
}

constexpr std::string_view kInlinePrefix = "inline:";

Tensor parse_inline(std::string_view text, const Shape& shape, const std::string& where) {
  std::vector<double> values;
  values.reserve(shape_volume(shape));
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (p < end) {
    while (p < end && *p == ' ') ++p;
    if (p >= end) break;
    double v = 0.0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc()) throw InputError(where + ": malformed inline pixel data");
    if (!(v >= 0.0 && v <= 1.0)) throw InputError(where + ": inline pixel value outside [0, 1]");
    values.push_back(v);
    p = next;
  }
  if (values.size() != shape_volume(shape)) {
    throw InputError(where + ": inline data has " + std::to_string(values.size()) + " values, image_shape " +
                     shape_string(shape) + " needs " + std::to_string(shape_volume(shape)));
  }
  return Tensor(shape, std::move(values));
}

std::string format_inline(const Tensor& t) {
  std::string out(kInlinePrefix);
  char buf[32];
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i > 0) out += ' ';
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), t[i]);
    out.append(buf, end);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& DatasetManifest::vocabulary(const std::string& attribute) const {
  auto it = attributes.find(attribute);
  if (it == attributes.end()) throw ConfigError("manifest declares no attribute '" + attribute + "'");
  return it->second;
}

std::map<std::string, std::vector<std::size_t>> DatasetManifest::counts(const std::string& attribute,
                                                                        const std::string& split) const {
  std::map<std::string, std::vector<std::size_t>> out;
  for (const auto& v : vocabulary(attribute)) out[v].assign(num_classes, 0);
  for (const auto& row : rows) {
    if (!split.empty() && row.split != split) continue;
    const std::string& value = attribute == "gender" ? row.gender : row.race;
    auto& cell = out[value];
    cell.resize(num_classes, 0);
    if (mode == TaskMode::kMulticlass) {
      cell[static_cast<std::size_t>(row.class_id)] += 1;
    } else {
      for (std::size_t l = 0; l < row.label_bits.size(); ++l) cell[l] += row.label_bits[l];
    }
  }
  return out;
}

DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw InputError("manifest: missing JSON header line");

  try {
    const auto header = nlohmann::json::parse(line);
    m.mode = parse_task_mode(header.at("mode").get<std::string>());
    const std::size_t fallback = m.mode == TaskMode::kMulticlass ? 7 : 12;
    m.num_classes = header.value("num_classes", header.value("num_labels", fallback));
    for (const auto& [name, values] : header.at("attributes").items()) {
      if (name != "gender" && name != "race") {
        throw InputError("manifest header: unsupported attribute '" + name + "' (expected gender or race)");
      }
      m.attributes[name] = values.get<std::vector<std::string>>();
    }
    for (const char* name : {"gender", "race"}) {
      if (!m.attributes.contains(name)) throw InputError(std::string("manifest header: missing vocabulary for ") + name);
    }
    if (header.contains("exclude")) m.exclude = header.at("exclude").get<std::vector<std::string>>();
    if (header.contains("image_shape")) m.image_shape = header.at("image_shape").get<Shape>();
    m.image_root = base_dir / header.value("image_root", std::string("."));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("manifest header: ") + e.what());
  }
  if (m.num_classes < 2) throw InputError("manifest header: need at least 2 classes/labels");
  if (m.image_shape.size() != 3 || shape_volume(m.image_shape) == 0) {
    throw InputError("manifest header: image_shape must be [H, W, C]");
  }

  const std::set<std::string> excluded(m.exclude.begin(), m.exclude.end());
  std::set<std::string> ids;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    if (row_no == 0 && trimmed.starts_with("id,path")) continue;  // optional column header
    ++row_no;
    const std::string where = "manifest row " + std::to_string(row_no) + " (line " + std::to_string(line_no) + ")";
    const auto fields = split_fields(trimmed, ',');
    if (fields.size() != 6) {
      throw InputError(where + ": expected 6 fields id,path,labels,gender,race,split, got " +
                       std::to_string(fields.size()));
    }
    ManifestRow row;
    row.id = trim(fields[0]);
    const std::string path = trim(fields[1]);
    const std::string labels = trim(fields[2]);
    row.gender = trim(fields[3]);
    row.race = trim(fields[4]);
    row.split = trim(fields[5]);

    if (row.id.empty()) throw InputError(where + ": empty id");
    if (excluded.contains(row.gender) || excluded.contains(row.race)) {
      ++m.excluded_rows;
      log_info(where + ": excluded ('" + row.id + "' has an excluded attribute value)");
      continue;
    }
    for (const auto& [attr, value] : {std::pair<std::string, std::string>{"gender", row.gender}, {"race", row.race}}) {
      const auto& vocab = m.attributes.at(attr);
      if (std::find(vocab.begin(), vocab.end(), value) == vocab.end()) {
        throw InputError(where + ": unknown " + attr + " '" + value + "' (vocabulary: " + join(vocab) + ")");
      }
    }
    if (row.split != "train" && row.split != "test") {
      throw InputError(where + ": split must be 'train' or 'test', got '" + row.split + "'");
    }
    if (m.mode == TaskMode::kMulticlass) {
      int value = -1;
      auto [end, ec] = std::from_chars(labels.data(), labels.data() + labels.size(), value);
      if (ec != std::errc() || end != labels.data() + labels.size() || value < 0 ||
          static_cast<std::size_t>(value) >= m.num_classes) {
        throw InputError(where + ": malformed label '" + labels + "' (expected class index in [0, " +
                         std::to_string(m.num_classes) + "))");
      }
      row.class_id = value;
    } else {
      const auto bits = split_fields(labels, ';');
      if (bits.size() != m.num_classes) {
        throw InputError(where + ": expected " + std::to_string(m.num_classes) + " ';'-separated labels, got " +
                         std::to_string(bits.size()));
      }
      for (const auto& b : bits) {
        const std::string t = trim(b);
        if (t != "0" && t != "1") throw InputError(where + ": malformed label '" + labels + "' (bits must be 0 or 1)");
        row.label_bits.push_back(t == "1" ? 1 : 0);
      }
    }
    if (path.starts_with(kInlinePrefix)) {
      row.input = parse_inline(std::string_view(path).substr(kInlinePrefix.size()), m.image_shape, where);
    } else if (path.empty()) {
      throw InputError(where + ": empty path");
    } else {
      row.path = path;
    }
    if (!ids.insert(row.id).second) throw InputError(where + ": duplicate id '" + row.id + "'");
    m.rows.push_back(std::move(row));
  }
  if (m.excluded_rows > 0) {
    log_info("manifest: excluded " + std::to_string(m.excluded_rows) + " rows with values in the exclusion list");
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest '" + path.string() + "'");
  return parse_manifest(in, path.parent_path());
}

void write_manifest(std::ostream& out, const DatasetManifest& m) {
  nlohmann::json header;
  header["mode"] = to_string(m.mode);
  header[m.mode == TaskMode::kMulticlass ? "num_classes" : "num_labels"] = m.num_classes;
  header["attributes"] = m.attributes;
  header["exclude"] = m.exclude;
  header["image_shape"] = m.image_shape;
  header["image_root"] = ".";
  out << header.dump() << '\n' << "id,path,labels,gender,race,split\n";
  for (const auto& row : m.rows) {
    std::string labels;
    if (m.mode == TaskMode::kMulticlass) {
      labels = std::to_string(row.class_id);
    } else {
      for (std::size_t l = 0; l < row.label_bits.size(); ++l) {
        if (l > 0) labels += ';';
        labels += row.label_bits[l] ? '1' : '0';
      }
    }
    out << row.id << ',' << (row.input ? format_inline(*row.input) : row.path) << ',' << labels << ',' << row.gender
        << ',' << row.race << ',' << row.split << '\n';
  }
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write manifest '" + path.string() + "'");
  write_manifest(out, manifest);
}

LoadedData load_samples(const DatasetManifest& manifest, const std::optional<Shape>& input_shape) {
  const Shape shape = input_shape.value_or(manifest.image_shape);
  LoadedData data;
  for (const auto& row : manifest.rows) {
    Sample s;
    s.id = row.id;
    s.class_id = row.class_id;
    s.label_bits = row.label_bits;
    s.gender = row.gender;
    s.race = row.race;
    if (row.input) {
      s.input = row.input->shape() == shape ? *row.input : resize_bilinear(*row.input, shape[0], shape[1]);
      if (s.input.dim(2) != shape[2]) {
        throw InputError("row '" + row.id + "': inline data has " + std::to_string(s.input.dim(2)) +
                         " channels, model expects " + std::to_string(shape[2]));
      }
    } else {
      try {
        s.input = preprocess(decode_image(manifest.image_root / row.path), shape);
      } catch (const InputError& e) {
        log_warning(std::string("skipping row '") + row.id + "': " + e.what());
        ++data.report.skipped;
        continue;
      }
    }
    ++data.report.loaded;
    (row.split == "train" ? data.train : data.test).push_back(std::move(s));
  }
  return data;
}

}  // namespace faircl
