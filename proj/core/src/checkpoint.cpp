#include "faircl/checkpoint.hpp"

#include <fstream>

#include "faircl/error.hpp"

namespace faircl {

nlohmann::json to_json(const Tensor& t) { return {{"shape", t.shape()}, {"data", t.values()}}; }

Tensor tensor_from_json(const nlohmann::json& j) {
  try {
    return Tensor(j.at("shape").get<Shape>(), j.at("data").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("tensor: ") + e.what());
  }
}

nlohmann::json to_json(const ParameterSet& params) {
  auto out = nlohmann::json::array();
  for (const auto& [name, value] : params) out.push_back({{"name", name}, {"tensor", to_json(value)}});
  return out;
}

ParameterSet parameter_set_from_json(const nlohmann::json& j) {
  ParameterSet params;
  try {
    for (const auto& e : j) params.add(e.at("name").get<std::string>(), tensor_from_json(e.at("tensor")));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("parameter set: ") + e.what());
  }
  return params;
}

Checkpoint make_checkpoint(const Model& model, nlohmann::json strategy, nlohmann::json extra) {
  if (!model.config()) throw UsageError("checkpoint: model was not built from a ModelConfig");
  return Checkpoint{*model.config(), model.parameters(), model.buffers(), std::move(strategy), std::move(extra)};
}

nlohmann::json to_json(const Checkpoint& ckpt) {
  return {{"format", "faircl-checkpoint"},
          {"version", Checkpoint::kVersion},
          {"config", to_json(ckpt.config)},
          {"parameters", to_json(ckpt.parameters)},
          {"buffers", to_json(ckpt.buffers)},
          {"strategy", ckpt.strategy},
          {"extra", ckpt.extra}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "faircl-checkpoint") throw InputError("not a faircl checkpoint");
  const int version = j.value("version", 0);
  if (version != Checkpoint::kVersion) {
    throw InputError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.config = model_config_from_json(j.at("config"));
  c.parameters = parameter_set_from_json(j.at("parameters"));
  c.buffers = parameter_set_from_json(j.at("buffers"));
  c.strategy = j.value("strategy", nlohmann::json());
  c.extra = j.value("extra", nlohmann::json());
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write checkpoint '" + path.string() + "'");
  out << to_json(ckpt).dump();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint '" + path.string() + "'");
  try {
    return checkpoint_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("checkpoint '" + path.string() + "': " + e.what());
  }
}

Model restore_model(const Checkpoint& ckpt) {
  Model model = build_model(ckpt.config, 0);
  model.parameters().require_same_layout(ckpt.parameters, "checkpoint parameters");
  model.buffers().require_same_layout(ckpt.buffers, "checkpoint buffers");
  model.parameters() = ckpt.parameters;
  model.buffers() = ckpt.buffers;
  return model;
}

}  // namespace faircl
