#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "faircl/model.hpp"
#include "faircl/parameters.hpp"

namespace faircl {

nlohmann::json to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ParameterSet& params);
ParameterSet parameter_set_from_json(const nlohmann::json& j);

// Versioned JSON container: model config, parameters, batch-norm buffers and
// optional strategy state / extra run data. Doubles are written with
// round-trip precision, so a reload gives bit-identical forward results.
struct Checkpoint {
  static constexpr int kVersion = 1;

  ModelConfig config;
  ParameterSet parameters;
  ParameterSet buffers;
  nlohmann::json strategy;  // null when absent
  nlohmann::json extra;     // null when absent
};

Checkpoint make_checkpoint(const Model& model, nlohmann::json strategy = nullptr, nlohmann::json extra = nullptr);
nlohmann::json to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Rebuilds the model and installs the stored parameters and buffers.
Model restore_model(const Checkpoint& ckpt);

}  // namespace faircl
