#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "faircl/layers.hpp"
#include "faircl/parameters.hpp"
#include "faircl/types.hpp"

namespace faircl {

struct Conv2dLayer {
  std::string name;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  bool bias = true;
  bool residual = false;  // y = conv(x) + x, needs in_channels == out_channels
};

struct DenseLayer {
  std::string name;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  bool bias = true;
};

struct ReluLayer {
  std::string name;
};

struct MaxPoolLayer {
  std::string name;
  std::size_t window = 2;
};

struct DropoutLayer {
  std::string name;
  double rate = 0.0;
};

// Normalizes over every axis but the last. Running statistics live in
// Model::buffers() and are updated with `momentum` weight on the old value.
struct BatchNormLayer {
  std::string name;
  std::size_t channels = 0;
  double momentum = 0.9;
  double epsilon = 1e-5;
};

struct FlattenLayer {
  std::string name;
};

using Layer = std::variant<Conv2dLayer, DenseLayer, ReluLayer, MaxPoolLayer, DropoutLayer, BatchNormLayer,
                           FlattenLayer>;

// Final classification layer(s). Output width: M (single), N*M (ddc), or N
// heads of width M (dic).
struct HeadSpec {
  HeadKind kind = HeadKind::kSingle;
  std::size_t in_features = 0;
  std::size_t classes = 2;
  std::size_t domains = 1;
  bool bias = true;
};

// Backbone: four blocks of [conv, relu, conv, relu, maxpool, dropout,
// batch-norm], then three ReLU dense layers, then the head.
struct ModelConfig {
  Shape input_shape{100, 100, 3};
  std::array<std::size_t, 4> conv_widths{8, 16, 16, 32};
  std::array<std::size_t, 3> dense_widths{64, 32, 16};
  std::size_t kernel_size = 3;
  double dropout = 0.25;
  bool batch_norm = true;
  bool residual = false;
  HeadKind head = HeadKind::kSingle;
  std::size_t num_classes = 7;
  std::size_t num_domains = 1;
  TaskMode mode = TaskMode::kMulticlass;

  // Throws ConfigError.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& cfg);
// Missing keys keep their defaults.
ModelConfig model_config_from_json(const nlohmann::json& j);

class Model {
 public:
  // Parameters are allocated (zero) and every layer's shapes are checked;
  // a mismatch throws ConfigError naming the layer.
  Model(Shape input_shape, std::vector<Layer> layers, HeadSpec head, TaskMode mode = TaskMode::kMulticlass);

  // He-normal weights, zero biases, unit batch-norm scale. Deterministic in seed.
  void initialize(std::uint64_t seed);

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<Layer>& layers() const { return layers_; }
  const HeadSpec& head() const { return head_; }
  TaskMode mode() const { return mode_; }
  // Width of the logits returned by forward().
  std::size_t output_units() const;

  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  ParameterSet& buffers() { return buffers_; }
  const ParameterSet& buffers() const { return buffers_; }

  // Set when built through build_model(); required for checkpoints.
  const std::optional<ModelConfig>& config() const { return config_; }

  // Names of the parameters in the classification head(s). For dic, only the
  // head of `domain` when given.
  std::vector<std::string> head_parameter_names(std::optional<std::size_t> domain = std::nullopt) const;

 private:
  friend Model build_model(const ModelConfig&, std::uint64_t);

  Shape input_shape_;
  std::vector<Layer> layers_;
  HeadSpec head_;
  TaskMode mode_;
  ParameterSet params_;
  ParameterSet buffers_;
  std::optional<ModelConfig> config_;
};

Model build_model(const ModelConfig& cfg, std::uint64_t seed);

enum class Phase { kTrain, kEval };

struct ForwardOptions {
  Phase phase = Phase::kEval;
  std::uint64_t dropout_seed = 0;
  // dic only: when non-empty, sample s is routed through head domain_ids[s];
  // when empty, the logits of all heads are summed.
  std::span<const int> domain_ids = {};
};

// Values recorded by one forward pass. Consumed by exactly one backward().
class GradientTape {
 public:
  bool consumed() const { return consumed_; }

 private:
  friend struct TapeAccess;

  struct Record {
    Tensor input;
    Shape input_shape;
    Tensor aux;  // relu output or dropout mask
    std::vector<std::size_t> argmax;
    kernels::BatchNormForward batch_norm;
  };

  const Model* model_ = nullptr;
  std::vector<Record> records_;
  Tensor head_input_;
  std::vector<int> domain_ids_;
  Shape logits_shape_;
  Shape input_shape_;
  bool consumed_ = false;
};

struct ForwardResult {
  Tensor logits;
  GradientTape tape;
};

// batch: [B, H, W, C] matching the model input (or [B, F] for dense-only
// models). Logits: [B, output_units()] (dic: [B, M]).
ForwardResult forward(const Model& model, const Tensor& batch, const ForwardOptions& options = {});

// Evaluation-mode logits without recording a tape.
Tensor predict_logits(const Model& model, const Tensor& batch, std::span<const int> domain_ids = {});

// Gradients for every trainable parameter (zero where untouched). The tape's
// model must still be alive and unchanged. Throws UsageError on reuse.
Gradients backward(GradientTape& tape, const Tensor& loss_grad, Tensor* input_grad = nullptr);

// Folds the batch statistics of a training-phase tape into the running
// batch-norm statistics.
void apply_batch_statistics(Model& model, const GradientTape& tape);

// Softmax over all N*M units, then the class probability is the sum over the
// N domain copies. Joint unit layout: domain * M + class.
Tensor ddc_decode(const Tensor& logits, std::size_t domains, std::size_t classes);

inline std::size_t ddc_joint_index(std::size_t domain, std::size_t cls, std::size_t classes) {
  return domain * classes + cls;
}

}  // namespace faircl
