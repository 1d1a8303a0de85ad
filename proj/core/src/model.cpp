#include "faircl/model.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "faircl/error.hpp"
#include "faircl/loss.hpp"
#include "faircl/rng.hpp"

namespace faircl {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

const std::string& layer_name(const Layer& layer) {
  return std::visit([](const auto& l) -> const std::string& { return l.name; }, layer);
}

std::string weight_name(const std::string& layer) { return layer + ".weight"; }
std::string bias_name(const std::string& layer) { return layer + ".bias"; }

std::string head_layer_name(const HeadSpec& head, std::size_t domain) {
  if (head.kind == HeadKind::kDomainIndependent) return "head." + std::to_string(domain);
  return "head";
}

std::size_t head_count(const HeadSpec& head) {
  return head.kind == HeadKind::kDomainIndependent ? head.domains : 1;
}

std::size_t head_width(const HeadSpec& head) {
  return head.kind == HeadKind::kDomainDiscriminative ? head.domains * head.classes : head.classes;
}

}  // namespace

void ModelConfig::validate() const {
  if (input_shape.size() != 3) throw ConfigError("model: input shape must be [H, W, C]");
  for (std::size_t d : input_shape) {
    if (d == 0) throw ConfigError("model: input dimensions must be positive");
  }
  for (std::size_t w : conv_widths) {
    if (w == 0) throw ConfigError("model: conv widths must be positive");
  }
  for (std::size_t w : dense_widths) {
    if (w == 0) throw ConfigError("model: dense widths must be positive");
  }
  if (kernel_size % 2 == 0) throw ConfigError("model: kernel size must be odd");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must lie in [0, 1)");
  if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  if (num_domains < 1) throw ConfigError("model: num_domains must be >= 1");
  if (head == HeadKind::kDomainIndependent && num_domains < 2) {
    throw ConfigError("model: dic head requires num_domains >= 2");
  }
  if ((input_shape[0] >> 4) == 0 || (input_shape[1] >> 4) == 0) {
    throw ConfigError("model: input " + shape_string(input_shape) + " too small for four 2x2 pooling stages");
  }
}

nlohmann::json to_json(const ModelConfig& cfg) {
  return {{"input_shape", cfg.input_shape},
          {"conv_widths", cfg.conv_widths},
          {"dense_widths", cfg.dense_widths},
          {"kernel_size", cfg.kernel_size},
          {"dropout", cfg.dropout},
          {"batch_norm", cfg.batch_norm},
          {"residual", cfg.residual},
          {"head", to_string(cfg.head)},
          {"num_classes", cfg.num_classes},
          {"num_domains", cfg.num_domains},
          {"mode", to_string(cfg.mode)}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  try {
    if (j.contains("input_shape")) cfg.input_shape = j.at("input_shape").get<Shape>();
    if (j.contains("conv_widths")) cfg.conv_widths = j.at("conv_widths").get<std::array<std::size_t, 4>>();
    if (j.contains("dense_widths")) cfg.dense_widths = j.at("dense_widths").get<std::array<std::size_t, 3>>();
    cfg.kernel_size = j.value("kernel_size", cfg.kernel_size);
    cfg.dropout = j.value("dropout", cfg.dropout);
    cfg.batch_norm = j.value("batch_norm", cfg.batch_norm);
    cfg.residual = j.value("residual", cfg.residual);
    if (j.contains("head")) cfg.head = parse_head_kind(j.at("head").get<std::string>());
    cfg.num_classes = j.value("num_classes", cfg.num_classes);
    cfg.num_domains = j.value("num_domains", cfg.num_domains);
    if (j.contains("mode")) cfg.mode = parse_task_mode(j.at("mode").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return cfg;
}

Model::Model(Shape input_shape, std::vector<Layer> layers, HeadSpec head, TaskMode mode)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)), head_(head), mode_(mode) {
  Shape cur = input_shape_;
  auto fail = [](const std::string& layer, const std::string& what) {
    throw ConfigError("layer '" + layer + "': " + what);
  };
  for (const auto& layer : layers_) {
    std::visit(Overloaded{
                   [&](const Conv2dLayer& l) {
                     if (cur.size() != 3 || cur[2] != l.in_channels) {
                       fail(l.name, "expects [H, W, " + std::to_string(l.in_channels) + "], got " +
                                        shape_string(cur));
                     }
                     if (l.kernel % 2 == 0) fail(l.name, "kernel size must be odd");
                     if (l.residual && l.in_channels != l.out_channels) {
                       fail(l.name, "residual connection needs equal in/out channels");
                     }
                     params_.add(weight_name(l.name), Tensor({l.kernel, l.kernel, l.in_channels, l.out_channels}));
                     if (l.bias) params_.add(bias_name(l.name), Tensor({l.out_channels}));
                     cur[2] = l.out_channels;
                   },
                   [&](const DenseLayer& l) {
                     if (cur.size() != 1 || cur[0] != l.in_features) {
                       fail(l.name, "expects [" + std::to_string(l.in_features) + "], got " + shape_string(cur));
                     }
                     params_.add(weight_name(l.name), Tensor({l.in_features, l.out_features}));
                     if (l.bias) params_.add(bias_name(l.name), Tensor({l.out_features}));
                     cur = {l.out_features};
                   },
                   [&](const ReluLayer&) {},
                   [&](const MaxPoolLayer& l) {
                     if (cur.size() != 3 || cur[0] < l.window || cur[1] < l.window || l.window == 0) {
                       fail(l.name, "cannot pool " + shape_string(cur) + " with window " + std::to_string(l.window));
                     }
                     cur[0] /= l.window;
                     cur[1] /= l.window;
                   },
                   [&](const DropoutLayer& l) {
                     if (!(l.rate >= 0.0 && l.rate < 1.0)) fail(l.name, "dropout rate must lie in [0, 1)");
                   },
                   [&](const BatchNormLayer& l) {
                     if (cur.empty() || cur.back() != l.channels) {
                       fail(l.name, "expects " + std::to_string(l.channels) + " channels, got " + shape_string(cur));
                     }
                     params_.add(l.name + ".gamma", Tensor({l.channels}, 1.0));
                     params_.add(l.name + ".beta", Tensor({l.channels}));
                     buffers_.add(l.name + ".running_mean", Tensor({l.channels}));
                     buffers_.add(l.name + ".running_var", Tensor({l.channels}, 1.0));
                   },
                   [&](const FlattenLayer&) { cur = {shape_volume(cur)}; },
               },
               layer);
  }
  if (cur.size() != 1 || cur[0] != head_.in_features) {
    fail("head", "expects [" + std::to_string(head_.in_features) + "], got " + shape_string(cur));
  }
  if (head_.classes == 0 || head_.domains == 0) fail("head", "classes and domains must be positive");
  for (std::size_t d = 0; d < head_count(head_); ++d) {
    const auto name = head_layer_name(head_, d);
    params_.add(weight_name(name), Tensor({head_.in_features, head_width(head_)}));
    if (head_.bias) params_.add(bias_name(name), Tensor({head_width(head_)}));
  }
}

void Model::initialize(std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& [name, value] : params_) {
    if (name.ends_with(".weight")) {
      const auto& s = value.shape();
      const std::size_t fan_in = s.size() == 4 ? s[0] * s[1] * s[2] : s[0];
      const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (double& v : value.data()) v = scale * normal(rng);
    } else if (name.ends_with(".gamma")) {
      value.fill(1.0);
    } else {
      value.fill(0.0);
    }
  }
  for (auto& [name, value] : buffers_) value.fill(name.ends_with(".running_var") ? 1.0 : 0.0);
}

std::size_t Model::output_units() const { return head_width(head_); }

std::vector<std::string> Model::head_parameter_names(std::optional<std::size_t> domain) const {
  std::vector<std::string> names;
  for (std::size_t d = 0; d < head_count(head_); ++d) {
    if (domain && head_.kind == HeadKind::kDomainIndependent && *domain != d) continue;
    const auto name = head_layer_name(head_, d);
    names.push_back(weight_name(name));
    if (head_.bias) names.push_back(bias_name(name));
  }
  return names;
}

Model build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<Layer> layers;
  Shape cur = cfg.input_shape;
  for (std::size_t b = 0; b < cfg.conv_widths.size(); ++b) {
    const std::string block = "block" + std::to_string(b);
    const std::size_t width = cfg.conv_widths[b];
    layers.emplace_back(Conv2dLayer{block + ".conv0", cur[2], width, cfg.kernel_size, true, false});
    layers.emplace_back(ReluLayer{block + ".relu0"});
    layers.emplace_back(Conv2dLayer{block + ".conv1", width, width, cfg.kernel_size, true, cfg.residual});
    layers.emplace_back(ReluLayer{block + ".relu1"});
    layers.emplace_back(MaxPoolLayer{block + ".pool", 2});
    if (cfg.dropout > 0.0) layers.emplace_back(DropoutLayer{block + ".dropout", cfg.dropout});
    if (cfg.batch_norm) layers.emplace_back(BatchNormLayer{block + ".bn", width});
    cur = {cur[0] / 2, cur[1] / 2, width};
  }
  layers.emplace_back(FlattenLayer{"flatten"});
  std::size_t features = shape_volume(cur);
  for (std::size_t d = 0; d < cfg.dense_widths.size(); ++d) {
    const std::string name = "dense" + std::to_string(d);
    layers.emplace_back(DenseLayer{name, features, cfg.dense_widths[d], true});
    layers.emplace_back(ReluLayer{name + ".relu"});
    features = cfg.dense_widths[d];
  }
  HeadSpec head{cfg.head, features, cfg.num_classes, cfg.num_domains, true};
  Model model(cfg.input_shape, std::move(layers), head, cfg.mode);
  model.config_ = cfg;
  model.initialize(seed);
  return model;
}

struct TapeAccess {
  static ForwardResult run(const Model& model, const Tensor& batch, const ForwardOptions& opt, bool record);
  static Gradients backward(GradientTape& tape, const Tensor& loss_grad, Tensor* input_grad);
  static void apply(Model& model, const GradientTape& tape);
};

ForwardResult TapeAccess::run(const Model& model, const Tensor& batch, const ForwardOptions& opt, bool record) {
  const auto& in_shape = model.input_shape();
  const auto& layers = model.layers();
  const auto& params = model.parameters();
  const auto& buffers = model.buffers();
  const std::string first = layers.empty() ? std::string("head") : layer_name(layers.front());

  bool shape_ok = batch.rank() == in_shape.size() + 1 && batch.dim(0) > 0;
  for (std::size_t i = 0; shape_ok && i < in_shape.size(); ++i) shape_ok = batch.dim(i + 1) == in_shape[i];
  if (!shape_ok) {
    throw ConfigError("layer '" + first + "': batch shape " + shape_string(batch.shape()) +
                      " does not match model input [B, " + shape_string(in_shape).substr(1));
  }
  const std::size_t batch_size = batch.dim(0);
  const bool train = opt.phase == Phase::kTrain;

  ForwardResult result;
  GradientTape& tape = result.tape;
  tape.model_ = &model;
  tape.input_shape_ = batch.shape();
  if (record) tape.records_.resize(layers.size());

  Tensor x = batch;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    GradientTape::Record scratch;
    GradientTape::Record& rec = record ? tape.records_[i] : scratch;
    std::visit(Overloaded{
                   [&](const Conv2dLayer& l) {
                     const Tensor* bias = l.bias ? &params.at(bias_name(l.name)) : nullptr;
                     Tensor y = kernels::conv2d_forward(x, params.at(weight_name(l.name)), bias);
                     if (l.residual) y += x;
                     if (record) rec.input = std::move(x);
                     x = std::move(y);
                   },
                   [&](const DenseLayer& l) {
                     const Tensor* bias = l.bias ? &params.at(bias_name(l.name)) : nullptr;
                     Tensor y = kernels::dense_forward(x, params.at(weight_name(l.name)), bias);
                     if (record) rec.input = std::move(x);
                     x = std::move(y);
                   },
                   [&](const ReluLayer&) {
                     x = kernels::relu_forward(x);
                     if (record) rec.aux = x;
                   },
                   [&](const MaxPoolLayer& l) {
                     auto pooled = kernels::maxpool2d_forward(x, l.window);
                     if (record) {
                       rec.input_shape = x.shape();
                       rec.argmax = std::move(pooled.argmax);
                     }
                     x = std::move(pooled.output);
                   },
                   [&](const DropoutLayer& l) {
                     if (!train || l.rate <= 0.0) return;
                     Tensor mask = kernels::dropout_mask(x.shape(), l.rate, mix_seed(opt.dropout_seed, i));
                     for (std::size_t k = 0; k < x.size(); ++k) x[k] *= mask[k];
                     if (record) rec.aux = std::move(mask);
                   },
                   [&](const BatchNormLayer& l) {
                     const Tensor& gamma = params.at(l.name + ".gamma");
                     const Tensor& beta = params.at(l.name + ".beta");
                     if (train) {
                       auto f = kernels::batchnorm_train_forward(x, gamma, beta, l.epsilon);
                       x = f.output;
                       rec.batch_norm = std::move(f);
                     } else {
                       Tensor y = kernels::batchnorm_eval_forward(x, gamma, beta, buffers.at(l.name + ".running_mean"),
                                                                  buffers.at(l.name + ".running_var"), l.epsilon);
                       if (record) rec.input = std::move(x);
                       x = std::move(y);
                     }
                   },
                   [&](const FlattenLayer&) {
                     if (record) rec.input_shape = x.shape();
                     const std::size_t features = x.size() / batch_size;
                     x = x.reshaped({batch_size, features});
                   },
               },
               layers[i]);
  }

  const HeadSpec& head = model.head();
  if (head.kind == HeadKind::kDomainIndependent) {
    const std::size_t classes = head.classes;
    Tensor logits({batch_size, classes});
    if (!opt.domain_ids.empty()) {
      if (opt.domain_ids.size() != batch_size) {
        throw InputError("dic: " + std::to_string(opt.domain_ids.size()) + " domain ids for batch of " +
                         std::to_string(batch_size));
      }
      for (int d : opt.domain_ids) {
        if (d < 0 || static_cast<std::size_t>(d) >= head.domains) {
          throw InputError("dic: domain id " + std::to_string(d) + " outside [0, " + std::to_string(head.domains) + ")");
        }
      }
      for (std::size_t d = 0; d < head.domains; ++d) {
        const auto name = head_layer_name(head, d);
        const Tensor* bias = head.bias ? &params.at(bias_name(name)) : nullptr;
        std::vector<std::size_t> rows;
        for (std::size_t s = 0; s < batch_size; ++s) {
          if (static_cast<std::size_t>(opt.domain_ids[s]) == d) rows.push_back(s);
        }
        if (rows.empty()) continue;
        Tensor sub({rows.size(), x.dim(1)});
        for (std::size_t r = 0; r < rows.size(); ++r) {
          for (std::size_t f = 0; f < x.dim(1); ++f) sub(r, f) = x(rows[r], f);
        }
        Tensor out = kernels::dense_forward(sub, params.at(weight_name(name)), bias);
        for (std::size_t r = 0; r < rows.size(); ++r) {
          for (std::size_t c = 0; c < classes; ++c) logits(rows[r], c) = out(r, c);
        }
      }
      if (record) tape.domain_ids_.assign(opt.domain_ids.begin(), opt.domain_ids.end());
    } else {
      for (std::size_t d = 0; d < head.domains; ++d) {
        const auto name = head_layer_name(head, d);
        const Tensor* bias = head.bias ? &params.at(bias_name(name)) : nullptr;
        logits += kernels::dense_forward(x, params.at(weight_name(name)), bias);
      }
    }
    result.logits = std::move(logits);
  } else {
    const auto name = head_layer_name(head, 0);
    const Tensor* bias = head.bias ? &params.at(bias_name(name)) : nullptr;
    result.logits = kernels::dense_forward(x, params.at(weight_name(name)), bias);
  }
  if (record) tape.head_input_ = std::move(x);
  tape.logits_shape_ = result.logits.shape();
  if (!record) tape.consumed_ = true;
  return result;
}

Gradients TapeAccess::backward(GradientTape& tape, const Tensor& loss_grad, Tensor* input_grad) {
  if (tape.consumed_) throw UsageError("gradient tape already consumed");
  if (tape.model_ == nullptr) throw UsageError("gradient tape is empty");
  if (loss_grad.shape() != tape.logits_shape_) {
    throw InputError("backward: loss gradient " + shape_string(loss_grad.shape()) + " does not match logits " +
                     shape_string(tape.logits_shape_));
  }
  tape.consumed_ = true;
  const Model& model = *tape.model_;
  const auto& params = model.parameters();
  const auto& buffers = model.buffers();
  const HeadSpec& head = model.head();
  Gradients grads = params.zeros_like();

  const Tensor& h = tape.head_input_;
  Tensor dx(h.shape());
  if (head.kind == HeadKind::kDomainIndependent && !tape.domain_ids_.empty()) {
    for (std::size_t d = 0; d < head.domains; ++d) {
      std::vector<std::size_t> rows;
      for (std::size_t s = 0; s < tape.domain_ids_.size(); ++s) {
        if (static_cast<std::size_t>(tape.domain_ids_[s]) == d) rows.push_back(s);
      }
      if (rows.empty()) continue;
      const auto name = head_layer_name(head, d);
      Tensor sub({rows.size(), h.dim(1)});
      Tensor gsub({rows.size(), head.classes});
      for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t f = 0; f < h.dim(1); ++f) sub(r, f) = h(rows[r], f);
        for (std::size_t c = 0; c < head.classes; ++c) gsub(r, c) = loss_grad(rows[r], c);
      }
      auto g = kernels::dense_backward(sub, params.at(weight_name(name)), gsub, head.bias);
      grads.at(weight_name(name)) = std::move(g.weight);
      if (head.bias) grads.at(bias_name(name)) = std::move(g.bias);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t f = 0; f < h.dim(1); ++f) dx(rows[r], f) = g.input(r, f);
      }
    }
  } else {
    for (std::size_t d = 0; d < head_count(head); ++d) {
      const auto name = head_layer_name(head, d);
      auto g = kernels::dense_backward(h, params.at(weight_name(name)), loss_grad, head.bias);
      grads.at(weight_name(name)) = std::move(g.weight);
      if (head.bias) grads.at(bias_name(name)) = std::move(g.bias);
      dx += g.input;
    }
  }

  const auto& layers = model.layers();
  for (std::size_t i = layers.size(); i-- > 0;) {
    auto& rec = tape.records_[i];
    std::visit(Overloaded{
                   [&](const Conv2dLayer& l) {
                     auto g = kernels::conv2d_backward(rec.input, params.at(weight_name(l.name)), dx, l.bias);
                     grads.at(weight_name(l.name)) = std::move(g.weight);
                     if (l.bias) grads.at(bias_name(l.name)) = std::move(g.bias);
                     if (l.residual) g.input += dx;
                     dx = std::move(g.input);
                   },
                   [&](const DenseLayer& l) {
                     auto g = kernels::dense_backward(rec.input, params.at(weight_name(l.name)), dx, l.bias);
                     grads.at(weight_name(l.name)) = std::move(g.weight);
                     if (l.bias) grads.at(bias_name(l.name)) = std::move(g.bias);
                     dx = std::move(g.input);
                   },
                   [&](const ReluLayer&) { dx = kernels::relu_backward(rec.aux, dx); },
                   [&](const MaxPoolLayer&) { dx = kernels::maxpool2d_backward(rec.input_shape, rec.argmax, dx); },
                   [&](const DropoutLayer&) {
                     if (rec.aux.empty()) return;
                     for (std::size_t k = 0; k < dx.size(); ++k) dx[k] *= rec.aux[k];
                   },
                   [&](const BatchNormLayer& l) {
                     const Tensor& gamma = params.at(l.name + ".gamma");
                     if (!rec.batch_norm.inv_std.empty()) {
                       auto g = kernels::batchnorm_backward(rec.batch_norm, gamma, dx);
                       grads.at(l.name + ".gamma") = std::move(g.gamma);
                       grads.at(l.name + ".beta") = std::move(g.beta);
                       dx = std::move(g.input);
                       return;
                     }
                     // Evaluation phase: affine map with fixed running statistics.
                     const Tensor& mean = buffers.at(l.name + ".running_mean");
                     const Tensor& var = buffers.at(l.name + ".running_var");
                     Tensor& dgamma = grads.at(l.name + ".gamma");
                     Tensor& dbeta = grads.at(l.name + ".beta");
                     for (std::size_t k = 0; k < dx.size(); ++k) {
                       const std::size_t c = k % l.channels;
                       const double inv_std = 1.0 / std::sqrt(var[c] + l.epsilon);
                       dgamma[c] += dx[k] * (rec.input[k] - mean[c]) * inv_std;
                       dbeta[c] += dx[k];
                       dx[k] *= gamma[c] * inv_std;
                     }
                   },
                   [&](const FlattenLayer&) { dx = dx.reshaped(rec.input_shape); },
               },
               layers[i]);
  }
  if (input_grad != nullptr) *input_grad = std::move(dx);
  return grads;
}

void TapeAccess::apply(Model& model, const GradientTape& tape) {
  if (tape.model_ != &model) throw UsageError("apply_batch_statistics: tape belongs to a different model");
  const auto& layers = model.layers();
  for (std::size_t i = 0; i < layers.size() && i < tape.records_.size(); ++i) {
    const auto* bn = std::get_if<BatchNormLayer>(&layers[i]);
    if (bn == nullptr) continue;
    const auto& f = tape.records_[i].batch_norm;
    if (f.mean.empty()) continue;
    const double rows = static_cast<double>(f.output.size() / bn->channels);
    const double unbias = rows > 1.0 ? rows / (rows - 1.0) : 1.0;
    Tensor& mean = model.buffers().at(bn->name + ".running_mean");
    Tensor& var = model.buffers().at(bn->name + ".running_var");
    for (std::size_t c = 0; c < bn->channels; ++c) {
      mean[c] = bn->momentum * mean[c] + (1.0 - bn->momentum) * f.mean[c];
      var[c] = bn->momentum * var[c] + (1.0 - bn->momentum) * f.variance[c] * unbias;
    }
  }
}

ForwardResult forward(const Model& model, const Tensor& batch, const ForwardOptions& options) {
  return TapeAccess::run(model, batch, options, true);
}

Tensor predict_logits(const Model& model, const Tensor& batch, std::span<const int> domain_ids) {
  ForwardOptions opt;
  opt.phase = Phase::kEval;
  opt.domain_ids = domain_ids;
  return TapeAccess::run(model, batch, opt, false).logits;
}

Gradients backward(GradientTape& tape, const Tensor& loss_grad, Tensor* input_grad) {
  return TapeAccess::backward(tape, loss_grad, input_grad);
}

void apply_batch_statistics(Model& model, const GradientTape& tape) { TapeAccess::apply(model, tape); }

Tensor ddc_decode(const Tensor& logits, std::size_t domains, std::size_t classes) {
  if (logits.rank() != 2 || logits.dim(1) != domains * classes) {
    throw InputError("ddc_decode: logits " + shape_string(logits.shape()) + " do not have width " +
                     std::to_string(domains) + "x" + std::to_string(classes));
  }
  const Tensor joint = softmax(logits);
  Tensor out({logits.dim(0), classes});
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    for (std::size_t d = 0; d < domains; ++d) {
      for (std::size_t c = 0; c < classes; ++c) out(r, c) += joint(r, ddc_joint_index(d, c, classes));
    }
  }
  return out;
}

}  // namespace faircl
