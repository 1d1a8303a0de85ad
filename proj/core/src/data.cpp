#include "faircl/data.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "faircl/error.hpp"
#include "faircl/rng.hpp"

namespace faircl {

const std::string& Sample::attribute(std::string_view name) const {
  if (name == "gender") return gender;
  if (name == "race") return race;
  throw ConfigError("unknown attribute '" + std::string(name) + "' (expected gender or race)");
}

std::vector<std::string> TaskStream::domain_names() const {
  std::vector<std::string> names;
  for (const auto& t : tasks) names.push_back(t.name);
  return names;
}

std::vector<Sample> TaskStream::union_train() const {
  std::vector<Sample> all;
  for (const auto& t : tasks) all.insert(all.end(), t.train.begin(), t.train.end());
  return all;
}

TaskStream split_stream(std::span<const Sample> train, std::span<const Sample> test, const std::string& attribute,
                        const std::vector<std::string>& order, const std::vector<std::string>& vocabulary,
                        TaskMode mode, std::size_t num_classes) {
  const std::set<std::string> wanted(vocabulary.begin(), vocabulary.end());
  const std::set<std::string> given(order.begin(), order.end());
  if (given.size() != order.size()) throw ConfigError("task order for '" + attribute + "' repeats a value");
  for (const auto& v : vocabulary) {
    if (!given.contains(v)) throw ConfigError("task order for '" + attribute + "' is missing value '" + v + "'");
  }
  for (const auto& v : order) {
    if (!wanted.contains(v)) throw ConfigError("task order for '" + attribute + "' names unknown value '" + v + "'");
  }

  TaskStream stream;
  stream.attribute = attribute;
  stream.mode = mode;
  stream.num_classes = num_classes;
  for (const auto& v : order) stream.tasks.push_back(Task{v, {}, {}});

  auto place = [&](std::span<const Sample> samples, bool is_train) {
    for (const auto& s : samples) {
      const auto& value = s.attribute(attribute);
      auto it = std::find(order.begin(), order.end(), value);
      if (it == order.end()) {
        throw InputError("sample '" + s.id + "' has " + attribute + " '" + value + "' outside the task order");
      }
      const auto index = static_cast<std::size_t>(it - order.begin());
      Sample copy = s;
      copy.domain = static_cast<int>(index);
      (is_train ? stream.tasks[index].train : stream.tasks[index].test).push_back(std::move(copy));
    }
  };
  place(train, true);
  place(test, false);
  return stream;
}

Tensor flip_horizontal(const Tensor& image) {
  if (image.rank() != 3) throw InputError("flip_horizontal: expected [H, W, C], got " + shape_string(image.shape()));
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor out(image.shape());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) out[(y * w + x) * c + k] = image[(y * w + (w - 1 - x)) * c + k];
    }
  }
  return out;
}

std::vector<Sample> augment(std::span<const Sample> samples, std::uint64_t seed, double flip_probability) {
  Rng rng(seed);
  std::bernoulli_distribution flip(std::clamp(flip_probability, 0.0, 1.0));
  std::vector<Sample> out(samples.begin(), samples.end());
  for (auto& s : out) {
    if (flip(rng)) s.input = flip_horizontal(s.input);
  }
  return out;
}

Tensor stack_inputs(std::span<const Sample* const> samples, std::span<const std::uint8_t> flips) {
  if (samples.empty()) throw InputError("stack_inputs: empty batch");
  const Shape& item = samples.front()->input.shape();
  Shape shape{samples.size()};
  shape.insert(shape.end(), item.begin(), item.end());
  Tensor out(shape);
  const std::size_t stride = samples.front()->input.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Tensor& src = samples[i]->input;
    if (src.shape() != item) {
      throw InputError("sample '" + samples[i]->id + "' has shape " + shape_string(src.shape()) + ", expected " +
                       shape_string(item));
    }
    if (!flips.empty() && flips[i]) {
      const Tensor flipped = flip_horizontal(src);
      std::copy(flipped.data().begin(), flipped.data().end(), out.data().begin() + i * stride);
    } else {
      std::copy(src.data().begin(), src.data().end(), out.data().begin() + i * stride);
    }
  }
  return out;
}

Tensor one_hot_targets(std::span<const Sample* const> samples, std::size_t classes) {
  Tensor out({samples.size(), classes});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int c = samples[i]->class_id;
    if (c < 0 || static_cast<std::size_t>(c) >= classes) {
      throw InputError("sample '" + samples[i]->id + "' has class " + std::to_string(c) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
    out(i, static_cast<std::size_t>(c)) = 1.0;
  }
  return out;
}

Tensor joint_targets(std::span<const Sample* const> samples, std::size_t domains, std::size_t classes) {
  Tensor out({samples.size(), domains * classes});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int c = samples[i]->class_id;
    const int d = samples[i]->domain;
    if (d < 0 || static_cast<std::size_t>(d) >= domains) {
      throw InputError("sample '" + samples[i]->id + "' is missing a domain label");
    }
    if (c < 0 || static_cast<std::size_t>(c) >= classes) {
      throw InputError("sample '" + samples[i]->id + "' has class " + std::to_string(c) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
    out(i, static_cast<std::size_t>(d) * classes + static_cast<std::size_t>(c)) = 1.0;
  }
  return out;
}

Tensor multilabel_targets(std::span<const Sample* const> samples, std::size_t labels) {
  Tensor out({samples.size(), labels});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& bits = samples[i]->label_bits;
    if (bits.size() != labels) {
      throw InputError("sample '" + samples[i]->id + "' has " + std::to_string(bits.size()) + " labels, expected " +
                       std::to_string(labels));
    }
    for (std::size_t l = 0; l < labels; ++l) out(i, l) = bits[l] ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace faircl
