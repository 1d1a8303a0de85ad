#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faircl/tensor.hpp"
#include "faircl/types.hpp"

namespace faircl {

struct Sample {
  std::string id;
  Tensor input;                          // [H, W, C], values in [0, 1]
  int class_id = -1;                     // multiclass label
  std::vector<std::uint8_t> label_bits;  // multilabel labels
  std::string gender;
  std::string race;
  std::string subject;
  int domain = -1;  // position of the sample's attribute value in the task order

  // "gender" or "race".
  const std::string& attribute(std::string_view name) const;
};

struct Task {
  std::string name;  // attribute value, e.g. "Female"
  std::vector<Sample> train;
  std::vector<Sample> test;
};

// Domain-incremental stream: one task per attribute value, in order.
struct TaskStream {
  std::string attribute;
  TaskMode mode = TaskMode::kMulticlass;
  std::size_t num_classes = 0;  // classes (multiclass) or labels (multilabel)
  std::vector<Task> tasks;

  std::vector<std::string> domain_names() const;
  // Every training sample of every task, in task order.
  std::vector<Sample> union_train() const;
};

// Partitions `train`/`test` into one task per value of `attribute`, ordered by
// `order`, which must be a permutation of `vocabulary`. Sets Sample::domain.
TaskStream split_stream(std::span<const Sample> train, std::span<const Sample> test, const std::string& attribute,
                        const std::vector<std::string>& order, const std::vector<std::string>& vocabulary,
                        TaskMode mode, std::size_t num_classes);

// Left-right mirror of an [H, W, C] image.
Tensor flip_horizontal(const Tensor& image);

// Each sample mirrored independently with probability `flip_probability`;
// labels and attributes untouched. Deterministic in seed.
std::vector<Sample> augment(std::span<const Sample> samples, std::uint64_t seed, double flip_probability = 0.5);

// Stacks sample inputs into [B, H, W, C]. `flips`, when non-empty, mirrors
// the marked samples.
Tensor stack_inputs(std::span<const Sample* const> samples, std::span<const std::uint8_t> flips = {});

// [B, classes] one-hot rows from class_id.
Tensor one_hot_targets(std::span<const Sample* const> samples, std::size_t classes);
// [B, domains*classes] one-hot rows at domain*classes + class_id.
Tensor joint_targets(std::span<const Sample* const> samples, std::size_t domains, std::size_t classes);
// [B, labels] from label_bits.
Tensor multilabel_targets(std::span<const Sample* const> samples, std::size_t labels);

}  // namespace faircl
