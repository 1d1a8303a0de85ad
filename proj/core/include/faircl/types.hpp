#pragma once

#include <string>
#include <string_view>

namespace faircl {

enum class TaskMode {
  kMulticlass,  // one class per sample, softmax cross-entropy
  kMultilabel,  // independent binary labels (e.g. action units), sigmoid BCE
};

enum class HeadKind {
  kSingle,                 // one M-way classifier
  kDomainDiscriminative,   // one N*M-way classifier over (domain, class) pairs
  kDomainIndependent,      // N separate M-way classifiers on a shared backbone
};

std::string to_string(TaskMode mode);
std::string to_string(HeadKind kind);
// Accepts "multiclass", "multiclass-7", "multilabel", "multilabel-12".
TaskMode parse_task_mode(std::string_view text);
// Accepts "single", "ddc", "dic".
HeadKind parse_head_kind(std::string_view text);

}  // namespace faircl
