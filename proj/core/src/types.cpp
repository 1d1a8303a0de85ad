#include "faircl/types.hpp"

#include "faircl/error.hpp"

namespace faircl {

std::string to_string(TaskMode mode) {
  return mode == TaskMode::kMulticlass ? "multiclass" : "multilabel";
}

std::string to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::kSingle:
      return "single";
    case HeadKind::kDomainDiscriminative:
      return "ddc";
    case HeadKind::kDomainIndependent:
      return "dic";
  }
  return "single";
}

TaskMode parse_task_mode(std::string_view text) {
  if (text.starts_with("multiclass")) return TaskMode::kMulticlass;
  if (text.starts_with("multilabel")) return TaskMode::kMultilabel;
  throw ConfigError("unknown task mode '" + std::string(text) + "' (expected multiclass or multilabel)");
}

HeadKind parse_head_kind(std::string_view text) {
  if (text == "single") return HeadKind::kSingle;
  if (text == "ddc") return HeadKind::kDomainDiscriminative;
  if (text == "dic") return HeadKind::kDomainIndependent;
  throw ConfigError("unknown head kind '" + std::string(text) + "' (expected single, ddc or dic)");
}

}  // namespace faircl
