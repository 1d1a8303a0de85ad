#include "faircl/parameters.hpp"

#include "faircl/error.hpp"

namespace faircl {

Tensor& ParameterSet::add(std::string name, Tensor value) {
  if (index_.contains(name)) {
    throw ConfigError("duplicate parameter name '" + name + "'");
  }
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(value)});
  return entries_.back().value;
}

bool ParameterSet::contains(std::string_view name) const { return index_.contains(std::string(name)); }

Tensor& ParameterSet::at(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw InputError("unknown parameter '" + std::string(name) + "'");
  return entries_[it->second].value;
}

const Tensor& ParameterSet::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw InputError("unknown parameter '" + std::string(name) + "'");
  return entries_[it->second].value;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t total = 0;
  for (const auto& e : entries_) total += e.value.size();
  return total;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& e : entries_) out.add(e.name, Tensor::zeros_like(e.value));
  return out;
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
  if (other.entries_.size() != entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name) return false;
    if (entries_[i].value.shape() != other.entries_[i].value.shape()) return false;
  }
  return true;
}

void ParameterSet::require_same_layout(const ParameterSet& other, std::string_view context) const {
  if (other.entries_.size() != entries_.size()) {
    throw InputError(std::string(context) + ": expected " + std::to_string(entries_.size()) +
                     " tensors, got " + std::to_string(other.entries_.size()));
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name) {
      throw InputError(std::string(context) + ": tensor " + std::to_string(i) + " is '" + b.name +
                       "', expected '" + a.name + "'");
    }
    if (a.value.shape() != b.value.shape()) {
      throw InputError(std::string(context) + ": '" + a.name + "' has shape " +
                       shape_string(b.value.shape()) + ", expected " + shape_string(a.value.shape()));
    }
  }
}

bool operator==(const ParameterSet& a, const ParameterSet& b) { return a.entries_ == b.entries_; }

}  // namespace faircl
