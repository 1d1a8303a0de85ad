#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "faircl/tensor.hpp"

namespace faircl {

// Named tensors in insertion order. Used for trainable parameters, their
// gradients, optimizer moments, and every per-parameter importance map.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
  };

  Tensor& add(std::string name, Tensor value);

  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t scalar_count() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  Entry& entry(std::size_t index) { return entries_[index]; }
  const Entry& entry(std::size_t index) const { return entries_[index]; }

  // Same names and shapes, all zeros.
  ParameterSet zeros_like() const;
  // True when names (in order) and shapes agree.
  bool same_layout(const ParameterSet& other) const;
  // Throws InputError describing the first disagreement.
  void require_same_layout(const ParameterSet& other, std::string_view context) const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline bool operator==(const ParameterSet::Entry& a, const ParameterSet::Entry& b) {
  return a.name == b.name && a.value == b.value;
}

using Gradients = ParameterSet;

}  // namespace faircl
