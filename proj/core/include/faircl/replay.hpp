#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "faircl/data.hpp"
#include "faircl/rng.hpp"

namespace faircl {

// Fixed-capacity reservoir over every sample ever offered: once full, the
// n-th offered sample replaces a uniformly chosen slot with probability
// capacity / n, so each seen sample is retained with equal probability.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed);

  void insert(const Sample& sample);
  void insert(std::span<const Sample> samples);

  // k distinct stored samples, uniformly without replacement. Throws
  // UsageError if the buffer is empty or k > size().
  std::vector<const Sample*> sample(std::size_t k, Rng& rng) const;
  std::vector<const Sample*> sample(std::size_t k, std::uint64_t seed) const;

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t seen() const { return seen_; }
  bool empty() const { return items_.empty(); }
  const std::vector<Sample>& items() const { return items_; }

  nlohmann::json save() const;
  static ReplayBuffer load(const nlohmann::json& j);

 private:
  std::size_t capacity_;
  std::size_t seen_ = 0;
  Rng rng_;
  std::vector<Sample> items_;
};

struct MixedBatch {
  std::vector<const Sample*> samples;
  std::size_t new_count = 0;
  std::size_t replay_count = 0;
};

// For a new batch of size B: the first ceil(B/2) new samples plus floor(B/2)
// replayed ones, shuffled together. With an empty buffer the new batch is
// returned unchanged (replay_count = 0).
MixedBatch interleave_batch(std::span<const Sample* const> new_batch, const ReplayBuffer& buffer, Rng& rng);

}  // namespace faircl
