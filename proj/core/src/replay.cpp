#include "faircl/replay.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <sstream>

#include "faircl/checkpoint.hpp"
#include "faircl/error.hpp"

namespace faircl {
namespace {

nlohmann::json sample_to_json(const Sample& s) {
  return {{"id", s.id},         {"input", to_json(s.input)}, {"class_id", s.class_id},
          {"labels", s.label_bits}, {"gender", s.gender},   {"race", s.race},
          {"subject", s.subject}, {"domain", s.domain}};
}

Sample sample_from_json(const nlohmann::json& j) {
  Sample s;
  s.id = j.at("id").get<std::string>();
  s.input = tensor_from_json(j.at("input"));
  s.class_id = j.at("class_id").get<int>();
  s.label_bits = j.at("labels").get<std::vector<std::uint8_t>>();
  s.gender = j.at("gender").get<std::string>();
  s.race = j.at("race").get<std::string>();
  s.subject = j.at("subject").get<std::string>();
  s.domain = j.at("domain").get<int>();
  return s;
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(mix_seed(seed, 17)) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::insert(const Sample& sample) {
  ++seen_;
  if (items_.size() < capacity_) {
    items_.push_back(sample);
    return;
  }
  std::uniform_int_distribution<std::size_t> pick(0, seen_ - 1);
  const std::size_t j = pick(rng_);
  if (j < capacity_) items_[j] = sample;
}

void ReplayBuffer::insert(std::span<const Sample> samples) {
  for (const auto& s : samples) insert(s);
}

std::vector<const Sample*> ReplayBuffer::sample(std::size_t k, Rng& rng) const {
  if (items_.empty()) throw UsageError("replay buffer is empty");
  if (k > items_.size()) {
    throw UsageError("cannot draw " + std::to_string(k) + " samples from a buffer of " + std::to_string(items_.size()));
  }
  std::vector<std::size_t> idx(items_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<const Sample*> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
    out.push_back(&items_[idx[i]]);
  }
  return out;
}

std::vector<const Sample*> ReplayBuffer::sample(std::size_t k, std::uint64_t seed) const {
  Rng rng(seed);
  return sample(k, rng);
}

nlohmann::json ReplayBuffer::save() const {
  std::ostringstream state;
  state << rng_;
  auto items = nlohmann::json::array();
  for (const auto& s : items_) items.push_back(sample_to_json(s));
  return {{"capacity", capacity_}, {"seen", seen_}, {"rng", state.str()}, {"items", std::move(items)}};
}

ReplayBuffer ReplayBuffer::load(const nlohmann::json& j) {
  try {
    ReplayBuffer buf(j.at("capacity").get<std::size_t>(), 0);
    buf.seen_ = j.at("seen").get<std::size_t>();
    std::istringstream state(j.at("rng").get<std::string>());
    state >> buf.rng_;
    for (const auto& item : j.at("items")) buf.items_.push_back(sample_from_json(item));
    if (buf.items_.size() > buf.capacity_) throw InputError("replay buffer state exceeds its capacity");
    return buf;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("replay buffer state: ") + e.what());
  }
}

MixedBatch interleave_batch(std::span<const Sample* const> new_batch, const ReplayBuffer& buffer, Rng& rng) {
  MixedBatch out;
  if (buffer.empty()) {
    out.samples.assign(new_batch.begin(), new_batch.end());
    out.new_count = new_batch.size();
    return out;
  }
  const std::size_t b = new_batch.size();
  const std::size_t fresh = (b + 1) / 2;
  const std::size_t replayed = std::min(b / 2, buffer.size());
  out.samples.assign(new_batch.begin(), new_batch.begin() + static_cast<std::ptrdiff_t>(fresh));
  for (const Sample* s : buffer.sample(replayed, rng)) out.samples.push_back(s);
  std::shuffle(out.samples.begin(), out.samples.end(), rng);
  out.new_count = fresh;
  out.replay_count = replayed;
  return out;
}

}  // namespace faircl
