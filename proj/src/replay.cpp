#include "amrl/replay.hpp"

#include <stdexcept>
#include <string>

namespace amrl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("replay capacity must be >= 1");
  records_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

ReplayBuffer::PackedObservation ReplayBuffer::pack(const Observation& o) {
  PackedObservation p;
  p.channels = static_cast<std::uint8_t>(o.channels);
  p.height = static_cast<std::uint16_t>(o.height);
  p.width = static_cast<std::uint16_t>(o.width);
  p.image.resize(o.image.size());
  for (std::size_t i = 0; i < o.image.size(); ++i) {
    const float v = o.image[i];
    if (v != 0.0f && v != 1.0f) throw std::invalid_argument("replay expects binary observation images");
    p.image[i] = v != 0.0f ? 1 : 0;
  }
  for (int slot = 0; slot < kHistoryLength; ++slot) {
    p.history[slot] = -1;
    for (int a = 0; a < kNumActions; ++a) {
      if (o.history[slot * kNumActions + a] != 0.0f) p.history[slot] = static_cast<std::int8_t>(a);
    }
  }
  return p;
}

Observation ReplayBuffer::unpack(const PackedObservation& p) {
  Observation o;
  o.channels = p.channels;
  o.height = p.height;
  o.width = p.width;
  o.image.assign(p.image.begin(), p.image.end());
  for (int slot = 0; slot < kHistoryLength; ++slot) {
    if (p.history[slot] >= 0) o.history[slot * kNumActions + p.history[slot]] = 1.0f;
  }
  return o;
}

void ReplayBuffer::push(const Transition& t) {
  if (t.action < 0 || t.action >= kNumActions) throw std::out_of_range("transition action outside 0..7");
  Record r{pack(t.obs), pack(t.next_obs), static_cast<std::int8_t>(t.action),
           t.reward, t.done};
  if (records_.size() < capacity_) {
    records_.push_back(std::move(r));
  } else {
    records_[next_] = std::move(r);
  }
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

std::size_t ReplayBuffer::slot(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay index " + std::to_string(i) + " out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : next_;
  return (oldest + i) % capacity_;
}

Transition ReplayBuffer::at(std::size_t i) const {
  const Record& r = records_[slot(i)];
  return {unpack(r.obs), r.action, r.reward, unpack(r.next_obs), r.done};
}

std::vector<std::size_t> ReplayBuffer::sample_indices_uniform(std::size_t batch_size, Rng& rng) const {
  if (batch_size == 0 || size_ < batch_size) {
    throw std::runtime_error("replay holds " + std::to_string(size_) +
                             " transitions, cannot sample a batch of " + std::to_string(batch_size));
  }
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

std::vector<std::size_t> ReplayBuffer::sample_indices_corrected(std::size_t batch_size, Rng& rng) const {
  if (batch_size == 0 || size_ < batch_size) {
    throw std::runtime_error("replay holds " + std::to_string(size_) +
                             " transitions, cannot sample a batch of " + std::to_string(batch_size));
  }
  std::vector<std::size_t> idx;
  idx.reserve(batch_size);
  if (batch_size > 1) idx = sample_indices_uniform(batch_size - 1, rng);
  idx.push_back(size_ - 1);
  return idx;
}

std::vector<Transition> ReplayBuffer::sample_corrected(std::size_t batch_size, Rng& rng) const {
  std::vector<Transition> out;
  for (auto i : sample_indices_corrected(batch_size, rng)) out.push_back(at(i));
  return out;
}

std::vector<Transition> ReplayBuffer::sample_uniform(std::size_t batch_size, Rng& rng) const {
  std::vector<Transition> out;
  for (auto i : sample_indices_uniform(batch_size, rng)) out.push_back(at(i));
  return out;
}

}  // namespace amrl
