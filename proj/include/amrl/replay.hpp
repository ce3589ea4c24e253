#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "amrl/grid_env.hpp"
#include "amrl/rng.hpp"

namespace amrl {

struct Transition {
  Observation obs;
  int action = 0;
  double reward = 0.0;
  Observation next_obs;
  bool done = false;
};

// Fixed-capacity FIFO ring of transitions. Observations are binary images
// plus a one-hot action history, so records are stored as packed bytes and
// expanded on read.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Transition& t);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return size_ == 0; }

  // 0 is the oldest stored transition, size() - 1 the newest.
  Transition at(std::size_t i) const;
  Transition last() const { return at(size_ - 1); }

  // batch_size - 1 uniform draws (with replacement) plus the newest
  // transition, which is always the final element.
  std::vector<std::size_t> sample_indices_corrected(std::size_t batch_size, Rng& rng) const;
  std::vector<std::size_t> sample_indices_uniform(std::size_t batch_size, Rng& rng) const;

  std::vector<Transition> sample_corrected(std::size_t batch_size, Rng& rng) const;
  std::vector<Transition> sample_uniform(std::size_t batch_size, Rng& rng) const;

 private:
  struct PackedObservation {
    std::uint8_t channels = 0;
    std::uint16_t height = 0;
    std::uint16_t width = 0;
    std::vector<std::uint8_t> image;
    std::array<std::int8_t, kHistoryLength> history{};
  };
  struct Record {
    PackedObservation obs;
    PackedObservation next_obs;
    std::int8_t action = 0;
    double reward = 0.0;
    bool done = false;
  };

  static PackedObservation pack(const Observation& o);
  static Observation unpack(const PackedObservation& p);
  std::size_t slot(std::size_t i) const;

  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t next_ = 0;
  std::vector<Record> records_;
};

}  // namespace amrl
