#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "amrl/network.hpp"
#include "amrl/replay.hpp"

namespace amrl {

// Raised when a loss or parameter becomes NaN/Inf; the message carries the
// statistics of the offending batch.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
struct TransitionBatch {
  nn::ObsBatch<T> obs;
  nn::ObsBatch<T> next_obs;
  std::vector<int> actions;
  nn::Vector<T> rewards;
  nn::Vector<T> dones;  // 1 where the episode ended at this transition

  int size() const { return static_cast<int>(actions.size()); }
};

template <typename T>
TransitionBatch<T> make_transition_batch(const std::vector<Transition>& transitions);

template <typename T>
std::string describe_batch(const TransitionBatch<T>& batch);

template <typename T>
int greedy_action(const nn::NetworkSpec& spec, const nn::NetworkParams<T>& params,
                  const std::string& head, const Observation& obs);

}  // namespace amrl
