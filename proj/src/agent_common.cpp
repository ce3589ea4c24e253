#include "amrl/agent_common.hpp"

#include <cmath>
#include <sstream>

#include "amrl/distributions.hpp"

namespace amrl {

template <typename T>
TransitionBatch<T> make_transition_batch(const std::vector<Transition>& transitions) {
  if (transitions.empty()) throw std::invalid_argument("empty transition batch");
  std::vector<const Observation*> obs;
  std::vector<const Observation*> next;
  TransitionBatch<T> b;
  const auto n = static_cast<Eigen::Index>(transitions.size());
  b.rewards.resize(n);
  b.dones.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = transitions[i];
    obs.push_back(&t.obs);
    next.push_back(&t.next_obs);
    b.actions.push_back(t.action);
    b.rewards(i) = static_cast<T>(t.reward);
    b.dones(i) = t.done ? T(1) : T(0);
  }
  b.obs = nn::make_batch<T>(std::span<const Observation* const>(obs));
  b.next_obs = nn::make_batch<T>(std::span<const Observation* const>(next));
  return b;
}

template <typename T>
std::string describe_batch(const TransitionBatch<T>& batch) {
  std::ostringstream out;
  out << "batch size " << batch.size() << ", reward mean " << batch.rewards.mean()
      << " min " << batch.rewards.minCoeff() << " max " << batch.rewards.maxCoeff()
      << ", done fraction " << batch.dones.mean() << ", image mean " << batch.obs.images.mean();
  return out.str();
}

template <typename T>
int greedy_action(const nn::NetworkSpec& spec, const nn::NetworkParams<T>& params,
                  const std::string& head, const Observation& obs) {
  const Observation* one[] = {&obs};
  const auto batch = nn::make_batch<T>(std::span<const Observation* const>(one));
  const auto fwd = nn::forward(spec, params, batch, {head});
  return nn::argmax(fwd.output(head).col(0));
}

template TransitionBatch<float> make_transition_batch<float>(const std::vector<Transition>&);
template TransitionBatch<double> make_transition_batch<double>(const std::vector<Transition>&);
template std::string describe_batch(const TransitionBatch<float>&);
template std::string describe_batch(const TransitionBatch<double>&);
template int greedy_action(const nn::NetworkSpec&, const nn::NetworkParams<float>&,
                           const std::string&, const Observation&);
template int greedy_action(const nn::NetworkSpec&, const nn::NetworkParams<double>&,
                           const std::string&, const Observation&);

}  // namespace amrl
