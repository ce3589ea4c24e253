#include "amrl/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace amrl::nn {

template <typename T>
AdamState<T> make_adam_state(const NetworkParams<T>& params) {
  return {zeros_like(params), zeros_like(params), 0};
}

template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m,
                 std::span<T> v, long step, double lr, const AdamConfig& config) {
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  const double step_size = lr / c1;
  const double root_c2 = std::sqrt(c2);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double mi = b1 * m[i] + (1.0 - b1) * g;
    const double vi = b2 * v[i] + (1.0 - b2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    param[i] = static_cast<T>(param[i] - step_size * mi / (std::sqrt(vi) / root_c2 + config.epsilon));
  }
}

template <typename T>
void adam_step(NetworkParams<T>& params, const Gradients<T>& grads,
               AdamState<T>& state, double lr, const AdamConfig& config) {
  auto p = tensors(params);
  auto g = tensors(grads);
  auto m = tensors(state.m);
  auto v = tensors(state.v);
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient structure mismatch");
  }
  ++state.step;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].size != g[i].size || p[i].size != m[i].size) {
      throw std::invalid_argument("adam_step: shape mismatch at " + p[i].name);
    }
    adam_update<T>({p[i].data, p[i].size}, {g[i].data, g[i].size}, {m[i].data, m[i].size},
                   {v[i].data, v[i].size}, state.step, lr, config);
  }
}

void ScalarAdam::apply(double& param, double grad, double lr, const AdamConfig& config) {
  ++step;
  adam_update<double>({&param, 1}, {&grad, 1}, {&m, 1}, {&v, 1}, step, lr, config);
}

template <typename T>
double global_norm(std::span<const Gradients<T>* const> grads) {
  double sum = 0.0;
  for (const auto* g : grads) {
    for (const auto& t : tensors(*g)) {
      for (std::size_t i = 0; i < t.size; ++i) {
        const double x = t.data[i];
        sum += x * x;
      }
    }
  }
  return std::sqrt(sum);
}

template <typename T>
double global_norm(const Gradients<T>& grads) {
  const Gradients<T>* one[] = {&grads};
  return global_norm<T>(std::span<const Gradients<T>* const>(one));
}

template <typename T>
void scale(Gradients<T>& grads, double factor) {
  for (auto& t : tensors(grads)) {
    for (std::size_t i = 0; i < t.size; ++i) t.data[i] = static_cast<T>(t.data[i] * factor);
  }
}

template <typename T>
void add_to(Gradients<T>& acc, const Gradients<T>& g) {
  auto a = tensors(acc);
  auto b = tensors(g);
  if (a.size() != b.size()) throw std::invalid_argument("add_to: structure mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size != b[i].size) throw std::invalid_argument("add_to: shape mismatch at " + a[i].name);
    for (std::size_t j = 0; j < a[i].size; ++j) a[i].data[j] += b[i].data[j];
  }
}

template <typename T>
double clip_global_norm(std::span<Gradients<T>* const> grads, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_global_norm: max_norm must be > 0");
  std::vector<const Gradients<T>*> view(grads.begin(), grads.end());
  const auto norm_of = [&] { return global_norm<T>(std::span<const Gradients<T>* const>(view)); };
  const double norm = norm_of();
  if (!(norm > max_norm)) return norm;
  double factor = max_norm / norm;
  for (auto* g : grads) scale(*g, factor);
  // Rounding in T can leave the scaled norm a few ulps above the bound.
  for (double after = norm_of(); after > max_norm; after = norm_of()) {
    factor = max_norm / after * (1.0 - 4.0 * std::numeric_limits<T>::epsilon());
    for (auto* g : grads) scale(*g, factor);
  }
  return norm;
}

template <typename T>
double clip_global_norm(Gradients<T>& grads, double max_norm) {
  Gradients<T>* one[] = {&grads};
  return clip_global_norm<T>(std::span<Gradients<T>* const>(one), max_norm);
}

template <typename T>
void polyak_update(NetworkParams<T>& target, const NetworkParams<T>& online, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("polyak_update: tau must be in (0, 1]");
  if (!same_shape(target, online)) throw std::invalid_argument("polyak_update: shape mismatch");
  if (tau == 1.0) {
    target = online;
    return;
  }
  auto t = tensors(target);
  auto o = tensors(online);
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = 0; j < t[i].size; ++j) {
      t[i].data[j] = static_cast<T>(tau * o[i].data[j] + (1.0 - tau) * t[i].data[j]);
    }
  }
}

#define AMRL_INSTANTIATE(T)                                                                  \
  template AdamState<T> make_adam_state(const NetworkParams<T>&);                            \
  template void adam_update<T>(std::span<T>, std::span<const T>, std::span<T>, std::span<T>, \
                               long, double, const AdamConfig&);                             \
  template void adam_step(NetworkParams<T>&, const Gradients<T>&, AdamState<T>&, double,     \
                          const AdamConfig&);                                                \
  template double global_norm(const Gradients<T>&);                                          \
  template double global_norm<T>(std::span<const Gradients<T>* const>);                      \
  template double clip_global_norm(Gradients<T>&, double);                                   \
  template double clip_global_norm<T>(std::span<Gradients<T>* const>, double);               \
  template void polyak_update(NetworkParams<T>&, const NetworkParams<T>&, double);           \
  template void scale(Gradients<T>&, double);                                                \
  template void add_to(Gradients<T>&, const Gradients<T>&);

AMRL_INSTANTIATE(float)
AMRL_INSTANTIATE(double)
#undef AMRL_INSTANTIATE

}  // namespace amrl::nn
