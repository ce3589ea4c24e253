#pragma once

#include <span>

#include "amrl/network.hpp"

namespace amrl::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  NetworkParams<T> m;
  NetworkParams<T> v;
  long step = 0;
};

template <typename T>
AdamState<T> make_adam_state(const NetworkParams<T>& params);

// Bias-corrected Adam update on one flat tensor; step is the 1-based count.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m,
                 std::span<T> v, long step, double lr, const AdamConfig& config = {});

template <typename T>
void adam_step(NetworkParams<T>& params, const Gradients<T>& grads,
               AdamState<T>& state, double lr, const AdamConfig& config = {});

// Adam for a single scalar parameter (SAC temperature).
struct ScalarAdam {
  double m = 0.0;
  double v = 0.0;
  long step = 0;
  void apply(double& param, double grad, double lr, const AdamConfig& config = {});
};

template <typename T>
double global_norm(const Gradients<T>& grads);

// Joint L2 norm over several gradient sets.
template <typename T>
double global_norm(std::span<const Gradients<T>* const> grads);

// Scales grads so their joint L2 norm is at most max_norm. Returns the norm
// before clipping.
template <typename T>
double clip_global_norm(Gradients<T>& grads, double max_norm);
template <typename T>
double clip_global_norm(std::span<Gradients<T>* const> grads, double max_norm);

// target <- tau * online + (1 - tau) * target
template <typename T>
void polyak_update(NetworkParams<T>& target, const NetworkParams<T>& online, double tau);

template <typename T>
void scale(Gradients<T>& grads, double factor);

template <typename T>
void add_to(Gradients<T>& acc, const Gradients<T>& g);

}  // namespace amrl::nn
