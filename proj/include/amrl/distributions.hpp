#pragma once

#include "amrl/network.hpp"
#include "amrl/rng.hpp"

namespace amrl::nn {

// Column-wise operations: each column holds the logits of one state.
template <typename T>
Matrix<T> log_softmax(const Matrix<T>& logits);
template <typename T>
Matrix<T> softmax(const Matrix<T>& logits);

// Entropy of each column's softmax distribution (1 x batch).
template <typename T>
Matrix<T> entropy(const Matrix<T>& logits);

// Lowest index among maxima.
template <typename Derived>
int argmax(const Eigen::MatrixBase<Derived>& column) {
  int best = 0;
  for (int i = 1; i < column.size(); ++i) {
    if (column(i) > column(best)) best = i;
  }
  return best;
}

template <typename Derived>
int sample_categorical(const Eigen::MatrixBase<Derived>& probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    acc += static_cast<double>(probs(i));
    if (u < acc) return i;
  }
  return static_cast<int>(probs.size()) - 1;
}

template <typename T>
struct GumbelSample {
  Matrix<T> noise;     // standard Gumbel draws
  Matrix<T> soft;      // softmax((logits + noise) / temperature)
  Matrix<T> log_prob;  // log_softmax(logits)
};

template <typename T>
Matrix<T> gumbel_noise(Eigen::Index rows, Eigen::Index cols, Rng& rng);

template <typename T>
GumbelSample<T> gumbel_softmax_sample(const Matrix<T>& logits, double temperature, Rng& rng);

// Same relaxation with caller-supplied noise, for reproducible gradients.
template <typename T>
GumbelSample<T> gumbel_softmax_with_noise(const Matrix<T>& logits, Matrix<T> noise,
                                          double temperature);

}  // namespace amrl::nn
