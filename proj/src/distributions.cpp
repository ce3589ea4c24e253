#include "amrl/distributions.hpp"

#include <cmath>
#include <stdexcept>

namespace amrl::nn {

template <typename T>
Matrix<T> log_softmax(const Matrix<T>& logits) {
  Matrix<T> out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const T mx = logits.col(c).maxCoeff();
    const T lse = mx + std::log((logits.col(c).array() - mx).exp().sum());
    out.col(c) = logits.col(c).array() - lse;
  }
  return out;
}

template <typename T>
Matrix<T> softmax(const Matrix<T>& logits) {
  return log_softmax(logits).array().exp().matrix();
}

template <typename T>
Matrix<T> entropy(const Matrix<T>& logits) {
  const Matrix<T> lp = log_softmax(logits);
  const Matrix<T> p = lp.array().exp().matrix();
  return -(p.array() * lp.array()).colwise().sum().matrix();
}

template <typename T>
Matrix<T> gumbel_noise(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix<T> g(rows, cols);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    g.data()[i] = static_cast<T>(-std::log(-std::log(uniform_open01(rng))));
  }
  return g;
}

template <typename T>
GumbelSample<T> gumbel_softmax_with_noise(const Matrix<T>& logits, Matrix<T> noise,
                                          double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("gumbel temperature must be > 0");
  if (noise.rows() != logits.rows() || noise.cols() != logits.cols()) {
    throw std::invalid_argument("gumbel noise shape mismatch");
  }
  GumbelSample<T> s;
  const Matrix<T> perturbed = ((logits + noise).array() / static_cast<T>(temperature)).matrix();
  s.soft = softmax(perturbed);
  s.log_prob = log_softmax(logits);
  s.noise = std::move(noise);
  return s;
}

template <typename T>
GumbelSample<T> gumbel_softmax_sample(const Matrix<T>& logits, double temperature, Rng& rng) {
  return gumbel_softmax_with_noise(logits, gumbel_noise<T>(logits.rows(), logits.cols(), rng),
                                   temperature);
}

#define AMRL_INSTANTIATE(T)                                                              \
  template Matrix<T> log_softmax(const Matrix<T>&);                                      \
  template Matrix<T> softmax(const Matrix<T>&);                                          \
  template Matrix<T> entropy(const Matrix<T>&);                                          \
  template Matrix<T> gumbel_noise<T>(Eigen::Index, Eigen::Index, Rng&);                  \
  template GumbelSample<T> gumbel_softmax_with_noise(const Matrix<T>&, Matrix<T>, double); \
  template GumbelSample<T> gumbel_softmax_sample(const Matrix<T>&, double, Rng&);

AMRL_INSTANTIATE(float)
AMRL_INSTANTIATE(double)
#undef AMRL_INSTANTIATE

}  // namespace amrl::nn
