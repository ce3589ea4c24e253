#pragma once

#include <Eigen/Dense>

#include <map>
#include <span>
#include <string>
#include <vector>

#include "amrl/grid_env.hpp"
#include "amrl/rng.hpp"

namespace amrl::nn {

// Activations are column-major with one column per sample (or per sample
// pixel for conv layers). Parameters are row-major so that their raw storage
// matches the checkpoint layout.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using MatrixR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct ConvSpec {
  int filters = 16;
  int kernel = 3;
  int stride = 1;
  int padding = 1;
};

struct HeadSpec {
  std::string name;
  int outputs = kNumActions;
};

struct PlaneShape {
  int channels = 0;
  int height = 0;
  int width = 0;
  int size() const { return channels * height * width; }
};

// image -> conv/ReLU stack -> flatten ++ history -> per head: dense/ReLU/dense.
struct NetworkSpec {
  int in_channels = 1;
  int height = 32;
  int width = 32;
  int history_dim = kHistoryDim;
  std::vector<ConvSpec> convs;
  int hidden = 128;
  std::vector<HeadSpec> heads;

  std::vector<PlaneShape> conv_shapes() const;  // output shape of each conv
  int feature_dim() const;
  const HeadSpec& head(const std::string& name) const;
  void validate() const;
};

// 16x3x3/2, 32x3x3/2, 32x3x3/1, zero padding 1, hidden width 128.
NetworkSpec default_network_spec(int in_channels, int height, int width,
                                 std::vector<HeadSpec> heads);

template <typename T>
struct ConvLayer {
  int in_channels = 0;
  int kernel = 3;
  int stride = 1;
  int padding = 1;
  // filters x (kernel * kernel * in_channels); column = (ky * k + kx) * C + c.
  MatrixR<T> kernels;
  Vector<T> biases;
};

template <typename T>
struct DenseLayer {
  MatrixR<T> weights;  // outputs x inputs
  Vector<T> biases;
};

template <typename T>
struct NetworkParams {
  std::vector<ConvLayer<T>> trunk;
  std::map<std::string, std::vector<DenseLayer<T>>> heads;
};

template <typename T>
using Gradients = NetworkParams<T>;

// Flat view of one parameter tensor; shape is the logical row-major shape.
template <typename T>
struct TensorRef {
  std::string name;
  std::vector<int> shape;
  T* data = nullptr;
  std::size_t size = 0;
};

// Fixed enumeration order: trunk layers, then heads by name.
template <typename T>
std::vector<TensorRef<T>> tensors(NetworkParams<T>& params);
template <typename T>
std::vector<TensorRef<const T>> tensors(const NetworkParams<T>& params);

template <typename T>
std::size_t parameter_count(const NetworkParams<T>& params);

// He-uniform for ReLU layers, uniform(+-1e-3) for head outputs, zero biases.
template <typename T>
NetworkParams<T> init_params(const NetworkSpec& spec, Rng& rng);

template <typename T>
NetworkParams<T> zeros_like(const NetworkParams<T>& params);

template <typename To, typename From>
NetworkParams<To> cast_params(const NetworkParams<From>& params);

template <typename T>
bool same_shape(const NetworkParams<T>& a, const NetworkParams<T>& b);

template <typename T>
bool all_finite(const NetworkParams<T>& params);

template <typename T>
struct ObsBatch {
  int size = 0;
  PlaneShape shape;
  Matrix<T> images;   // channels x (size * height * width)
  Matrix<T> history;  // history_dim x size
};

template <typename T>
ObsBatch<T> make_batch(std::span<const Observation* const> observations);
template <typename T>
ObsBatch<T> make_batch(std::span<const Observation> observations);

template <typename T>
struct ForwardResult {
  int batch = 0;
  std::map<std::string, Matrix<T>> outputs;  // outputs x batch

  // Backward caches.
  Matrix<T> input;
  std::vector<Matrix<T>> columns;
  std::vector<Matrix<T>> activations;
  Matrix<T> features;
  std::map<std::string, Matrix<T>> hidden;

  const Matrix<T>& output(const std::string& head) const;
};

// heads empty = every head in the spec.
template <typename T>
ForwardResult<T> forward(const NetworkSpec& spec, const NetworkParams<T>& params,
                         const ObsBatch<T>& batch,
                         const std::vector<std::string>& heads = {});

// Exact gradient of a scalar loss given dLoss/dOutput for the heads that
// contributed to it. Heads missing from output_grads get zero gradients.
template <typename T>
Gradients<T> backward(const NetworkSpec& spec, const NetworkParams<T>& params,
                      const ForwardResult<T>& cache,
                      const std::map<std::string, Matrix<T>>& output_grads);

}  // namespace amrl::nn
