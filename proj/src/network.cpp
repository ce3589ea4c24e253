#include "amrl/network.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace amrl::nn {

std::vector<PlaneShape> NetworkSpec::conv_shapes() const {
  std::vector<PlaneShape> shapes;
  PlaneShape cur{in_channels, height, width};
  for (const auto& c : convs) {
    cur.channels = c.filters;
    cur.height = (cur.height + 2 * c.padding - c.kernel) / c.stride + 1;
    cur.width = (cur.width + 2 * c.padding - c.kernel) / c.stride + 1;
    shapes.push_back(cur);
  }
  return shapes;
}

int NetworkSpec::feature_dim() const {
  const auto shapes = conv_shapes();
  const int image = shapes.empty() ? in_channels * height * width : shapes.back().size();
  return image + history_dim;
}

const HeadSpec& NetworkSpec::head(const std::string& name) const {
  for (const auto& h : heads) {
    if (h.name == name) return h;
  }
  throw std::invalid_argument("network has no head '" + name + "'");
}

void NetworkSpec::validate() const {
  if (in_channels < 1 || height < 1 || width < 1) {
    throw std::invalid_argument("network input shape must be positive");
  }
  if (history_dim < 0 || hidden < 1) {
    throw std::invalid_argument("invalid history or hidden width");
  }
  PlaneShape cur{in_channels, height, width};
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const auto& c = convs[i];
    const auto name = "conv" + std::to_string(i + 1);
    if (c.filters < 1 || c.kernel < 1 || c.stride < 1 || c.padding < 0) {
      throw std::invalid_argument(name + ": invalid hyperparameters");
    }
    if (cur.height + 2 * c.padding < c.kernel || cur.width + 2 * c.padding < c.kernel) {
      throw std::invalid_argument(name + ": kernel larger than padded input");
    }
    cur.height = (cur.height + 2 * c.padding - c.kernel) / c.stride + 1;
    cur.width = (cur.width + 2 * c.padding - c.kernel) / c.stride + 1;
  }
  if (heads.empty()) throw std::invalid_argument("network needs at least one head");
  for (const auto& h : heads) {
    if (h.outputs < 1) throw std::invalid_argument("head '" + h.name + "' has no outputs");
  }
}

NetworkSpec default_network_spec(int in_channels, int height, int width,
                                 std::vector<HeadSpec> heads) {
  NetworkSpec spec;
  spec.in_channels = in_channels;
  spec.height = height;
  spec.width = width;
  spec.convs = {{16, 3, 2, 1}, {32, 3, 2, 1}, {32, 3, 1, 1}};
  spec.hidden = 128;
  spec.heads = std::move(heads);
  return spec;
}

namespace {

template <typename P, typename T>
void collect(P& params, std::vector<TensorRef<T>>& out) {
  for (std::size_t i = 0; i < params.trunk.size(); ++i) {
    auto& c = params.trunk[i];
    const auto base = "conv" + std::to_string(i + 1);
    out.push_back({base + ".kernels",
                   {static_cast<int>(c.kernels.rows()), c.kernel, c.kernel, c.in_channels},
                   c.kernels.data(), static_cast<std::size_t>(c.kernels.size())});
    out.push_back({base + ".biases", {static_cast<int>(c.biases.size())},
                   c.biases.data(), static_cast<std::size_t>(c.biases.size())});
  }
  for (auto& [name, layers] : params.heads) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& d = layers[i];
      const auto base = name + ".fc" + std::to_string(i + 1);
      out.push_back({base + ".weights",
                     {static_cast<int>(d.weights.rows()), static_cast<int>(d.weights.cols())},
                     d.weights.data(), static_cast<std::size_t>(d.weights.size())});
      out.push_back({base + ".biases", {static_cast<int>(d.biases.size())},
                     d.biases.data(), static_cast<std::size_t>(d.biases.size())});
    }
  }
}

}  // namespace

template <typename T>
std::vector<TensorRef<T>> tensors(NetworkParams<T>& params) {
  std::vector<TensorRef<T>> out;
  collect(params, out);
  return out;
}

template <typename T>
std::vector<TensorRef<const T>> tensors(const NetworkParams<T>& params) {
  std::vector<TensorRef<const T>> out;
  collect(params, out);
  return out;
}

template <typename T>
std::size_t parameter_count(const NetworkParams<T>& params) {
  std::size_t n = 0;
  for (const auto& t : tensors(params)) n += t.size;
  return n;
}

template <typename T>
NetworkParams<T> init_params(const NetworkSpec& spec, Rng& rng) {
  spec.validate();
  const auto fill = [&rng](auto& m, double limit) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
  };
  NetworkParams<T> params;
  int channels = spec.in_channels;
  for (const auto& c : spec.convs) {
    ConvLayer<T> layer;
    layer.in_channels = channels;
    layer.kernel = c.kernel;
    layer.stride = c.stride;
    layer.padding = c.padding;
    const int fan_in = c.kernel * c.kernel * channels;
    layer.kernels.resize(c.filters, fan_in);
    fill(layer.kernels, std::sqrt(6.0 / fan_in));
    layer.biases = Vector<T>::Zero(c.filters);
    params.trunk.push_back(std::move(layer));
    channels = c.filters;
  }
  const int features = spec.feature_dim();
  for (const auto& h : spec.heads) {
    DenseLayer<T> hidden;
    hidden.weights.resize(spec.hidden, features);
    fill(hidden.weights, std::sqrt(6.0 / features));
    hidden.biases = Vector<T>::Zero(spec.hidden);
    DenseLayer<T> out;
    out.weights.resize(h.outputs, spec.hidden);
    fill(out.weights, 1e-3);
    out.biases = Vector<T>::Zero(h.outputs);
    params.heads[h.name] = {std::move(hidden), std::move(out)};
  }
  return params;
}

template <typename T>
NetworkParams<T> zeros_like(const NetworkParams<T>& params) {
  NetworkParams<T> z = params;
  for (auto& t : tensors(z)) std::fill(t.data, t.data + t.size, T(0));
  return z;
}

template <typename To, typename From>
NetworkParams<To> cast_params(const NetworkParams<From>& params) {
  NetworkParams<To> out;
  for (const auto& c : params.trunk) {
    ConvLayer<To> layer;
    layer.in_channels = c.in_channels;
    layer.kernel = c.kernel;
    layer.stride = c.stride;
    layer.padding = c.padding;
    layer.kernels = c.kernels.template cast<To>();
    layer.biases = c.biases.template cast<To>();
    out.trunk.push_back(std::move(layer));
  }
  for (const auto& [name, layers] : params.heads) {
    auto& dst = out.heads[name];
    for (const auto& d : layers) {
      dst.push_back({d.weights.template cast<To>(), d.biases.template cast<To>()});
    }
  }
  return out;
}

template <typename T>
bool same_shape(const NetworkParams<T>& a, const NetworkParams<T>& b) {
  const auto ta = tensors(a);
  const auto tb = tensors(b);
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].name != tb[i].name || ta[i].shape != tb[i].shape) return false;
  }
  return true;
}

template <typename T>
bool all_finite(const NetworkParams<T>& params) {
  for (const auto& t : tensors(params)) {
    for (std::size_t i = 0; i < t.size; ++i) {
      if (!std::isfinite(static_cast<double>(t.data[i]))) return false;
    }
  }
  return true;
}

template <typename T>
ObsBatch<T> make_batch(std::span<const Observation* const> observations) {
  if (observations.empty()) throw std::invalid_argument("empty observation batch");
  ObsBatch<T> batch;
  const Observation& first = *observations.front();
  batch.size = static_cast<int>(observations.size());
  batch.shape = {first.channels, first.height, first.width};
  const int plane = first.height * first.width;
  batch.images.resize(first.channels, static_cast<Eigen::Index>(batch.size) * plane);
  batch.history.resize(kHistoryDim, batch.size);
  for (int b = 0; b < batch.size; ++b) {
    const Observation& o = *observations[b];
    if (o.channels != first.channels || o.height != first.height || o.width != first.width) {
      throw std::invalid_argument("observation batch mixes shapes");
    }
    T* dst = batch.images.data() + static_cast<std::size_t>(b) * plane * o.channels;
    for (int p = 0; p < plane; ++p) {
      for (int c = 0; c < o.channels; ++c) {
        dst[p * o.channels + c] = static_cast<T>(o.image[static_cast<std::size_t>(c) * plane + p]);
      }
    }
    for (int i = 0; i < kHistoryDim; ++i) batch.history(i, b) = static_cast<T>(o.history[i]);
  }
  return batch;
}

template <typename T>
ObsBatch<T> make_batch(std::span<const Observation> observations) {
  std::vector<const Observation*> ptrs;
  ptrs.reserve(observations.size());
  for (const auto& o : observations) ptrs.push_back(&o);
  return make_batch<T>(std::span<const Observation* const>(ptrs));
}

template <typename T>
const Matrix<T>& ForwardResult<T>::output(const std::string& head) const {
  auto it = outputs.find(head);
  if (it == outputs.end()) throw std::invalid_argument("forward pass did not compute head '" + head + "'");
  return it->second;
}

namespace {

// Unfolds input (C x B*H*W) into columns (k*k*C x B*Ho*Wo).
template <typename T>
void im2col(const Matrix<T>& input, int batch, const PlaneShape& in,
            const ConvLayer<T>& layer, const PlaneShape& out, Matrix<T>& cols) {
  const int k = layer.kernel;
  const int C = in.channels;
  cols.resize(static_cast<Eigen::Index>(k) * k * C,
              static_cast<Eigen::Index>(batch) * out.height * out.width);
  const T* src = input.data();
  T* dst = cols.data();
  for (int b = 0; b < batch; ++b) {
    for (int oy = 0; oy < out.height; ++oy) {
      for (int ox = 0; ox < out.width; ++ox) {
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * layer.stride - layer.padding + ky;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * layer.stride - layer.padding + kx;
            if (iy < 0 || iy >= in.height || ix < 0 || ix >= in.width) {
              std::fill(dst, dst + C, T(0));
            } else {
              const T* s = src + ((static_cast<std::size_t>(b) * in.height + iy) * in.width + ix) * C;
              std::copy(s, s + C, dst);
            }
            dst += C;
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const Matrix<T>& cols, int batch, const PlaneShape& in,
            const ConvLayer<T>& layer, const PlaneShape& out, Matrix<T>& grad_input) {
  const int k = layer.kernel;
  const int C = in.channels;
  grad_input = Matrix<T>::Zero(C, static_cast<Eigen::Index>(batch) * in.height * in.width);
  T* dst = grad_input.data();
  const T* src = cols.data();
  for (int b = 0; b < batch; ++b) {
    for (int oy = 0; oy < out.height; ++oy) {
      for (int ox = 0; ox < out.width; ++ox) {
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * layer.stride - layer.padding + ky;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * layer.stride - layer.padding + kx;
            if (iy >= 0 && iy < in.height && ix >= 0 && ix < in.width) {
              T* d = dst + ((static_cast<std::size_t>(b) * in.height + iy) * in.width + ix) * C;
              for (int c = 0; c < C; ++c) d[c] += src[c];
            }
            src += C;
          }
        }
      }
    }
  }
}

template <typename T>
void check_params(const NetworkSpec& spec, const NetworkParams<T>& params,
                  const std::vector<std::string>& heads) {
  if (params.trunk.size() != spec.convs.size()) {
    throw std::invalid_argument("trunk has " + std::to_string(params.trunk.size()) +
                                " conv layers, spec expects " +
                                std::to_string(spec.convs.size()));
  }
  int channels = spec.in_channels;
  for (std::size_t i = 0; i < spec.convs.size(); ++i) {
    const auto& c = spec.convs[i];
    const auto& l = params.trunk[i];
    if (l.in_channels != channels || l.kernel != c.kernel || l.stride != c.stride ||
        l.padding != c.padding || l.kernels.rows() != c.filters ||
        l.kernels.cols() != c.kernel * c.kernel * channels || l.biases.size() != c.filters) {
      throw std::invalid_argument("conv" + std::to_string(i + 1) +
                                  ": parameter shape does not match the network spec");
    }
    channels = c.filters;
  }
  const int features = spec.feature_dim();
  for (const auto& name : heads) {
    const auto& h = spec.head(name);
    auto it = params.heads.find(name);
    if (it == params.heads.end() || it->second.size() != 2) {
      throw std::invalid_argument(name + ": head parameters missing");
    }
    const auto& fc1 = it->second[0];
    const auto& fc2 = it->second[1];
    if (fc1.weights.rows() != spec.hidden || fc1.weights.cols() != features ||
        fc1.biases.size() != spec.hidden) {
      throw std::invalid_argument(name + ".fc1: parameter shape does not match the network spec");
    }
    if (fc2.weights.rows() != h.outputs || fc2.weights.cols() != spec.hidden ||
        fc2.biases.size() != h.outputs) {
      throw std::invalid_argument(name + ".fc2: parameter shape does not match the network spec");
    }
  }
}

}  // namespace

template <typename T>
ForwardResult<T> forward(const NetworkSpec& spec, const NetworkParams<T>& params,
                         const ObsBatch<T>& batch, const std::vector<std::string>& heads) {
  std::vector<std::string> wanted = heads;
  if (wanted.empty()) {
    for (const auto& h : spec.heads) wanted.push_back(h.name);
  }
  check_params(spec, params, wanted);
  if (batch.shape.channels != spec.in_channels || batch.shape.height != spec.height ||
      batch.shape.width != spec.width) {
    throw std::invalid_argument("input: observation shape " +
                                std::to_string(batch.shape.channels) + "x" +
                                std::to_string(batch.shape.height) + "x" +
                                std::to_string(batch.shape.width) +
                                " does not match the network spec");
  }
  if (batch.history.rows() != spec.history_dim) {
    throw std::invalid_argument("input: history length does not match the network spec");
  }

  ForwardResult<T> r;
  r.batch = batch.size;
  r.input = batch.images;
  const auto shapes = spec.conv_shapes();
  PlaneShape in{spec.in_channels, spec.height, spec.width};
  const Matrix<T>* x = &r.input;
  r.columns.resize(params.trunk.size());
  r.activations.resize(params.trunk.size());
  for (std::size_t i = 0; i < params.trunk.size(); ++i) {
    const auto& layer = params.trunk[i];
    im2col(*x, batch.size, in, layer, shapes[i], r.columns[i]);
    Matrix<T>& a = r.activations[i];
    a.noalias() = layer.kernels * r.columns[i];
    a.colwise() += layer.biases;
    a = a.cwiseMax(T(0));
    x = &a;
    in = shapes[i];
  }

  const int image_dim = in.size();
  r.features.resize(image_dim + spec.history_dim, batch.size);
  r.features.topRows(image_dim) =
      Eigen::Map<const Matrix<T>>(x->data(), image_dim, batch.size);
  r.features.bottomRows(spec.history_dim) = batch.history;

  for (const auto& name : wanted) {
    const auto& layers = params.heads.at(name);
    Matrix<T> h;
    h.noalias() = layers[0].weights * r.features;
    h.colwise() += layers[0].biases;
    h = h.cwiseMax(T(0));
    Matrix<T> out;
    out.noalias() = layers[1].weights * h;
    out.colwise() += layers[1].biases;
    assert(out.allFinite());
    r.hidden[name] = std::move(h);
    r.outputs[name] = std::move(out);
  }
  return r;
}

template <typename T>
Gradients<T> backward(const NetworkSpec& spec, const NetworkParams<T>& params,
                      const ForwardResult<T>& cache,
                      const std::map<std::string, Matrix<T>>& output_grads) {
  Gradients<T> grads = zeros_like(params);
  Matrix<T> d_features = Matrix<T>::Zero(cache.features.rows(), cache.features.cols());
  bool any = false;
  for (const auto& [name, d_out] : output_grads) {
    auto hit = cache.hidden.find(name);
    if (hit == cache.hidden.end()) {
      throw std::invalid_argument("backward: head '" + name + "' was not in the forward pass");
    }
    const Matrix<T>& h = hit->second;
    const auto& layers = params.heads.at(name);
    auto& g = grads.heads.at(name);
    if (d_out.rows() != layers[1].weights.rows() || d_out.cols() != cache.batch) {
      throw std::invalid_argument("backward: gradient shape mismatch for head '" + name + "'");
    }
    g[1].weights.noalias() = d_out * h.transpose();
    g[1].biases = d_out.rowwise().sum();
    Matrix<T> d_h;
    d_h.noalias() = layers[1].weights.transpose() * d_out;
    d_h = d_h.cwiseProduct((h.array() > T(0)).template cast<T>().matrix());
    g[0].weights.noalias() = d_h * cache.features.transpose();
    g[0].biases = d_h.rowwise().sum();
    d_features.noalias() += layers[0].weights.transpose() * d_h;
    any = true;
  }
  if (!any || params.trunk.empty()) return grads;

  const auto shapes = spec.conv_shapes();
  const int image_dim = shapes.back().size();
  const int last = static_cast<int>(params.trunk.size()) - 1;
  Matrix<T> d_act(shapes.back().channels,
                  static_cast<Eigen::Index>(cache.batch) * shapes.back().height * shapes.back().width);
  for (int b = 0; b < cache.batch; ++b) {
    Eigen::Map<Vector<T>>(d_act.data() + static_cast<std::size_t>(b) * image_dim, image_dim) =
        d_features.col(b).head(image_dim);
  }
  for (int i = last; i >= 0; --i) {
    const auto& layer = params.trunk[i];
    const Matrix<T>& a = cache.activations[i];
    Matrix<T> d_z = d_act.cwiseProduct((a.array() > T(0)).template cast<T>().matrix());
    grads.trunk[i].kernels.noalias() = d_z * cache.columns[i].transpose();
    grads.trunk[i].biases = d_z.rowwise().sum();
    if (i == 0) break;
    Matrix<T> d_cols;
    d_cols.noalias() = layer.kernels.transpose() * d_z;
    col2im(d_cols, cache.batch, shapes[i - 1], layer, shapes[i], d_act);
  }
  return grads;
}

#define AMRL_INSTANTIATE(T)                                                          \
  template std::vector<TensorRef<T>> tensors(NetworkParams<T>&);                     \
  template std::vector<TensorRef<const T>> tensors(const NetworkParams<T>&);         \
  template std::size_t parameter_count(const NetworkParams<T>&);                     \
  template NetworkParams<T> init_params<T>(const NetworkSpec&, Rng&);                \
  template NetworkParams<T> zeros_like(const NetworkParams<T>&);                     \
  template bool same_shape(const NetworkParams<T>&, const NetworkParams<T>&);        \
  template bool all_finite(const NetworkParams<T>&);                                 \
  template ObsBatch<T> make_batch<T>(std::span<const Observation* const>);           \
  template ObsBatch<T> make_batch<T>(std::span<const Observation>);                  \
  template struct ForwardResult<T>;                                                  \
  template ForwardResult<T> forward(const NetworkSpec&, const NetworkParams<T>&,     \
                                    const ObsBatch<T>&, const std::vector<std::string>&); \
  template Gradients<T> backward(const NetworkSpec&, const NetworkParams<T>&,        \
                                 const ForwardResult<T>&,                            \
                                 const std::map<std::string, Matrix<T>>&);

AMRL_INSTANTIATE(float)
AMRL_INSTANTIATE(double)
#undef AMRL_INSTANTIATE

template NetworkParams<float> cast_params<float, double>(const NetworkParams<double>&);
template NetworkParams<double> cast_params<double, float>(const NetworkParams<float>&);
template NetworkParams<float> cast_params<float, float>(const NetworkParams<float>&);
template NetworkParams<double> cast_params<double, double>(const NetworkParams<double>&);

}  // namespace amrl::nn
