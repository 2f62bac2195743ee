#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jerx/error.hpp"
#include "jerx/rng.hpp"

namespace jerx {

// Row-per-token matrices throughout: an N x d matrix holds one d-vector per token.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

inline void require_dims(bool cond, const std::string& what) { require(cond, ErrorKind::kDimensionMismatch, what); }

// Glorot-uniform initialisation.
template <typename T>
void init_glorot(Matrix<T>& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<T>(rng.uniform(-limit, limit));
}

template <typename T>
void init_uniform(Matrix<T>& m, Rng& rng, double limit) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<T>(rng.uniform(-limit, limit));
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

// Exact (erf-based) GELU.
template <typename T>
T gelu(T x) {
  return static_cast<T>(0.5) * x * (static_cast<T>(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = static_cast<T>(0.5) * (static_cast<T>(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(static_cast<T>(-0.5) * x * x) * static_cast<T>(0.5) * std::numbers::inv_sqrtpi_v<T> *
                std::numbers::sqrt2_v<T>;
  return cdf + x * pdf;
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

// Inverted dropout mask: entries are 0 or 1/(1-rate). An empty mask means
// dropout is off.
template <typename T>
Matrix<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix<T> mask(rows, cols);
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = rng.bernoulli(rate) ? T(0) : keep;
  return mask;
}

// ---------------------------------------------------------------------------
// Feed-forward networks
// ---------------------------------------------------------------------------

template <typename T>
struct Dense {
  Matrix<T> weight;  // out x in
  Matrix<T> bias;    // out x 1

  Dense() = default;
  Dense(Eigen::Index in, Eigen::Index out) : weight(Matrix<T>::Zero(out, in)), bias(Matrix<T>::Zero(out, 1)) {}

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }

  Matrix<T> forward(const Matrix<T>& x) const {
    require_dims(x.cols() == in_dim(), "dense layer expects width " + std::to_string(in_dim()) + ", got " +
                                           std::to_string(x.cols()));
    Matrix<T> y = x * weight.transpose();
    y.rowwise() += bias.col(0).transpose();
    return y;
  }
};

// Stack of dense layers with GELU between layers; `activate_last` also
// applies GELU to the final layer's output.
template <typename T>
struct Ffnn {
  std::vector<Dense<T>> layers;
  bool activate_last = true;

  Ffnn() = default;
  Ffnn(Eigen::Index in, Eigen::Index hidden, Eigen::Index out, std::size_t depth, bool activate_last_layer)
      : activate_last(activate_last_layer) {
    require(depth >= 1, ErrorKind::kInvalidArgument, "FFNN needs at least one layer");
    for (std::size_t l = 0; l < depth; ++l) {
      const Eigen::Index layer_in = l == 0 ? in : hidden;
      const Eigen::Index layer_out = l + 1 == depth ? out : hidden;
      layers.emplace_back(layer_in, layer_out);
    }
  }

  Eigen::Index in_dim() const { return layers.front().in_dim(); }
  Eigen::Index out_dim() const { return layers.back().out_dim(); }

  bool activated(std::size_t layer) const { return layer + 1 < layers.size() || activate_last; }

  void init(Rng& rng) {
    for (auto& layer : layers) {
      init_glorot(layer.weight, rng);
      layer.bias.setZero();
    }
  }

  struct Cache {
    std::vector<Matrix<T>> inputs;  // input to each layer
    std::vector<Matrix<T>> pre;     // pre-activation of each layer
  };

  Matrix<T> forward(const Matrix<T>& x, Cache* cache = nullptr) const {
    Matrix<T> h = x;
    if (cache) {
      cache->inputs.clear();
      cache->pre.clear();
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Matrix<T> z = layers[l].forward(h);
      if (cache) {
        cache->inputs.push_back(std::move(h));
        cache->pre.push_back(z);
      }
      h = activated(l) ? Matrix<T>(z.unaryExpr([](T v) { return gelu(v); })) : std::move(z);
    }
    return h;
  }

  // Accumulates parameter gradients into `grad` and returns d(loss)/d(input).
  Matrix<T> backward(const Cache& cache, const Matrix<T>& d_out, Ffnn& grad) const {
    Matrix<T> d = d_out;
    for (std::size_t l = layers.size(); l-- > 0;) {
      if (activated(l)) d = d.cwiseProduct(cache.pre[l].unaryExpr([](T v) { return gelu_grad(v); }));
      grad.layers[l].weight.noalias() += d.transpose() * cache.inputs[l];
      grad.layers[l].bias.col(0) += d.colwise().sum().transpose();
      d = d * layers[l].weight;
    }
    return d;
  }

  Ffnn zeros_like() const {
    Ffnn out = *this;
    for (auto& layer : out.layers) {
      layer.weight.setZero();
      layer.bias.setZero();
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Softmax cross-entropy
// ---------------------------------------------------------------------------

template <typename T>
Vector<T> log_softmax(const Eigen::Ref<const Vector<T>>& scores) {
  const T max = scores.maxCoeff();
  const T log_sum = std::log((scores.array() - max).exp().sum()) + max;
  return (scores.array() - log_sum).matrix();
}

// Sum over rows of -log softmax(row)[gold]. When `d_scores` is given it
// receives softmax(row) - one_hot(gold) per row.
template <typename T>
T sum_cross_entropy(const Matrix<T>& scores, std::span<const std::size_t> gold, Matrix<T>* d_scores = nullptr) {
  require_dims(static_cast<std::size_t>(scores.rows()) == gold.size(),
               "score rows (" + std::to_string(scores.rows()) + ") != gold labels (" + std::to_string(gold.size()) + ")");
  if (d_scores) d_scores->resize(scores.rows(), scores.cols());
  T loss = 0;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const std::size_t g = gold[static_cast<std::size_t>(r)];
    if (g >= static_cast<std::size_t>(scores.cols())) {
      fail(ErrorKind::kLabelOutOfRange, "gold label " + std::to_string(g) + " with " + std::to_string(scores.cols()) + " classes");
    }
    const Vector<T> lsm = log_softmax<T>(scores.row(r).transpose());
    loss -= lsm(static_cast<Eigen::Index>(g));
    if (d_scores) {
      d_scores->row(r) = lsm.array().exp().matrix().transpose();
      (*d_scores)(r, static_cast<Eigen::Index>(g)) -= T(1);
    }
  }
  return loss;
}

// Lowest index wins ties.
template <typename T>
std::size_t argmax(const Eigen::Ref<const RowVector<T>>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < row.size(); ++c)
    if (row(c) > row(best)) best = c;
  return static_cast<std::size_t>(best);
}

}  // namespace jerx
