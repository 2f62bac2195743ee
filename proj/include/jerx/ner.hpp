#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "jerx/tensor.hpp"

namespace jerx {

// Token classifier over the BIOES label set. The default depth of one makes
// it a single linear map d -> |labels|.
template <typename T>
struct NerHeadParams {
  Ffnn<T> ffnn;

  NerHeadParams() = default;
  NerHeadParams(Eigen::Index input_dim, Eigen::Index num_labels, std::size_t depth = 1)
      : ffnn(input_dim, input_dim, num_labels, depth, /*activate_last_layer=*/false) {}

  Eigen::Index num_labels() const { return ffnn.out_dim(); }

  template <typename F>
  void visit(F&& f) {
    for (std::size_t l = 0; l < ffnn.layers.size(); ++l) {
      const std::string prefix = "ner.layer" + std::to_string(l);
      f((prefix + ".weight").c_str(), ffnn.layers[l].weight, true);
      f((prefix + ".bias").c_str(), ffnn.layers[l].bias, false);
    }
  }
};

template <typename T>
struct NerCache {
  typename Ffnn<T>::Cache ffnn;
  Matrix<T> mask;
};

// N x |labels| unnormalised scores, one row per token.
template <typename T>
Matrix<T> ner_forward(const Matrix<T>& encoded, const NerHeadParams<T>& params, NerCache<T>* cache = nullptr,
                      double dropout = 0.0, Rng* rng = nullptr) {
  require_dims(encoded.cols() == params.ffnn.in_dim(), "NER head expects width " + std::to_string(params.ffnn.in_dim()) +
                                                           ", encoder gives " + std::to_string(encoded.cols()));
  Matrix<T> scores = params.ffnn.forward(encoded, cache ? &cache->ffnn : nullptr);
  if (dropout > 0.0 && rng) {
    Matrix<T> mask = dropout_mask<T>(scores.rows(), scores.cols(), dropout, *rng);
    scores = scores.cwiseProduct(mask);
    if (cache) cache->mask = std::move(mask);
  } else if (cache) {
    cache->mask.resize(0, 0);
  }
  return scores;
}

template <typename T>
Matrix<T> ner_backward(const NerCache<T>& cache, const Matrix<T>& d_scores, const NerHeadParams<T>& params,
                       NerHeadParams<T>& grad) {
  const Matrix<T> d = cache.mask.size() != 0 ? Matrix<T>(d_scores.cwiseProduct(cache.mask)) : d_scores;
  return params.ffnn.backward(cache.ffnn, d, grad.ffnn);
}

// Summed token cross-entropy.
template <typename T>
T ner_loss(const Matrix<T>& scores, std::span<const std::size_t> gold, Matrix<T>* d_scores = nullptr) {
  return sum_cross_entropy(scores, gold, d_scores);
}

// Per-token argmax with no sequence constraint; ties go to the lowest index.
template <typename T>
std::vector<std::size_t> predict_tags(const Matrix<T>& scores) {
  std::vector<std::size_t> ids(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) ids[static_cast<std::size_t>(r)] = argmax<T>(scores.row(r));
  return ids;
}

}  // namespace jerx
