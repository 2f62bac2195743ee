#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "jerx/corpus.hpp"
#include "jerx/jerxemb.hpp"
#include "jerx/tensor.hpp"

namespace jerx {

enum class EncoderKind { kFileBacked, kToy };

struct EncoderSpec {
  EncoderKind kind = EncoderKind::kToy;
  std::size_t hidden_size = 32;
  // toy encoder only
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 32;
  std::size_t window = 2;  // context radius: tokens i-window .. i+window

  void validate() const {
    require(hidden_size > 0, ErrorKind::kInvalidArgument, "encoder hidden size must be positive");
    if (kind == EncoderKind::kToy) {
      require(vocab_size > 0 && embedding_dim > 0, ErrorKind::kInvalidArgument, "toy encoder needs vocab and embedding dims");
    }
  }
};

// Word vocabulary of the toy encoder; index 0 is the out-of-vocabulary bucket.
class TokenVocab {
 public:
  static constexpr std::string_view kUnknown = "<unk>";

  TokenVocab() : words_{std::string(kUnknown)} {}

  explicit TokenVocab(std::vector<std::string> words) : words_{std::string(kUnknown)} {
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    for (auto& w : words) {
      if (w == kUnknown) continue;
      index_.emplace(w, words_.size());
      words_.push_back(std::move(w));
    }
  }

  static TokenVocab from_corpus(std::span<const AnnotatedSentence> corpus) {
    std::vector<std::string> words;
    for (const auto& s : corpus)
      for (const auto& t : s.tokens) words.push_back(t.text);
    return TokenVocab(std::move(words));
  }

  std::size_t size() const { return words_.size(); }
  std::size_t lookup(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? 0 : it->second;
  }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<std::size_t> lookup(const AnnotatedSentence& s) const {
    std::vector<std::size_t> ids;
    ids.reserve(s.size());
    for (const auto& t : s.tokens) ids.push_back(lookup(t.text));
    return ids;
  }

  bool operator==(const TokenVocab& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, std::size_t> index_;
};

// L x H x N x N attention weights carried alongside file-backed vectors.
struct AttentionTensor {
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t tokens = 0;
  std::vector<float> weights;

  float at(std::size_t layer, std::size_t head, std::size_t row, std::size_t col) const {
    return weights[((layer * heads + head) * tokens + row) * tokens + col];
  }
};

template <typename T>
struct EncodedSentence {
  Matrix<T> vectors;  // N x d
  std::optional<AttentionTensor> attention;
};

// ---------------------------------------------------------------------------
// Toy encoder: x_i = tanh(A [E(t_i) ; mean_{|j-i|<=w} E(t_j)] + a)
// ---------------------------------------------------------------------------

template <typename T>
struct ToyEncoderParams {
  Matrix<T> embedding;  // V x e
  Matrix<T> weight;     // d x 2e
  Matrix<T> bias;       // d x 1

  ToyEncoderParams() = default;
  explicit ToyEncoderParams(const EncoderSpec& spec)
      : embedding(Matrix<T>::Zero(static_cast<Eigen::Index>(spec.vocab_size), static_cast<Eigen::Index>(spec.embedding_dim))),
        weight(Matrix<T>::Zero(static_cast<Eigen::Index>(spec.hidden_size), 2 * static_cast<Eigen::Index>(spec.embedding_dim))),
        bias(Matrix<T>::Zero(static_cast<Eigen::Index>(spec.hidden_size), 1)) {}

  void init(Rng& rng) {
    init_uniform(embedding, rng, 0.1);
    init_glorot(weight, rng);
    bias.setZero();
  }

  template <typename F>
  void visit(F&& f) {
    f("encoder.embedding", embedding, true);
    f("encoder.weight", weight, true);
    f("encoder.bias", bias, false);
  }
};

template <typename T>
struct ToyEncoderCache {
  std::vector<std::size_t> ids;
  Matrix<T> input;   // N x 2e: [own embedding ; window mean]
  Matrix<T> output;  // N x d, tanh output before dropout
  Matrix<T> mask;    // empty when dropout is off
};

namespace detail {

inline std::pair<std::size_t, std::size_t> window_bounds(std::size_t i, std::size_t n, std::size_t radius) {
  const std::size_t lo = i >= radius ? i - radius : 0;
  const std::size_t hi = std::min(n - 1, i + radius);
  return {lo, hi};
}

}  // namespace detail

template <typename T>
Matrix<T> toy_encode(std::span<const std::size_t> ids, const ToyEncoderParams<T>& params, const EncoderSpec& spec,
                     ToyEncoderCache<T>* cache = nullptr, double dropout = 0.0, Rng* rng = nullptr) {
  const auto n = ids.size();
  const auto e = params.embedding.cols();
  const auto vocab = static_cast<std::size_t>(params.embedding.rows());
  require_dims(params.weight.cols() == 2 * e, "toy encoder weight width");
  Matrix<T> input(static_cast<Eigen::Index>(n), 2 * e);
  for (std::size_t i = 0; i < n; ++i) {
    require(ids[i] < vocab, ErrorKind::kInvalidArgument, "token id outside toy vocabulary");
    const auto r = static_cast<Eigen::Index>(i);
    input.row(r).head(e) = params.embedding.row(static_cast<Eigen::Index>(ids[i]));
    const auto [lo, hi] = detail::window_bounds(i, n, spec.window);
    RowVector<T> mean = RowVector<T>::Zero(e);
    for (std::size_t j = lo; j <= hi; ++j) mean += params.embedding.row(static_cast<Eigen::Index>(ids[j]));
    input.row(r).tail(e) = mean / static_cast<T>(hi - lo + 1);
  }
  Matrix<T> pre = input * params.weight.transpose();
  pre.rowwise() += params.bias.col(0).transpose();
  Matrix<T> out = pre.array().tanh().matrix();
  Matrix<T> mask;
  if (dropout > 0.0 && rng) mask = dropout_mask<T>(out.rows(), out.cols(), dropout, *rng);
  if (cache) {
    cache->ids.assign(ids.begin(), ids.end());
    cache->input = std::move(input);
    cache->output = out;
    cache->mask = mask;
  }
  if (mask.size() != 0) out = out.cwiseProduct(mask);
  return out;
}

// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(encoder output).
template <typename T>
void toy_backward(const ToyEncoderCache<T>& cache, const Matrix<T>& upstream, const ToyEncoderParams<T>& params,
                  const EncoderSpec& spec, ToyEncoderParams<T>& grad) {
  require_dims(upstream.rows() == cache.output.rows() && upstream.cols() == cache.output.cols(),
               "upstream gradient shape");
  const auto n = cache.ids.size();
  const auto e = params.embedding.cols();
  Matrix<T> d_out = cache.mask.size() != 0 ? Matrix<T>(upstream.cwiseProduct(cache.mask)) : upstream;
  const Matrix<T> d_pre = d_out.cwiseProduct((T(1) - cache.output.array().square()).matrix());
  grad.weight.noalias() += d_pre.transpose() * cache.input;
  grad.bias.col(0) += d_pre.colwise().sum().transpose();
  const Matrix<T> d_input = d_pre * params.weight;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    grad.embedding.row(static_cast<Eigen::Index>(cache.ids[i])) += d_input.row(r).head(e);
    const auto [lo, hi] = detail::window_bounds(i, n, spec.window);
    const RowVector<T> share = d_input.row(r).tail(e) / static_cast<T>(hi - lo + 1);
    for (std::size_t j = lo; j <= hi; ++j) grad.embedding.row(static_cast<Eigen::Index>(cache.ids[j])) += share;
  }
}

// Gradients of all toy-encoder parameters for one sentence (dropout off).
template <typename T>
ToyEncoderParams<T> toy_forward_backward(std::span<const std::size_t> ids, const ToyEncoderParams<T>& params,
                                         const EncoderSpec& spec, const Matrix<T>& upstream) {
  ToyEncoderCache<T> cache;
  toy_encode(ids, params, spec, &cache);
  ToyEncoderParams<T> grad = params;
  grad.visit([](const char*, Matrix<T>& m, bool) { m.setZero(); });
  toy_backward(cache, upstream, params, spec, grad);
  return grad;
}

// ---------------------------------------------------------------------------
// File-backed encoder (frozen)
// ---------------------------------------------------------------------------

class FileBackedEncoder {
 public:
  explicit FileBackedEncoder(emb::File file) : file_(std::move(file)) {}
  static FileBackedEncoder open(const std::string& path) { return FileBackedEncoder(emb::read(path)); }

  std::size_t hidden_size() const { return file_.header.hidden_size; }
  const emb::File& file() const { return file_; }

  template <typename T>
  EncodedSentence<T> encode(const AnnotatedSentence& sentence) const {
    const emb::Record* rec = file_.find(sentence.key);
    if (!rec) fail(ErrorKind::kMissingEmbeddingRecord, "no embedding record for sentence '" + sentence.key + "'");
    if (rec->token_count != sentence.size()) {
      fail(ErrorKind::kDimensionMismatch, "record '" + sentence.key + "' has " + std::to_string(rec->token_count) +
                                              " vectors for " + std::to_string(sentence.size()) + " tokens");
    }
    const std::size_t n = rec->token_count;
    const std::size_t d = hidden_size();
    EncodedSentence<T> out;
    out.vectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k)
        out.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = static_cast<T>(rec->embedding(i, k, d));
    if (rec->attention) {
      out.attention = AttentionTensor{file_.header.layer_count, file_.header.head_count, n, *rec->attention};
    }
    return out;
  }

 private:
  emb::File file_;
};

}  // namespace jerx
