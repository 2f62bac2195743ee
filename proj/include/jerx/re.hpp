#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jerx/corpus.hpp"
#include "jerx/tensor.hpp"

namespace jerx {

// Component switches for ablation runs. All off is the full model.
struct Ablations {
  bool no_pretraining = false;        // lambda fixed at 1
  bool no_entity_embeddings = false;  // RE input is the encoder output alone
  bool single_ffnn = false;           // one FFNN shared by head and tail roles
  bool no_head_tail = false;          // head/tail projections are the identity
  bool no_bilinear = false;           // biaffine scorer without the U term

  bool any() const { return no_pretraining || no_entity_embeddings || single_ffnn || no_head_tail || no_bilinear; }
  bool operator==(const Ablations&) const = default;
};

// ---------------------------------------------------------------------------
// Entity-label embeddings and RE input
// ---------------------------------------------------------------------------

template <typename T>
struct EntityLabelEmbedding {
  Matrix<T> table;  // |NER labels| x k

  EntityLabelEmbedding() = default;
  EntityLabelEmbedding(Eigen::Index num_labels, Eigen::Index dim) : table(Matrix<T>::Zero(num_labels, dim)) {}

  Eigen::Index dim() const { return table.cols(); }
  void init(Rng& rng) { init_uniform(table, rng, 0.1); }

  template <typename F>
  void visit(F&& f) {
    f("entity_embedding", table, false);
  }
};

// Row i = encoder row i followed by the embedding of tag i.
template <typename T>
Matrix<T> build_re_inputs(const Matrix<T>& encoded, std::span<const std::size_t> tags,
                          const EntityLabelEmbedding<T>& emb, bool no_entity_embeddings = false) {
  require_dims(static_cast<std::size_t>(encoded.rows()) == tags.size(), "tag count differs from encoded rows");
  if (no_entity_embeddings) return encoded;
  Matrix<T> out(encoded.rows(), encoded.cols() + emb.dim());
  out.leftCols(encoded.cols()) = encoded;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    require_dims(tags[i] < static_cast<std::size_t>(emb.table.rows()), "tag index outside embedding table");
    out.row(static_cast<Eigen::Index>(i)).tail(emb.dim()) = emb.table.row(static_cast<Eigen::Index>(tags[i]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Relation candidates
// ---------------------------------------------------------------------------

struct RelationCandidate {
  std::size_t head_token = 0;
  std::size_t tail_token = 0;
  std::size_t gold_class = 0;  // index into the relation labels; NEG is 0
  std::optional<std::size_t> predicted_class;

  bool operator==(const RelationCandidate&) const = default;
};

enum class CandidateMode { kPredicted, kGold };

namespace detail {

inline bool span_tagged_exactly(const TagSequence& tags, const EntitySpan& span) {
  if (span.end >= tags.size()) return false;
  if (span.start == span.end) return tags[span.start] == Tag{Bioes::kS, span.type};
  if (tags[span.start] != Tag{Bioes::kB, span.type}) return false;
  for (std::size_t i = span.start + 1; i < span.end; ++i)
    if (tags[i] != Tag{Bioes::kI, span.type}) return false;
  return tags[span.end] == Tag{Bioes::kE, span.type};
}

}  // namespace detail

// Anchors are entity-final tokens: E-/S- predicted tags, or gold span ends in
// gold mode. Every ordered pair of distinct anchors is a candidate; its gold
// class is the annotated relation between the entities ending there, or NEG
// when there is none or (predicted mode) either entity is mistagged.
inline std::vector<RelationCandidate> build_candidates(const TagSequence& tags, std::span<const EntitySpan> gold_entities,
                                                       std::span<const RelationAnnotation> gold_relations,
                                                       CandidateMode mode, const LabelVocab& vocab) {
  std::vector<std::size_t> anchors;
  if (mode == CandidateMode::kPredicted) {
    for (std::size_t i = 0; i < tags.size(); ++i)
      if (tags[i].ends_entity()) anchors.push_back(i);
  } else {
    std::vector<bool> is_anchor(tags.size(), false);
    for (const auto& e : gold_entities) {
      require(e.end < tags.size(), ErrorKind::kSpanOutOfBounds, "gold entity beyond tag sequence");
      is_anchor[e.end] = true;
    }
    for (std::size_t i = 0; i < tags.size(); ++i)
      if (is_anchor[i]) anchors.push_back(i);
  }

  std::vector<RelationCandidate> candidates;
  candidates.reserve(anchors.size() * (anchors.size() > 0 ? anchors.size() - 1 : 0));
  for (auto i : anchors) {
    for (auto j : anchors) {
      if (i == j) continue;
      RelationCandidate c{i, j, vocab.neg_index(), std::nullopt};
      for (const auto& rel : gold_relations) {
        const auto& head = gold_entities[rel.head];
        const auto& tail = gold_entities[rel.tail];
        if (head.end != i || tail.end != j || !vocab.has_relation(rel.type)) continue;
        if (mode == CandidateMode::kPredicted &&
            !(detail::span_tagged_exactly(tags, head) && detail::span_tagged_exactly(tags, tail))) {
          continue;
        }
        c.gold_class = vocab.re_index(rel.type);
        break;
      }
      candidates.push_back(c);
    }
  }
  return candidates;
}

// ---------------------------------------------------------------------------
// Head / tail projections
// ---------------------------------------------------------------------------

template <typename T>
struct HeadTailParams {
  Ffnn<T> head;
  Ffnn<T> tail;  // unused when single_ffnn or no_head_tail

  HeadTailParams() = default;
  HeadTailParams(Eigen::Index input_dim, Eigen::Index out_dim, std::size_t depth, const Ablations& ablations) {
    if (ablations.no_head_tail) return;
    head = Ffnn<T>(input_dim, out_dim, out_dim, depth, true);
    if (!ablations.single_ffnn) tail = Ffnn<T>(input_dim, out_dim, out_dim, depth, true);
  }

  bool empty() const { return head.layers.empty(); }
  bool shared() const { return !head.layers.empty() && tail.layers.empty(); }

  void init(Rng& rng) {
    if (!head.layers.empty()) head.init(rng);
    if (!tail.layers.empty()) tail.init(rng);
  }

  template <typename F>
  void visit(F&& f) {
    auto visit_ffnn = [&](const char* name, Ffnn<T>& ffnn) {
      for (std::size_t l = 0; l < ffnn.layers.size(); ++l) {
        const std::string prefix = std::string(name) + ".layer" + std::to_string(l);
        f((prefix + ".weight").c_str(), ffnn.layers[l].weight, true);
        f((prefix + ".bias").c_str(), ffnn.layers[l].bias, false);
      }
    };
    visit_ffnn("ffnn_head", head);
    visit_ffnn("ffnn_tail", tail);
  }
};

template <typename T>
struct HeadTailCache {
  typename Ffnn<T>::Cache head;
  typename Ffnn<T>::Cache tail;
  Matrix<T> head_mask;
  Matrix<T> tail_mask;
};

// Returns (H_head, H_tail). With no projections both are x_re; with a shared
// FFNN both roles use `head` (but draw separate dropout masks).
template <typename T>
std::pair<Matrix<T>, Matrix<T>> project_head_tail(const Matrix<T>& x_re, const HeadTailParams<T>& params,
                                                  HeadTailCache<T>* cache = nullptr, double dropout = 0.0,
                                                  Rng* rng = nullptr) {
  if (params.empty()) return {x_re, x_re};
  require_dims(x_re.cols() == params.head.in_dim(), "head/tail FFNN expects width " + std::to_string(params.head.in_dim()) +
                                                        ", got " + std::to_string(x_re.cols()));
  const Ffnn<T>& tail_ffnn = params.shared() ? params.head : params.tail;
  Matrix<T> h = params.head.forward(x_re, cache ? &cache->head : nullptr);
  Matrix<T> t = tail_ffnn.forward(x_re, cache ? &cache->tail : nullptr);
  if (dropout > 0.0 && rng) {
    Matrix<T> hm = dropout_mask<T>(h.rows(), h.cols(), dropout, *rng);
    Matrix<T> tm = dropout_mask<T>(t.rows(), t.cols(), dropout, *rng);
    h = h.cwiseProduct(hm);
    t = t.cwiseProduct(tm);
    if (cache) {
      cache->head_mask = std::move(hm);
      cache->tail_mask = std::move(tm);
    }
  } else if (cache) {
    cache->head_mask.resize(0, 0);
    cache->tail_mask.resize(0, 0);
  }
  return {std::move(h), std::move(t)};
}

// d(loss)/d(x_re) given gradients on both projections.
template <typename T>
Matrix<T> project_head_tail_backward(const HeadTailCache<T>& cache, const Matrix<T>& d_head, const Matrix<T>& d_tail,
                                     const HeadTailParams<T>& params, HeadTailParams<T>& grad) {
  if (params.empty()) return d_head + d_tail;
  const Matrix<T> dh = cache.head_mask.size() != 0 ? Matrix<T>(d_head.cwiseProduct(cache.head_mask)) : d_head;
  const Matrix<T> dt = cache.tail_mask.size() != 0 ? Matrix<T>(d_tail.cwiseProduct(cache.tail_mask)) : d_tail;
  Matrix<T> dx = params.head.backward(cache.head, dh, grad.head);
  if (params.shared()) {
    dx += params.head.backward(cache.tail, dt, grad.head);
  } else {
    dx += params.tail.backward(cache.tail, dt, grad.tail);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Biaffine scorer
// ---------------------------------------------------------------------------

// score_c = h1' U_c h2 + W_c (h1 ; h2) + b_c
template <typename T>
struct BiaffineParams {
  std::vector<Matrix<T>> bilinear;  // one m x m slice per relation class
  Matrix<T> linear;                 // C x 2m
  Matrix<T> bias;                   // C x 1

  BiaffineParams() = default;
  BiaffineParams(Eigen::Index m, Eigen::Index num_classes)
      : bilinear(static_cast<std::size_t>(num_classes), Matrix<T>::Zero(m, m)),
        linear(Matrix<T>::Zero(num_classes, 2 * m)),
        bias(Matrix<T>::Zero(num_classes, 1)) {}

  Eigen::Index dim() const { return linear.cols() / 2; }
  Eigen::Index num_classes() const { return linear.rows(); }

  void init(Rng& rng) {
    for (auto& u : bilinear) init_glorot(u, rng);
    init_glorot(linear, rng);
    bias.setZero();
  }

  template <typename F>
  void visit(F&& f) {
    for (std::size_t c = 0; c < bilinear.size(); ++c) f(("biaffine.U" + std::to_string(c)).c_str(), bilinear[c], true);
    f("biaffine.W", linear, true);
    f("biaffine.b", bias, false);
  }
};

template <typename T>
Vector<T> biaffine_score(const Vector<T>& h_head, const Vector<T>& h_tail, const BiaffineParams<T>& params,
                         bool no_bilinear = false) {
  const auto m = params.dim();
  require_dims(h_head.size() == m && h_tail.size() == m,
               "biaffine expects " + std::to_string(m) + "-vectors, got " + std::to_string(h_head.size()) + " and " +
                   std::to_string(h_tail.size()));
  Vector<T> scores = params.linear.leftCols(m) * h_head + params.linear.rightCols(m) * h_tail + params.bias.col(0);
  if (!no_bilinear) {
    for (Eigen::Index c = 0; c < params.num_classes(); ++c) {
      scores(c) += h_head.dot(params.bilinear[static_cast<std::size_t>(c)] * h_tail);
    }
  }
  return scores;
}

// Accumulates parameter gradients and adds d(loss)/d(h_head), d(loss)/d(h_tail).
template <typename T>
void biaffine_backward(const Vector<T>& h_head, const Vector<T>& h_tail, const Vector<T>& d_scores,
                       const BiaffineParams<T>& params, bool no_bilinear, BiaffineParams<T>& grad, Vector<T>& d_head,
                       Vector<T>& d_tail) {
  const auto m = params.dim();
  grad.linear.leftCols(m).noalias() += d_scores * h_head.transpose();
  grad.linear.rightCols(m).noalias() += d_scores * h_tail.transpose();
  grad.bias.col(0) += d_scores;
  d_head.noalias() += params.linear.leftCols(m).transpose() * d_scores;
  d_tail.noalias() += params.linear.rightCols(m).transpose() * d_scores;
  if (no_bilinear) return;
  for (Eigen::Index c = 0; c < params.num_classes(); ++c) {
    const T g = d_scores(c);
    if (g == T(0)) continue;
    const auto& u = params.bilinear[static_cast<std::size_t>(c)];
    grad.bilinear[static_cast<std::size_t>(c)].noalias() += g * h_head * h_tail.transpose();
    d_head.noalias() += g * (u * h_tail);
    d_tail.noalias() += g * (u.transpose() * h_head);
  }
}

// Summed candidate cross-entropy; an empty candidate set costs nothing.
template <typename T>
T re_loss(const Matrix<T>& candidate_scores, std::span<const std::size_t> gold_classes, Matrix<T>* d_scores = nullptr) {
  if (candidate_scores.rows() == 0 && gold_classes.empty()) {
    if (d_scores) d_scores->resize(0, candidate_scores.cols());
    return T(0);
  }
  return sum_cross_entropy(candidate_scores, gold_classes, d_scores);
}

}  // namespace jerx
