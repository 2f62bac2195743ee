#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jerx/corpus.hpp"
#include "jerx/encoder.hpp"
#include "jerx/ner.hpp"
#include "jerx/re.hpp"
#include "jerx/tensor.hpp"

namespace jerx {

struct ModelShape {
  EncoderSpec encoder;
  std::size_t entity_emb_dim = 128;
  std::size_t head_tail_dim = 512;
  std::size_t ner_layers = 1;
  std::size_t re_layers = 2;
  Ablations ablations;

  Eigen::Index re_input_dim() const {
    return static_cast<Eigen::Index>(encoder.hidden_size + (ablations.no_entity_embeddings ? 0 : entity_emb_dim));
  }
  // Width fed to the biaffine scorer.
  Eigen::Index scorer_dim() const {
    return ablations.no_head_tail ? re_input_dim() : static_cast<Eigen::Index>(head_tail_dim);
  }
};

template <typename T>
struct ModelParams {
  ToyEncoderParams<T> encoder;  // empty for file-backed encoders
  NerHeadParams<T> ner;
  EntityLabelEmbedding<T> entity_embedding;
  HeadTailParams<T> head_tail;
  BiaffineParams<T> biaffine;

  ModelParams() = default;
  ModelParams(const ModelShape& shape, const LabelVocab& labels) {
    const auto d = static_cast<Eigen::Index>(shape.encoder.hidden_size);
    if (shape.encoder.kind == EncoderKind::kToy) encoder = ToyEncoderParams<T>(shape.encoder);
    ner = NerHeadParams<T>(d, static_cast<Eigen::Index>(labels.ner_size()), shape.ner_layers);
    if (!shape.ablations.no_entity_embeddings) {
      entity_embedding = EntityLabelEmbedding<T>(static_cast<Eigen::Index>(labels.ner_size()),
                                                 static_cast<Eigen::Index>(shape.entity_emb_dim));
    }
    head_tail = HeadTailParams<T>(shape.re_input_dim(), static_cast<Eigen::Index>(shape.head_tail_dim), shape.re_layers,
                                  shape.ablations);
    biaffine = BiaffineParams<T>(shape.scorer_dim(), static_cast<Eigen::Index>(labels.re_size()));
  }

  void init(Rng& rng) {
    if (encoder.embedding.size() != 0) encoder.init(rng);
    ner.ffnn.init(rng);
    if (entity_embedding.table.size() != 0) entity_embedding.init(rng);
    head_tail.init(rng);
    biaffine.init(rng);
  }

  // f(name, matrix, weight_decay) over every trainable tensor in a fixed order.
  template <typename F>
  void visit(F&& f) {
    if (encoder.embedding.size() != 0) encoder.visit(f);
    ner.visit(f);
    if (entity_embedding.table.size() != 0) entity_embedding.visit(f);
    head_tail.visit(f);
    biaffine.visit(f);
  }

  template <typename F>
  void visit(F&& f) const {
    const_cast<ModelParams*>(this)->visit([&](const char* name, Matrix<T>& m, bool decay) {
      f(name, static_cast<const Matrix<T>&>(m), decay);
    });
  }

  ModelParams zeros_like() const {
    ModelParams out = *this;
    out.visit([](const char*, Matrix<T>& m, bool) { m.setZero(); });
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const char*, const Matrix<T>& m, bool) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.encoder.embedding = encoder.embedding.template cast<U>();
    out.encoder.weight = encoder.weight.template cast<U>();
    out.encoder.bias = encoder.bias.template cast<U>();
    auto cast_ffnn = [](const Ffnn<T>& in) {
      Ffnn<U> f;
      f.activate_last = in.activate_last;
      for (const auto& l : in.layers) {
        Dense<U> d;
        d.weight = l.weight.template cast<U>();
        d.bias = l.bias.template cast<U>();
        f.layers.push_back(std::move(d));
      }
      return f;
    };
    out.ner.ffnn = cast_ffnn(ner.ffnn);
    out.entity_embedding.table = entity_embedding.table.template cast<U>();
    out.head_tail.head = cast_ffnn(head_tail.head);
    out.head_tail.tail = cast_ffnn(head_tail.tail);
    for (const auto& u : biaffine.bilinear) out.biaffine.bilinear.push_back(u.template cast<U>());
    out.biaffine.linear = biaffine.linear.template cast<U>();
    out.biaffine.bias = biaffine.bias.template cast<U>();
    return out;
  }
};

// Relation between two concrete spans, the unit of relation scoring.
struct RelationMention {
  EntitySpan head;
  EntitySpan tail;
  std::string type;

  auto operator<=>(const RelationMention&) const = default;
};

inline std::vector<RelationMention> relation_mentions(const AnnotatedSentence& s) {
  std::vector<RelationMention> out;
  out.reserve(s.relations.size());
  for (const auto& r : s.relations) out.push_back({s.entities[r.head], s.entities[r.tail], r.type});
  return out;
}

struct Prediction {
  std::vector<std::size_t> tag_ids;
  std::vector<EntitySpan> entities;
  std::vector<RelationMention> relations;
  std::vector<RelationCandidate> candidates;  // with predicted_class filled
};

template <typename T>
struct SentenceLoss {
  T ner = 0;
  T re = 0;
  std::size_t candidates = 0;
};

template <typename T>
class JointModel {
 public:
  JointModel() = default;
  JointModel(ModelShape shape, LabelVocab labels, TokenVocab tokens)
      : shape_(std::move(shape)), labels_(std::move(labels)), tokens_(std::move(tokens)) {
    if (shape_.encoder.kind == EncoderKind::kToy) shape_.encoder.vocab_size = tokens_.size();
    shape_.encoder.validate();
    params_ = ModelParams<T>(shape_, labels_);
  }

  const ModelShape& shape() const { return shape_; }
  const LabelVocab& labels() const { return labels_; }
  const TokenVocab& tokens() const { return tokens_; }
  ModelParams<T>& params() { return params_; }
  const ModelParams<T>& params() const { return params_; }

  void set_file_encoder(const FileBackedEncoder* file) { file_ = file; }

  // One sentence: forward, summed NER loss, RE loss over the candidates and,
  // when `grad` is given, gradients of L_ner + lambda * L_re accumulated into
  // it. `rng` enables dropout at `dropout` rate.
  SentenceLoss<T> forward_backward(const AnnotatedSentence& sentence, T lambda, CandidateMode mode,
                                   ModelParams<T>* grad, double dropout = 0.0, Rng* rng = nullptr) const {
    const auto n = static_cast<Eigen::Index>(sentence.size());
    const TagSequence gold_tags = encode_bioes(sentence.entities, sentence.size());
    const std::vector<std::size_t> gold_ids = labels_.to_indices(gold_tags);

    ToyEncoderCache<T> enc_cache;
    const Matrix<T> x = encode(sentence, &enc_cache, dropout, rng);

    NerCache<T> ner_cache;
    const Matrix<T> scores = ner_forward(x, params_.ner, &ner_cache, dropout, rng);
    Matrix<T> d_scores;
    SentenceLoss<T> loss;
    loss.ner = ner_loss(scores, gold_ids, grad ? &d_scores : nullptr);

    const std::vector<std::size_t> predicted = predict_tags(scores);
    const bool use_gold = mode == CandidateMode::kGold;
    const std::vector<std::size_t>& re_tags = use_gold ? gold_ids : predicted;
    const auto candidates = build_candidates(use_gold ? gold_tags : labels_.to_tags(predicted), sentence.entities,
                                             sentence.relations, mode, labels_);
    loss.candidates = candidates.size();

    Matrix<T> d_x = Matrix<T>::Zero(n, x.cols());
    if (!candidates.empty()) {
      RelationPass pass = relation_pass(x, re_tags, candidates, dropout, rng);
      std::vector<std::size_t> gold(candidates.size());
      for (std::size_t r = 0; r < candidates.size(); ++r) gold[r] = candidates[r].gold_class;
      Matrix<T> d_re;
      loss.re = re_loss(pass.scores, gold, grad ? &d_re : nullptr);
      if (grad && lambda != T(0)) relation_backward(pass, candidates, lambda * d_re, *grad, d_x);
    }

    if (grad) {
      d_x += ner_backward(ner_cache, d_scores, params_.ner, grad->ner);
      if (shape_.encoder.kind == EncoderKind::kToy) {
        toy_backward(enc_cache, d_x, params_.encoder, shape_.encoder, grad->encoder);
      }
    }
    return loss;
  }

  // Inference without dropout. Predicted mode decodes entities from the NER
  // head; gold mode scores candidates built on the sentence's gold entities.
  Prediction predict(const AnnotatedSentence& sentence, CandidateMode mode = CandidateMode::kPredicted) const {
    Prediction out;
    const Matrix<T> x = encode(sentence, nullptr, 0.0, nullptr);
    const Matrix<T> scores = ner_forward(x, params_.ner);
    out.tag_ids = predict_tags(scores);
    const TagSequence predicted_tags = labels_.to_tags(out.tag_ids);
    out.entities = decode_bioes(predicted_tags);

    const bool use_gold = mode == CandidateMode::kGold;
    std::vector<std::size_t> re_tags = out.tag_ids;
    TagSequence candidate_tags = predicted_tags;
    if (use_gold) {
      candidate_tags = encode_bioes(sentence.entities, sentence.size());
      re_tags = labels_.to_indices(candidate_tags);
    }
    out.candidates = build_candidates(candidate_tags, sentence.entities, sentence.relations, mode, labels_);
    if (out.candidates.empty()) return out;

    const RelationPass pass = relation_pass(x, re_tags, out.candidates, 0.0, nullptr);
    const std::vector<EntitySpan>& arguments = use_gold ? sentence.entities : out.entities;
    auto entity_ending_at = [&](std::size_t token) -> const EntitySpan* {
      for (const auto& e : arguments)
        if (e.end == token) return &e;
      return nullptr;
    };
    for (std::size_t r = 0; r < out.candidates.size(); ++r) {
      auto& c = out.candidates[r];
      c.predicted_class = argmax<T>(pass.scores.row(static_cast<Eigen::Index>(r)));
      if (*c.predicted_class == labels_.neg_index()) continue;
      const EntitySpan* head = entity_ending_at(c.head_token);
      const EntitySpan* tail = entity_ending_at(c.tail_token);
      // An E-/S- anchor whose fragment the strict decoder rejected has no span.
      if (!head || !tail) continue;
      out.relations.push_back({*head, *tail, labels_.re_label(*c.predicted_class)});
    }
    return out;
  }

  Matrix<T> encode(const AnnotatedSentence& sentence, ToyEncoderCache<T>* cache, double dropout, Rng* rng) const {
    if (shape_.encoder.kind == EncoderKind::kFileBacked) {
      require(file_ != nullptr, ErrorKind::kMissingEmbeddingRecord, "file-backed encoder has no embedding file");
      Matrix<T> x = file_->encode<T>(sentence).vectors;
      require_dims(static_cast<std::size_t>(x.cols()) == shape_.encoder.hidden_size,
                   "embedding file hidden size " + std::to_string(x.cols()) + " != model hidden size " +
                       std::to_string(shape_.encoder.hidden_size));
      return x;
    }
    const auto ids = tokens_.lookup(sentence);
    return toy_encode(std::span<const std::size_t>(ids), params_.encoder, shape_.encoder, cache, dropout, rng);
  }

 private:
  struct RelationPass {
    std::vector<std::size_t> anchors;         // sentence token per local row
    std::vector<std::size_t> local_of_token;  // token -> local row
    std::vector<std::size_t> anchor_tags;
    HeadTailCache<T> cache;
    Matrix<T> head;
    Matrix<T> tail;
    Matrix<T> scores;  // candidates x classes
  };

  // RE forward restricted to anchor tokens; only their projections are used.
  RelationPass relation_pass(const Matrix<T>& x, std::span<const std::size_t> tags,
                             std::span<const RelationCandidate> candidates, double dropout, Rng* rng) const {
    RelationPass pass;
    pass.local_of_token.assign(static_cast<std::size_t>(x.rows()), SIZE_MAX);
    for (const auto& c : candidates) {
      for (auto tok : {c.head_token, c.tail_token}) {
        if (pass.local_of_token[tok] == SIZE_MAX) {
          pass.local_of_token[tok] = pass.anchors.size();
          pass.anchors.push_back(tok);
        }
      }
    }
    Matrix<T> x_sub(static_cast<Eigen::Index>(pass.anchors.size()), x.cols());
    for (std::size_t a = 0; a < pass.anchors.size(); ++a) {
      x_sub.row(static_cast<Eigen::Index>(a)) = x.row(static_cast<Eigen::Index>(pass.anchors[a]));
      pass.anchor_tags.push_back(tags[pass.anchors[a]]);
    }
    const Matrix<T> x_re =
        build_re_inputs(x_sub, pass.anchor_tags, params_.entity_embedding, shape_.ablations.no_entity_embeddings);
    std::tie(pass.head, pass.tail) = project_head_tail(x_re, params_.head_tail, &pass.cache, dropout, rng);

    pass.scores.resize(static_cast<Eigen::Index>(candidates.size()), params_.biaffine.num_classes());
    for (std::size_t r = 0; r < candidates.size(); ++r) {
      const auto hi = static_cast<Eigen::Index>(pass.local_of_token[candidates[r].head_token]);
      const auto ti = static_cast<Eigen::Index>(pass.local_of_token[candidates[r].tail_token]);
      pass.scores.row(static_cast<Eigen::Index>(r)) =
          biaffine_score<T>(pass.head.row(hi).transpose(), pass.tail.row(ti).transpose(), params_.biaffine,
                            shape_.ablations.no_bilinear)
              .transpose();
    }
    return pass;
  }

  void relation_backward(const RelationPass& pass, std::span<const RelationCandidate> candidates,
                         const Matrix<T>& d_scores, ModelParams<T>& grad, Matrix<T>& d_x) const {
    Matrix<T> d_head = Matrix<T>::Zero(pass.head.rows(), pass.head.cols());
    Matrix<T> d_tail = Matrix<T>::Zero(pass.tail.rows(), pass.tail.cols());
    Vector<T> dh(pass.head.cols());
    Vector<T> dt(pass.tail.cols());
    for (std::size_t r = 0; r < candidates.size(); ++r) {
      const auto hi = static_cast<Eigen::Index>(pass.local_of_token[candidates[r].head_token]);
      const auto ti = static_cast<Eigen::Index>(pass.local_of_token[candidates[r].tail_token]);
      dh.setZero();
      dt.setZero();
      biaffine_backward<T>(pass.head.row(hi).transpose(), pass.tail.row(ti).transpose(),
                           d_scores.row(static_cast<Eigen::Index>(r)).transpose(), params_.biaffine,
                           shape_.ablations.no_bilinear, grad.biaffine, dh, dt);
      d_head.row(hi) += dh.transpose();
      d_tail.row(ti) += dt.transpose();
    }
    const Matrix<T> d_re = project_head_tail_backward(pass.cache, d_head, d_tail, params_.head_tail, grad.head_tail);
    const auto d = d_x.cols();
    for (std::size_t a = 0; a < pass.anchors.size(); ++a) {
      const auto row = static_cast<Eigen::Index>(a);
      d_x.row(static_cast<Eigen::Index>(pass.anchors[a])) += d_re.row(row).head(d);
      if (!shape_.ablations.no_entity_embeddings) {
        grad.entity_embedding.table.row(static_cast<Eigen::Index>(pass.anchor_tags[a])) +=
            d_re.row(row).tail(params_.entity_embedding.dim());
      }
    }
  }

  ModelShape shape_;
  LabelVocab labels_;
  TokenVocab tokens_;
  ModelParams<T> params_;
  const FileBackedEncoder* file_ = nullptr;
};

}  // namespace jerx
