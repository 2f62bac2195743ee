#pragma once

// Analytic-vs-central-difference checks at 64-bit precision. Each check
// builds one random instance and returns the worst relative error over
// every entry of every tensor it covers.

#include <algorithm>
#include <string>
#include <vector>

#include "jerx/model.hpp"
#include "oracles.hpp"

namespace gradcheck {

using jerx::Rng;
using MatD = Eigen::MatrixXd;
using VecD = Eigen::VectorXd;

inline Eigen::Index dim(Rng& rng, Eigen::Index lo, Eigen::Index hi) {
  return lo + static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(hi - lo + 1)));
}

inline double weighted_sum(const MatD& g, const MatD& y) { return g.cwiseProduct(y).sum(); }

// Scores contracted with a random weight vector so every class contributes.
inline double biaffine(Rng& rng, bool no_bilinear = false) {
  const auto m = dim(rng, 1, 5);
  const auto c = dim(rng, 1, 4);
  jerx::BiaffineParams<double> p(m, c);
  for (auto& u : p.bilinear) u = oracle::random_matrix(m, m, rng);
  p.linear = oracle::random_matrix(c, 2 * m, rng);
  p.bias = oracle::random_matrix(c, 1, rng);
  MatD h1 = oracle::random_matrix(m, 1, rng);
  MatD h2 = oracle::random_matrix(m, 1, rng);
  const VecD g = oracle::random_matrix(c, 1, rng);

  auto loss = [&] { return g.dot(jerx::biaffine_score<double>(h1.col(0), h2.col(0), p, no_bilinear)); };
  jerx::BiaffineParams<double> grad(m, c);
  VecD d1 = VecD::Zero(m), d2 = VecD::Zero(m);
  jerx::biaffine_backward<double>(h1.col(0), h2.col(0), g, p, no_bilinear, grad, d1, d2);

  double worst = 0;
  if (!no_bilinear)
    for (std::size_t k = 0; k < p.bilinear.size(); ++k)
      worst = std::max(worst, oracle::max_rel_error(p.bilinear[k], grad.bilinear[k], loss));
  worst = std::max(worst, oracle::max_rel_error(p.linear, grad.linear, loss));
  worst = std::max(worst, oracle::max_rel_error(p.bias, grad.bias, loss));
  worst = std::max(worst, oracle::max_rel_error(h1, MatD(d1), loss));
  worst = std::max(worst, oracle::max_rel_error(h2, MatD(d2), loss));
  return worst;
}

inline double head_tail(Rng& rng, bool shared = false) {
  const auto n = dim(rng, 1, 4);
  const auto in = dim(rng, 1, 6);
  const auto m = dim(rng, 1, 6);
  jerx::Ablations ab;
  ab.single_ffnn = shared;
  jerx::HeadTailParams<double> p(in, m, 2, ab);
  for (auto* f : {&p.head, &p.tail})
    for (auto& l : f->layers) {
      l.weight = oracle::random_matrix(l.weight.rows(), l.weight.cols(), rng);
      l.bias = oracle::random_matrix(l.bias.rows(), 1, rng);
    }
  MatD x = oracle::random_matrix(n, in, rng);
  const MatD gh = oracle::random_matrix(n, m, rng);
  const MatD gt = oracle::random_matrix(n, m, rng);

  auto loss = [&] {
    const auto [h, t] = jerx::project_head_tail(x, p);
    return weighted_sum(gh, h) + weighted_sum(gt, t);
  };
  jerx::HeadTailCache<double> cache;
  jerx::project_head_tail(x, p, &cache);
  jerx::HeadTailParams<double> grad(in, m, 2, ab);
  const MatD dx = jerx::project_head_tail_backward(cache, gh, gt, p, grad);

  double worst = oracle::max_rel_error(x, dx, loss);
  for (auto [f, gf] : {std::pair{&p.head, &grad.head}, std::pair{&p.tail, &grad.tail}})
    for (std::size_t l = 0; l < f->layers.size(); ++l) {
      worst = std::max(worst, oracle::max_rel_error(f->layers[l].weight, gf->layers[l].weight, loss));
      worst = std::max(worst, oracle::max_rel_error(f->layers[l].bias, gf->layers[l].bias, loss));
    }
  return worst;
}

inline double ner_head(Rng& rng) {
  const auto n = dim(rng, 1, 5);
  const auto d = dim(rng, 1, 6);
  const auto c = dim(rng, 2, 9);
  jerx::NerHeadParams<double> p(d, c);
  p.ffnn.layers[0].weight = oracle::random_matrix(c, d, rng);
  p.ffnn.layers[0].bias = oracle::random_matrix(c, 1, rng);
  MatD x = oracle::random_matrix(n, d, rng);
  std::vector<std::size_t> gold(static_cast<std::size_t>(n));
  for (auto& g : gold) g = rng.index(static_cast<std::size_t>(c));

  auto loss = [&] { return jerx::ner_loss<double>(jerx::ner_forward(x, p), gold); };
  jerx::NerCache<double> cache;
  MatD d_scores;
  jerx::ner_loss<double>(jerx::ner_forward(x, p, &cache), gold, &d_scores);
  jerx::NerHeadParams<double> grad(d, c);
  grad.ffnn = p.ffnn.zeros_like();
  const MatD dx = jerx::ner_backward(cache, d_scores, p, grad);

  double worst = oracle::max_rel_error(x, dx, loss);
  worst = std::max(worst, oracle::max_rel_error(p.ffnn.layers[0].weight, grad.ffnn.layers[0].weight, loss));
  worst = std::max(worst, oracle::max_rel_error(p.ffnn.layers[0].bias, grad.ffnn.layers[0].bias, loss));
  return worst;
}

inline double toy_encoder(Rng& rng) {
  jerx::EncoderSpec spec;
  spec.kind = jerx::EncoderKind::kToy;
  spec.vocab_size = static_cast<std::size_t>(dim(rng, 2, 8));
  spec.embedding_dim = static_cast<std::size_t>(dim(rng, 1, 5));
  spec.hidden_size = static_cast<std::size_t>(dim(rng, 1, 8));
  spec.window = 2;
  jerx::ToyEncoderParams<double> p(spec);
  p.embedding = oracle::random_matrix(p.embedding.rows(), p.embedding.cols(), rng);
  p.weight = oracle::random_matrix(p.weight.rows(), p.weight.cols(), rng, 0.7);
  p.bias = oracle::random_matrix(p.bias.rows(), 1, rng, 0.5);
  std::vector<std::size_t> ids(1 + rng.index(6));
  for (auto& id : ids) id = rng.index(spec.vocab_size);
  const MatD g = oracle::random_matrix(static_cast<Eigen::Index>(ids.size()), p.weight.rows(), rng);

  auto loss = [&] { return weighted_sum(g, jerx::toy_encode<double>(ids, p, spec)); };
  const auto grad = jerx::toy_forward_backward<double>(ids, p, spec, g);
  double worst = oracle::max_rel_error(p.embedding, grad.embedding, loss);
  worst = std::max(worst, oracle::max_rel_error(p.weight, grad.weight, loss));
  worst = std::max(worst, oracle::max_rel_error(p.bias, grad.bias, loss));
  return worst;
}

// A random sentence over a tiny vocabulary with 1-3 entities and relations
// between some of them.
inline jerx::AnnotatedSentence random_sentence(Rng& rng, std::size_t vocab = 6) {
  const std::size_t n = 3 + rng.index(5);
  std::vector<std::string> words(n);
  for (auto& w : words) w = "w" + std::to_string(rng.index(vocab));
  jerx::AnnotatedSentence s{"s", jerx::make_tokens(words), {}, {}};
  s.entities = oracle::random_spans(n, {"A", "B"}, rng, 0.5);
  for (std::size_t i = 0; i < s.entities.size(); ++i)
    for (std::size_t j = 0; j < s.entities.size(); ++j)
      if (i != j && rng.uniform() < 0.4) s.relations.push_back({i, j, rng.uniform() < 0.5 ? "R1" : "R2"});
  return s;
}

inline jerx::ModelShape small_shape(Rng& rng) {
  jerx::ModelShape shape;
  shape.encoder.kind = jerx::EncoderKind::kToy;
  shape.encoder.hidden_size = static_cast<std::size_t>(dim(rng, 2, 5));
  shape.encoder.embedding_dim = static_cast<std::size_t>(dim(rng, 2, 4));
  shape.entity_emb_dim = static_cast<std::size_t>(dim(rng, 1, 4));
  shape.head_tail_dim = static_cast<std::size_t>(dim(rng, 2, 5));
  return shape;
}

// Scales every parameter tensor up so pre-activations are O(1) and the
// gradients are not dominated by rounding.
inline void randomize(jerx::ModelParams<double>& params, Rng& rng) {
  params.visit([&](const char*, MatD& m, bool) { m = oracle::random_matrix(m.rows(), m.cols(), rng, 0.8); });
}

// Entity-label embeddings through the whole model: gold candidate mode so
// the candidate set does not move under perturbation.
inline double entity_embeddings(Rng& rng) {
  const auto sentence = random_sentence(rng);
  const std::vector<jerx::AnnotatedSentence> corpus{sentence, jerx::AnnotatedSentence{
      "t", jerx::make_tokens({"w0"}), {{0, 0, "A"}, }, {}}};
  jerx::LabelVocab labels({"A", "B"}, {"R1", "R2"});
  jerx::JointModel<double> model(small_shape(rng), labels, jerx::TokenVocab::from_corpus(corpus));
  randomize(model.params(), rng);

  auto loss = [&] {
    const auto l = model.forward_backward(sentence, 1.0, jerx::CandidateMode::kGold, nullptr);
    return l.ner + l.re;
  };
  auto grad = model.params().zeros_like();
  model.forward_backward(sentence, 1.0, jerx::CandidateMode::kGold, &grad);
  return oracle::max_rel_error(model.params().entity_embedding.table, grad.entity_embedding.table, loss);
}

// Every tensor of a full model on a two-sentence batch, predicted-tag mode.
inline double full_model(Rng& rng, const jerx::Ablations& ablations = {}) {
  const std::vector<jerx::AnnotatedSentence> batch{random_sentence(rng), random_sentence(rng)};
  jerx::LabelVocab labels({"A", "B"}, {"R1", "R2"});
  auto shape = small_shape(rng);
  shape.ablations = ablations;
  jerx::JointModel<double> model(shape, labels, jerx::TokenVocab::from_corpus(batch));
  randomize(model.params(), rng);

  auto loss = [&] {
    double total = 0;
    for (const auto& s : batch) {
      const auto l = model.forward_backward(s, 0.7, jerx::CandidateMode::kPredicted, nullptr);
      total += l.ner + 0.7 * l.re;
    }
    return total;
  };
  auto grad = model.params().zeros_like();
  for (const auto& s : batch) model.forward_backward(s, 0.7, jerx::CandidateMode::kPredicted, &grad);

  std::vector<MatD*> params, grads;
  model.params().visit([&](const char*, MatD& m, bool) { params.push_back(&m); });
  grad.visit([&](const char*, MatD& m, bool) { grads.push_back(&m); });
  double worst = 0;
  for (std::size_t i = 0; i < params.size(); ++i)
    worst = std::max(worst, oracle::max_rel_error(*params[i], *grads[i], loss));
  return worst;
}

}  // namespace gradcheck
