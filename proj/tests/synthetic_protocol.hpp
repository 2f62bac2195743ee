#pragma once

// The desk-scale setup shared by the convergence, ablation, gold-mode and
// determinism checks: 500 generated sentences, fold 0 of a 5-fold split
// (350 train / 50 validation / 100 test), toy encoder, small widths.

#include <vector>

#include "jerx/config.hpp"
#include "jerx/corpus.hpp"
#include "jerx/synthetic.hpp"

namespace protocol {

inline constexpr std::size_t kSentences = 500;
inline constexpr std::uint64_t kCorpusSeed = 7;
inline constexpr std::uint64_t kFoldSeed = 11;

inline jerx::Config config(std::uint64_t seed = 42) {
  jerx::Config c;  // dropout, decay, clipping and batch size keep their defaults
  c.toy_hidden_size = 32;
  c.toy_embedding_dim = 32;
  c.entity_emb_dim = 32;
  c.head_tail_dim = 64;
  c.learning_rate = 1e-3;
  c.epochs = 50;
  c.seed = seed;
  return c;
}

struct Split {
  std::vector<jerx::AnnotatedSentence> all, train, val, test;
};

inline Split split() {
  Split s;
  s.all = jerx::synthetic::corpus(kSentences, kCorpusSeed);
  const auto fold = jerx::make_folds(s.all.size(), 5, 0.1, 0.2, kFoldSeed).front();
  s.train = jerx::select<jerx::AnnotatedSentence>(s.all, fold.train);
  s.val = jerx::select<jerx::AnnotatedSentence>(s.all, fold.val);
  s.test = jerx::select<jerx::AnnotatedSentence>(s.all, fold.test);
  return s;
}

}  // namespace protocol
