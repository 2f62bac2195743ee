#include <gtest/gtest.h>

#include "gradient_suite.hpp"

// Twenty random instances per component here; the acceptance binary runs
// the full hundred.

namespace {

template <typename F>
double worst_of(std::uint64_t seed, int instances, F&& check) {
  jerx::Rng rng(seed);
  double worst = 0;
  for (int i = 0; i < instances; ++i) worst = std::max(worst, check(rng));
  return worst;
}

}  // namespace

TEST(Gradients, Biaffine) { EXPECT_LT(worst_of(1, 20, [](auto& r) { return gradcheck::biaffine(r); }), 1e-4); }

TEST(Gradients, BiaffineWithoutBilinear) {
  EXPECT_LT(worst_of(2, 20, [](auto& r) { return gradcheck::biaffine(r, true); }), 1e-4);
}

TEST(Gradients, HeadTail) { EXPECT_LT(worst_of(3, 20, [](auto& r) { return gradcheck::head_tail(r); }), 1e-4); }

TEST(Gradients, SharedHeadTail) {
  EXPECT_LT(worst_of(4, 20, [](auto& r) { return gradcheck::head_tail(r, true); }), 1e-4);
}

TEST(Gradients, NerHead) { EXPECT_LT(worst_of(5, 20, [](auto& r) { return gradcheck::ner_head(r); }), 1e-4); }

TEST(Gradients, ToyEncoder) { EXPECT_LT(worst_of(6, 20, [](auto& r) { return gradcheck::toy_encoder(r); }), 1e-4); }

TEST(Gradients, EntityEmbeddings) {
  EXPECT_LT(worst_of(7, 20, [](auto& r) { return gradcheck::entity_embeddings(r); }), 1e-4);
}

TEST(Gradients, FullModelTwoSentenceBatch) {
  EXPECT_LT(worst_of(8, 10, [](auto& r) { return gradcheck::full_model(r); }), 1e-3);
}

TEST(Gradients, FullModelUnderEachAblation) {
  for (const char* name : {"no_entity_embeddings", "single_ffnn", "no_head_tail", "no_bilinear"}) {
    jerx::Ablations ab;
    if (std::string(name) == "no_entity_embeddings") ab.no_entity_embeddings = true;
    if (std::string(name) == "single_ffnn") ab.single_ffnn = true;
    if (std::string(name) == "no_head_tail") ab.no_head_tail = true;
    if (std::string(name) == "no_bilinear") ab.no_bilinear = true;
    EXPECT_LT(worst_of(9, 5, [&](auto& r) { return gradcheck::full_model(r, ab); }), 1e-3) << name;
  }
}

TEST(Gradients, FileEncoderContributesNoGradient) {
  jerx::emb::File file;
  file.header.hidden_size = 3;
  jerx::emb::Record rec{"s", 3, std::vector<float>(9, 0.5f), std::nullopt};
  file.add(rec);
  const jerx::FileBackedEncoder enc(file);
  jerx::ModelShape shape;
  shape.encoder.kind = jerx::EncoderKind::kFileBacked;
  shape.encoder.hidden_size = 3;
  shape.entity_emb_dim = 2;
  shape.head_tail_dim = 3;
  jerx::JointModel<double> model(shape, jerx::LabelVocab({"A"}, {"R"}), jerx::TokenVocab());
  model.set_file_encoder(&enc);
  jerx::Rng rng(10);
  model.params().init(rng);
  jerx::AnnotatedSentence s{"s", jerx::make_tokens({"x", "y", "z"}), {{0, 0, "A"}, {2, 2, "A"}}, {{0, 1, "R"}}};
  auto grad = model.params().zeros_like();
  model.forward_backward(s, 1.0, jerx::CandidateMode::kGold, &grad);
  EXPECT_EQ(model.params().encoder.embedding.size(), 0);
  EXPECT_TRUE(grad.encoder.weight.isZero(0));
  EXPECT_GT(grad.biaffine.bias.cwiseAbs().sum(), 0.0);
}
