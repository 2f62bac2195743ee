#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "jerx/training.hpp"
#include "synthetic_protocol.hpp"

using namespace jerx;
using MatD = Eigen::MatrixXd;

TEST(Lambda, RampsOverFirstEpochThenStaysAtOne) {
  EXPECT_EQ(lambda_schedule(0, 0, 100), 0.0);
  EXPECT_EQ(lambda_schedule(0, 99, 100), 1.0);
  EXPECT_DOUBLE_EQ(lambda_schedule(0, 33, 100), 33.0 / 99.0);
  for (std::size_t b : {0u, 7u, 99u}) EXPECT_EQ(lambda_schedule(3, b, 100), 1.0);
  EXPECT_EQ(lambda_schedule(0, 0, 1), 0.0);
  EXPECT_EQ(lambda_schedule(0, 0, 2), 0.0);
  EXPECT_EQ(lambda_schedule(0, 1, 2), 1.0);
  for (std::size_t b = 0; b < 10; ++b) EXPECT_EQ(lambda_schedule(0, b, 10, true), 1.0);
  EXPECT_THROW(lambda_schedule(0, 0, 0), Error);
}

TEST(Lambda, NonDecreasingAndBounded) {
  double prev = 0;
  for (std::size_t e = 0; e < 3; ++e)
    for (std::size_t b = 0; b < 13; ++b) {
      const double l = lambda_schedule(e, b, 13);
      EXPECT_GE(l, prev);
      EXPECT_LE(l, 1.0);
      prev = l;
    }
}

TEST(JointLoss, WeightsRelationTerm) {
  EXPECT_EQ(joint_loss(2.0, 3.0, 0.0), 2.0);
  EXPECT_EQ(joint_loss(2.0, 3.0, 1.0), 5.0);
  EXPECT_EQ(joint_loss(2.0, 3.0, 0.5), 3.5);
}

namespace {

JointModel<double> tiny_model(const std::vector<AnnotatedSentence>& corpus, Config c = {}) {
  c.toy_hidden_size = 8;
  c.toy_embedding_dim = 6;
  c.entity_emb_dim = 4;
  c.head_tail_dim = 8;
  return make_model<double>(c, corpus);
}

}  // namespace

TEST(Clip, RescalesToThreshold) {
  const auto corpus = synthetic::corpus(3, 1);
  auto grad = tiny_model(corpus).params().zeros_like();
  grad.biaffine.bias(0, 0) = 3;
  grad.ner.ffnn.layers[0].bias(1, 0) = 4;
  EXPECT_DOUBLE_EQ(clip_grad_norm(grad, 1.0), 5.0);
  EXPECT_NEAR(global_norm(grad), 1.0, 1e-12);
  EXPECT_NEAR(grad.biaffine.bias(0, 0), 0.6, 1e-12);

  auto small = tiny_model(corpus).params().zeros_like();
  small.biaffine.bias(0, 0) = 0.5;
  EXPECT_DOUBLE_EQ(clip_grad_norm(small, 1.0), 0.5);
  EXPECT_EQ(small.biaffine.bias(0, 0), 0.5);
}

TEST(AdamW, FirstStepMatchesClosedForm) {
  const auto corpus = synthetic::corpus(3, 1);
  auto model = tiny_model(corpus);
  auto before = model.params();
  auto grad = model.params().zeros_like();
  Rng rng(2);
  grad.visit([&](const char*, MatD& m, bool) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.uniform(-1, 1);
  });
  const double lr = 0.01, wd = 0.1, eps = 1e-8;
  AdamW<double> opt(model.params(), lr, 0.9, 0.999, eps, wd);
  opt.step(model.params(), grad);

  std::vector<const MatD*> p0, p1, g;
  std::vector<bool> decays;
  before.visit([&](const char*, const MatD& m, bool d) {
    p0.push_back(&m);
    decays.push_back(d);
  });
  model.params().visit([&](const char*, const MatD& m, bool) { p1.push_back(&m); });
  grad.visit([&](const char*, const MatD& m, bool) { g.push_back(&m); });
  for (std::size_t t = 0; t < p0.size(); ++t)
    for (Eigen::Index i = 0; i < p0[t]->size(); ++i) {
      const double gi = (*g[t])(i);
      const double decayed = decays[t] ? (*p0[t])(i) * (1 - lr * wd) : (*p0[t])(i);
      ASSERT_NEAR((*p1[t])(i), decayed - lr * gi / (std::abs(gi) + eps), 1e-12);
    }
}

TEST(AdamW, DecaySkipsBiasesAndEntityEmbeddings) {
  const auto corpus = synthetic::corpus(3, 1);
  auto model = tiny_model(corpus);
  std::vector<std::string> no_decay;
  model.params().visit([&](const char* name, const MatD&, bool d) {
    if (!d) no_decay.push_back(name);
  });
  for (const auto& name : no_decay) {
    const bool bias = name.ends_with(".bias") || name == "biaffine.b";
    EXPECT_TRUE(bias || name == "entity_embedding") << name;
  }
  EXPECT_NE(std::find(no_decay.begin(), no_decay.end(), "entity_embedding"), no_decay.end());

  auto grad = model.params().zeros_like();
  const auto table = model.params().entity_embedding.table;
  const auto weight = model.params().biaffine.linear;
  AdamW<double> opt(model.params(), 0.1, 0.9, 0.999, 1e-8, 0.5);
  opt.step(model.params(), grad);
  EXPECT_EQ(model.params().entity_embedding.table, table);
  EXPECT_LT((model.params().biaffine.linear - weight * 0.95).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(TrainStep, ZeroLearningRateLeavesParameters) {
  const auto corpus = synthetic::corpus(8, 3);
  Config c;
  c.learning_rate = 0;
  auto model = tiny_model(corpus, c);
  const auto before = model.params();
  TrainState<double> state(model, c);
  const auto m = train_step<double>(corpus, state, c, 2);
  EXPECT_EQ(state.batch, 1u);
  EXPECT_EQ(state.epoch, 0u);
  EXPECT_EQ(state.optimizer.steps(), 1u);
  EXPECT_EQ(m.lambda, 0.0);
  std::vector<const MatD*> a, b;
  before.visit([&](const char*, const MatD& x, bool) { a.push_back(&x); });
  state.model.params().visit([&](const char*, const MatD& x, bool) { b.push_back(&x); });
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i], *b[i]);
  train_step<double>(corpus, state, c, 2);
  EXPECT_EQ(state.batch, 0u);
  EXPECT_EQ(state.epoch, 1u);
}

TEST(TrainStep, PostClipNormWithinThreshold) {
  const auto corpus = synthetic::corpus(16, 4);
  Config c;
  c.learning_rate = 1e-3;
  TrainState<double> state(tiny_model(corpus, c), c);
  for (int i = 0; i < 5; ++i) {
    const auto m = train_step<double>(corpus, state, c, 1);
    EXPECT_LE(m.clipped_norm, c.grad_clip + 1e-9);
    if (m.grad_norm > c.grad_clip) EXPECT_NEAR(m.clipped_norm, c.grad_clip, 1e-9);
  }
}

TEST(TrainStep, NonFiniteLossAborts) {
  const auto corpus = synthetic::corpus(4, 5);
  Config c;
  auto model = tiny_model(corpus, c);
  model.params().ner.ffnn.layers[0].bias(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainState<double> state(model, c);
  try {
    train_step<double>(corpus, state, c, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNonFiniteLoss);
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos);
  }
}

TEST(ForwardBackward, ZeroLambdaLeavesRelationParametersUntouched) {
  const auto corpus = synthetic::corpus(6, 6);
  auto model = tiny_model(corpus);
  auto grad = model.params().zeros_like();
  std::size_t candidates = 0;
  for (const auto& s : corpus) candidates += model.forward_backward(s, 0.0, CandidateMode::kGold, &grad).candidates;
  ASSERT_GT(candidates, 0u);
  EXPECT_TRUE(grad.entity_embedding.table.isZero(0));
  grad.head_tail.visit([](const char* name, const MatD& m, bool) { EXPECT_TRUE(m.isZero(0)) << name; });
  grad.biaffine.visit([](const char* name, const MatD& m, bool) { EXPECT_TRUE(m.isZero(0)) << name; });
  EXPECT_FALSE(grad.ner.ffnn.layers[0].weight.isZero(0));
}

TEST(Precision, FloatAndDoubleAgreeOnLoss) {
  const auto corpus = synthetic::corpus(4, 8);
  auto model = tiny_model(corpus);
  JointModel<float> single(model.shape(), model.labels(), model.tokens());
  single.params() = model.params().cast<float>();
  for (const auto& s : corpus) {
    const auto a = model.forward_backward(s, 1.0, CandidateMode::kGold, nullptr);
    const auto b = single.forward_backward(s, 1.0f, CandidateMode::kGold, nullptr);
    EXPECT_NEAR(a.ner, b.ner, 1e-4 * std::max(1.0, a.ner));
    EXPECT_NEAR(a.re, b.re, 1e-4 * std::max(1.0, a.re));
  }
}

TEST(Train, ZeroEpochsReturnsInitialModel) {
  const auto corpus = synthetic::corpus(10, 9);
  Config c;
  c.epochs = 0;
  auto model = tiny_model(corpus, c);
  const auto result = train<double>(model, corpus, corpus, c);
  EXPECT_TRUE(result.log.empty());
  EXPECT_EQ(result.best_epoch, 0u);
  EXPECT_EQ(result.model.params().biaffine.linear, model.params().biaffine.linear);
  EXPECT_EQ(metrics_csv(result.log), metrics_csv_header());
}

TEST(Train, NoPretrainingLogsLambdaOne) {
  const auto corpus = synthetic::corpus(40, 10);
  Config c;
  c.epochs = 2;
  c.batch_size = 8;
  c.ablations.no_pretraining = true;
  const auto result = train<double>(tiny_model(corpus, c), corpus, {}, c);
  for (const auto& row : result.log) EXPECT_EQ(row.lambda_mean, 1.0);

  Config ramp = c;
  ramp.ablations.no_pretraining = false;
  const auto ramped = train<double>(tiny_model(corpus, ramp), corpus, {}, ramp);
  EXPECT_DOUBLE_EQ(ramped.log[0].lambda_mean, 0.5);
  EXPECT_EQ(ramped.log[1].lambda_mean, 1.0);
}

TEST(Train, LastPartialBatchIsKept) {
  const auto corpus = synthetic::corpus(10, 11);
  Config c;
  c.epochs = 1;
  c.batch_size = 4;  // 4 + 4 + 2
  const auto result = train<double>(tiny_model(corpus, c), corpus, {}, c);
  // ramp over 3 batches: 0, 0.5, 1
  EXPECT_DOUBLE_EQ(result.log[0].lambda_mean, 0.5);
}

TEST(Train, SameSeedGivesIdenticalMetrics) {
  const auto corpus = synthetic::corpus(30, 12);
  Config c;
  c.epochs = 3;
  c.batch_size = 8;
  c.learning_rate = 1e-3;
  const auto a = train<float>(make_model<float>(c, corpus), corpus, corpus, c);
  const auto b = train<float>(make_model<float>(c, corpus), corpus, corpus, c);
  EXPECT_EQ(metrics_csv(a.log), metrics_csv(b.log));
  c.seed = 43;
  const auto other = train<float>(make_model<float>(c, corpus), corpus, corpus, c);
  EXPECT_NE(metrics_csv(a.log), metrics_csv(other.log));
}

// Measured on the synthetic protocol: the summed per-sentence training loss
// falls every epoch over the first five.
TEST(Train, SyntheticLossFallsOverFirstFiveEpochs) {
  const auto split = protocol::split();
  auto c = protocol::config();
  c.epochs = 5;
  const auto result = train<float>(make_model<float>(c, split.all), split.train, split.val, c);
  ASSERT_EQ(result.log.size(), 5u);
  for (std::size_t e = 1; e < 5; ++e) {
    EXPECT_LE(result.log[e].ner_loss + result.log[e].re_loss, result.log[e - 1].ner_loss + result.log[e - 1].re_loss)
        << "epoch " << e + 1;
  }
}

TEST(Metrics, CsvLayout) {
  EpochLog row{3, 1.0, 0.5, 0.25, 0.9, 0.8, 85.0};
  EXPECT_EQ(metrics_csv_header(), "epoch,lambda_mean,loss_ner,loss_re,val_entity_f1,val_relation_f1,val_overall\n");
  EXPECT_EQ(metrics_csv_row(row), "3,1.000000,0.500000,0.250000,0.900000,0.800000,85.00\n");
}
