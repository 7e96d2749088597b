#include <gtest/gtest.h>

#include <cmath>
#include <regex>

#include "dmtc/artifact.hpp"
#include "dmtc/datagen.hpp"
#include "dmtc/pipeline.hpp"
#include "dmtc/trainer.hpp"
#include "support.hpp"

using namespace dmtc;
using testing_support::TempDir;

namespace {

// Small toy corpus: 8 classes, 12 singles each plus 16 pair combos.
struct Toy {
  Dataset ds;
  std::vector<EmbeddedSample> samples;
  ProviderConfig provider;
};

const Toy& toy() {
  static const Toy t = [] {
    Toy t;
    const auto vocab = maritime_taxonomy();
    t.ds = offline_generate(vocab, 12, pair_combos(vocab.size(), 16, 3), 3);
    t.provider.dim = 64;
    t.provider.seed = 1;
    t.samples = attach_embeddings(embed_dataset(t.ds, ToyProvider(64, 1)), t.ds);
    return t;
  }();
  return t;
}

TrainConfig small_config() {
  TrainConfig c;
  c.d_hidden = 32;
  c.d_proj = 32;
  c.epochs_pretrain = 5;
  c.epochs_finetune = 10;
  c.batch_size = 16;
  c.seed = 9;
  return c;
}

ModelArtifact trained(const TrainConfig& c) {
  return train_model(toy().samples, c, toy().ds.vocabulary, toy().provider).artifact;
}

EmbeddingVector random_unit(Rng& r, std::size_t d) {
  std::vector<double> v(d);
  for (auto& x : v) x = r.uniform(-1, 1);
  return l2_normalize(v);
}

}  // namespace

// ---- heads

TEST(Sigmoid, Examples) {
  Vector z(2);
  z << 1.0, 0.0;
  ClassifierHead h{Matrix::Zero(2, 2), Vector::Zero(2)};
  h.b << 0.0, std::log(3.0);
  const Vector p = classify(z, h);
  EXPECT_DOUBLE_EQ(p(0), 0.5);
  EXPECT_NEAR(p(1), 0.75, 1e-15);

  ClassifierHead zero{Matrix::Zero(2, 3), Vector::Zero(3)};
  const Vector half = classify(z, zero);
  for (int j = 0; j < 3; ++j) EXPECT_EQ(half(j), 0.5);

  double prev = 0;
  for (double x = -50; x <= 50; x += 0.5) {
    const double s = sigmoid(x);
    EXPECT_GE(s, prev);
    EXPECT_TRUE(std::isfinite(s));
    prev = s;
  }
  EXPECT_EQ(sigmoid(1000), 1.0);
  EXPECT_EQ(sigmoid(-1000), 0.0);
}

TEST(Bce, Examples) {
  Matrix y(1, 2), p(1, 2);
  y << 1, 0;
  p << 0.9, 0.2;
  EXPECT_NEAR(bce_loss(p, y).value, (-std::log(0.9) - std::log(0.8)) / 2, 1e-12);
  EXPECT_NEAR(bce_loss(p, y).value, 0.164252, 1e-6);
  EXPECT_NEAR(bce_loss(y, y).value, 0.0, 1e-9);
  const Matrix half = Matrix::Constant(3, 4, 0.5);
  EXPECT_NEAR(bce_loss(half, Matrix::Ones(3, 4)).value, std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(half, Matrix::Zero(3, 4)).value, 0.693147, 1e-6);
  EXPECT_THROW(bce_loss(half, Matrix::Zero(3, 3)), ValidationError);
}

TEST(Bce, GradientMatchesFiniteDifferences) {
  Rng r(2);
  Matrix y(3, 4), p(3, 4);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    y.data()[i] = static_cast<double>(r.index(2));
    p.data()[i] = r.uniform(0.05, 0.95);
  }
  const auto out = bce_loss(p, y);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    Matrix hi = p, lo = p;
    hi.data()[i] += 1e-6;
    lo.data()[i] -= 1e-6;
    EXPECT_NEAR(out.d_probs.data()[i], (bce_loss(hi, y).value - bce_loss(lo, y).value) / 2e-6, 1e-6);
  }
}

TEST(Projection, DeterministicUnitNorm) {
  const auto head = init_projection(16, 8, 4, 3);
  EXPECT_EQ(head, init_projection(16, 8, 4, 3));
  EXPECT_FALSE(head == init_projection(16, 8, 4, 4));
  Rng r(1);
  const auto x = random_unit(r, 16);
  const Vector a = project(x.view(), head), b = project(x.view(), head);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(a.norm(), 1.0, 1e-12);
  const std::vector<double> wrong(5, 0.1);
  EXPECT_THROW(project(wrong, head), ValidationError);
}

TEST(Projection, ZeroOutputIsDegenerate) {
  auto head = init_projection(4, 3, 2, 1);
  head.w2.setZero();
  head.b2.setZero();
  const std::vector<double> x = {0.5, 0.5, 0.5, 0.5};
  EXPECT_THROW(project(x, head), DegenerateError);
}

TEST(DecideLabels, ThresholdAndFallback) {
  const std::vector<double> a = {0.9, 0.1, 0.6};
  EXPECT_EQ(decide_labels(a, 0.5), (LabelSet{0, 2}));
  const std::vector<double> b = {0.2, 0.4, 0.3};
  EXPECT_EQ(decide_labels(b, 0.5), LabelSet{1});
  EXPECT_EQ(decide_labels(a, 0.999), LabelSet{0});
  const std::vector<double> tie = {0.3, 0.3};
  EXPECT_EQ(decide_labels(tie, 0.5), LabelSet{0});
  const std::vector<double> at = {0.5, 0.2};
  EXPECT_EQ(decide_labels(at, 0.5), LabelSet{0});  // strict threshold, then fallback
}

TEST(DecideLabels, NeverEmpty) {
  Rng r(3);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> p(1 + r.index(10));
    for (auto& x : p) x = r.unit();
    EXPECT_FALSE(decide_labels(p, r.uniform(0.01, 0.999)).empty());
  }
}

// ---- gradient checks

TEST(GradCheck, AllComponentsPass) {
  for (auto c : {GradComponent::projection_ofc, GradComponent::projection_oc, GradComponent::projection_cs,
                 GradComponent::classifier_bce}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      GradCheckOptions o;
      o.seed = seed;
      const auto rep = grad_check(c, o);
      EXPECT_TRUE(rep.passed) << "component " << static_cast<int>(c) << " seed " << seed << " err "
                              << rep.max_relative_error;
      EXPECT_LE(rep.max_relative_error, 1e-4);
      EXPECT_GT(rep.checked, 0u);
    }
  }
}

TEST(GradCheck, DetectsPerturbedGradient) {
  for (auto c : {GradComponent::projection_ofc, GradComponent::classifier_bce}) {
    GradCheckOptions o;
    o.analytic_perturbation = 1e-2;
    const auto rep = grad_check(c, o);
    EXPECT_FALSE(rep.passed);
    EXPECT_GT(rep.max_relative_error, 1e-4);
  }
}

TEST(ClipGlobalNorm, ScalesOnlyAboveCap) {
  auto g = init_projection(4, 3, 2, 1);
  auto c = init_classifier(2, 3, 1);
  const double before = std::sqrt(detail::squared_norm(g) + detail::squared_norm(c));
  auto g2 = g;
  auto c2 = c;
  detail::clip_global_norm(before * 2, g2, c2);
  EXPECT_EQ(g2, g);
  EXPECT_EQ(c2, c);
  detail::clip_global_norm(0.5, g2, c2);
  EXPECT_NEAR(std::sqrt(detail::squared_norm(g2) + detail::squared_norm(c2)), 0.5, 1e-12);
  EXPECT_NEAR(g2.w1(0, 0) / g.w1(0, 0), 0.5 / before, 1e-12);
  auto g3 = g;
  detail::clip_global_norm(0.0, g3);  // disabled
  EXPECT_EQ(g3, g);
}

// ---- training

TEST(Pretrain, ZeroEpochsReturnsInitialHead) {
  auto c = small_config();
  c.epochs_pretrain = 0;
  const auto r = pretrain(toy().samples, c);
  EXPECT_EQ(r.head, init_projection(64, 32, 32, c.seed));
  EXPECT_TRUE(r.epoch_losses.empty());
}

TEST(Pretrain, RejectsSingleLabelSet) {
  std::vector<EmbeddedSample> same(toy().samples.begin(), toy().samples.begin() + 5);
  for (auto& s : same) s.labels = LabelSet{0};
  EXPECT_THROW(pretrain(same, small_config()), ValidationError);
}

TEST(Pretrain, LossDoesNotIncreaseAndIsDeterministic) {
  auto c = small_config();
  c.epochs_pretrain = 30;
  for (auto kind : {LossKind::ofc, LossKind::oc, LossKind::cs}) {
    c.loss_kind = kind;
    const auto a = pretrain(toy().samples, c);
    ASSERT_EQ(a.epoch_losses.size(), 30u);
    EXPECT_LE(a.epoch_losses.back(), a.epoch_losses.front()) << "loss kind " << static_cast<int>(kind);
    const auto b = pretrain(toy().samples, c);
    EXPECT_EQ(a.head, b.head);
    EXPECT_EQ(a.epoch_losses, b.epoch_losses);
  }
}

TEST(Pretrain, WidensMarginGap) {
  auto c = small_config();
  c.epochs_pretrain = 30;
  const auto r = pretrain(toy().samples, c);
  const auto init = init_projection(64, 32, 32, c.seed);
  EXPECT_GT(margin_gap(r.head, toy().samples), margin_gap(init, toy().samples) + 0.05);
}

TEST(Finetune, ZeroEpochsKeepsInitialClassifier) {
  auto c = small_config();
  c.epochs_finetune = 0;
  const auto proj = init_projection(64, 32, 32, 5);
  const auto r = finetune(toy().samples, proj, c, toy().ds.vocabulary, toy().provider);
  EXPECT_EQ(r.artifact.classifier, init_classifier(32, 8, c.seed));
  EXPECT_EQ(r.artifact.projection, proj);
}

TEST(Finetune, BceMostlyDecreases) {
  auto c = small_config();
  c.epochs_pretrain = 30;
  c.epochs_finetune = 50;
  const auto r = train_model(toy().samples, c, toy().ds.vocabulary, toy().provider);
  ASSERT_EQ(r.finetune_losses.size(), 50u);
  int down = 0;
  for (std::size_t e = 1; e < r.finetune_losses.size(); ++e) down += r.finetune_losses[e] < r.finetune_losses[e - 1];
  EXPECT_GE(down, static_cast<int>(0.8 * 49)) << "decreasing steps " << down;
  EXPECT_LT(r.finetune_losses.back(), 0.5 * r.finetune_losses.front());
}

TEST(Finetune, RejectsMismatchedInputs) {
  const auto c = small_config();
  const auto proj = init_projection(32, 8, 8, 1);
  EXPECT_THROW(finetune(toy().samples, proj, c, toy().ds.vocabulary, toy().provider), ValidationError);
  EXPECT_THROW(finetune({}, init_projection(64, 8, 8, 1), c, toy().ds.vocabulary, toy().provider),
               ValidationError);
}

TEST(TrainModel, BitIdenticalArtifacts) {
  const auto c = small_config();
  const auto a = artifact_to_json_string(trained(c));
  EXPECT_EQ(a, artifact_to_json_string(trained(c)));
  auto other = c;
  other.seed = 10;
  EXPECT_NE(a, artifact_to_json_string(trained(other)));
}

TEST(TrainConfig, ValidationAndJson) {
  auto bad = [](auto edit) {
    TrainConfig c;
    edit(c);
    return c;
  };
  EXPECT_THROW(bad([](TrainConfig& c) { c.lr_pretrain = 0; }).validate(), ValidationError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.momentum = 1; }).validate(), ValidationError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.batch_size = 1; }).validate(), ValidationError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.decision_threshold = 1; }).validate(), ValidationError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.grad_clip_norm = -1; }).validate(), ValidationError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.mining.p = 101; }).validate(), ValidationError);

  TrainConfig c = small_config();
  c.loss_kind = LossKind::cs;
  c.mining.mode = MiningMode::standard;
  c.ofc.gamma = 1.5;
  ordered_json j = c;
  const auto back = j.get<TrainConfig>();
  ordered_json again = back;
  EXPECT_EQ(j.dump(), again.dump());
  const auto partial = ordered_json::parse(R"({"epochs_pretrain": 3})").get<TrainConfig>();
  EXPECT_EQ(partial.epochs_pretrain, 3u);
  EXPECT_EQ(partial.batch_size, TrainConfig{}.batch_size);
}

// ---- artifact

TEST(Artifact, RoundTripPreservesPredictions) {
  TempDir dir;
  const auto a = trained(small_config());
  save_artifact(a, dir.file("m.json"));
  const auto b = load_artifact(dir.file("m.json"));
  EXPECT_EQ(artifact_to_json_string(a), artifact_to_json_string(b));
  EXPECT_EQ(model_version(a), model_version(b));
  Rng r(8);
  for (int i = 0; i < 100; ++i) {
    const auto x = random_unit(r, 64);
    const auto pa = predict(x, a), pb = predict(x, b);
    EXPECT_EQ(pa.labels, pb.labels);
    EXPECT_EQ(pa.scores, pb.scores);
  }
}

TEST(Artifact, UnknownVersionAndTruncation) {
  const auto text = artifact_to_json_string(trained(small_config()));
  auto j = ordered_json::parse(text);
  j["format_version"] = 999;
  try {
    artifact_from_json_string(j.dump());
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("999"), std::string::npos) << e.what();
  }
  try {
    artifact_from_json_string(text.substr(0, text.size() / 2));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("malformed"), std::string::npos) << e.what();
  }
  auto missing = ordered_json::parse(text);
  missing.erase("classifier");
  EXPECT_THROW(artifact_from_json_string(missing.dump()), ValidationError);
  EXPECT_THROW(load_artifact("/nonexistent/m.json"), IoError);
}

TEST(Artifact, InconsistentDimsRejected) {
  auto a = trained(small_config());
  a.embed_dim = 32;
  EXPECT_THROW(a.validate(), ValidationError);
  auto b = trained(small_config());
  b.classifier.w.conservativeResize(b.classifier.w.rows(), 7);
  b.classifier.b.conservativeResize(7);
  EXPECT_THROW(artifact_from_json_string(artifact_to_json_string(b)), ValidationError);
}

TEST(Artifact, ModelVersionFormat) {
  const auto v = model_version(trained(small_config()));
  EXPECT_TRUE(std::regex_match(v, std::regex("v1-[0-9a-f]{16}"))) << v;
}

TEST(Predict, RejectsWrongDim) {
  const auto a = trained(small_config());
  Rng r(1);
  EXPECT_THROW(predict(random_unit(r, 32), a), ValidationError);
}
