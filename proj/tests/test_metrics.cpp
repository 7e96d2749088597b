#include <gtest/gtest.h>

#include <cmath>

#include "dmtc/metrics.hpp"
#include "dmtc/random.hpp"
#include "oracles.hpp"

using namespace dmtc;
using oracle::Grid;
using oracle::Scores;

namespace {

Grid random_grid(Rng& r, std::size_t n, std::size_t m, double density) {
  Grid g(n, std::vector<int>(m));
  for (auto& row : g)
    for (auto& x : row) x = r.unit() < density ? 1 : 0;
  return g;
}

Scores random_scores(Rng& r, std::size_t n, std::size_t m, bool ties) {
  Scores s(n, std::vector<double>(m));
  for (auto& row : s)
    for (auto& x : row) x = ties ? std::round(r.unit() * 8) / 8 : r.unit();
  return s;
}

bool has_both_classes(const Grid& g) {
  bool one = false, zero = false;
  for (const auto& row : g)
    for (int x : row) (x ? one : zero) = true;
  return one && zero;
}

}  // namespace

TEST(SubsetAccuracy, Examples) {
  const Grid a = {{1, 0, 1}, {0, 1, 0}};
  EXPECT_DOUBLE_EQ(subset_accuracy(oracle::to_matrix(a), oracle::to_matrix(a)), 1.0);
  const Grid b = {{1, 0, 1}, {0, 1, 1}};
  EXPECT_DOUBLE_EQ(subset_accuracy(oracle::to_matrix(b), oracle::to_matrix(a)), 0.5);
  const Grid flipped = {{0, 1, 0}, {1, 0, 1}};
  EXPECT_DOUBLE_EQ(subset_accuracy(oracle::to_matrix(flipped), oracle::to_matrix(a)), 0.0);
}

TEST(HammingLoss, Examples) {
  const Grid t = {{1, 0, 1, 0}}, p = {{1, 1, 0, 0}};
  EXPECT_DOUBLE_EQ(hamming_loss(oracle::to_matrix(p), oracle::to_matrix(t)), 0.5);
  EXPECT_DOUBLE_EQ(hamming_loss(oracle::to_matrix(t), oracle::to_matrix(t)), 0.0);
}

TEST(Jaccard, Examples) {
  const Grid p = {{1, 1, 0}}, t = {{0, 1, 1}};
  EXPECT_DOUBLE_EQ(jaccard(oracle::to_matrix(p), oracle::to_matrix(t)), 1.0 / 3);
  EXPECT_DOUBLE_EQ(jaccard(oracle::to_matrix(t), oracle::to_matrix(t)), 1.0);
  const Grid empty = {{0, 0, 0}};
  EXPECT_DOUBLE_EQ(jaccard(oracle::to_matrix(empty), oracle::to_matrix(empty)), 1.0);
}

TEST(MicroPrf, Examples) {
  MicroCounts c;
  c.tp = 74065990;
  c.fp = 11234010;
  c.fn = 12764010;
  const auto r = prf_from_counts(c);
  EXPECT_NEAR(r.precision, 0.8683, 5e-9);
  EXPECT_NEAR(r.recall, 0.8530, 5e-9);
  EXPECT_NEAR(r.f1, 0.8606, 5e-4);
  EXPECT_NEAR(2 * 0.8683 * 0.8530 / (0.8683 + 0.8530), 0.86058, 1e-5);

  const Grid t = {{1, 0}, {0, 1}};
  const auto same = micro_prf(oracle::to_matrix(t), oracle::to_matrix(t));
  EXPECT_DOUBLE_EQ(same.precision, 1);
  EXPECT_DOUBLE_EQ(same.recall, 1);
  EXPECT_DOUBLE_EQ(same.f1, 1);

  // tp = fp = fn = 1
  const Grid truth = {{1, 1, 0}}, pred = {{1, 0, 1}};
  const auto half = micro_prf(oracle::to_matrix(pred), oracle::to_matrix(truth));
  EXPECT_DOUBLE_EQ(half.precision, 0.5);
  EXPECT_DOUBLE_EQ(half.recall, 0.5);
  EXPECT_DOUBLE_EQ(half.f1, 0.5);
}

TEST(MicroPrf, EmptyDenominatorsAreZero) {
  const Grid zeros = {{0, 0}};
  const auto r = micro_prf(oracle::to_matrix(zeros), oracle::to_matrix(zeros));
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.f1, 0.0);
}

TEST(Mcc, Examples) {
  const Grid t = {{1, 0}, {0, 1}};
  EXPECT_DOUBLE_EQ(mcc(oracle::to_matrix(t), oracle::to_matrix(t)), 1.0);
  const Grid c = {{0, 1}, {1, 0}};
  EXPECT_DOUBLE_EQ(mcc(oracle::to_matrix(c), oracle::to_matrix(t)), -1.0);
  const Grid truth = {{1, 1, 0, 0}}, pred = {{1, 0, 1, 0}};
  EXPECT_DOUBLE_EQ(mcc(oracle::to_matrix(pred), oracle::to_matrix(truth)), 0.0);
}

TEST(Auc, Examples) {
  const Grid t = {{1, 0}, {0, 1}};
  const Scores perfect = {{0.9, 0.2}, {0.1, 0.8}};
  EXPECT_DOUBLE_EQ(auc(oracle::to_matrix(perfect), oracle::to_matrix(t)), 1.0);
  const Scores flat = {{0.3, 0.3}, {0.3, 0.3}};
  EXPECT_DOUBLE_EQ(auc(oracle::to_matrix(flat), oracle::to_matrix(t)), 0.5);
  const Scores mixed = {{0.9, 0.6}, {0.1, 0.4}};
  EXPECT_DOUBLE_EQ(auc(oracle::to_matrix(mixed), oracle::to_matrix(t)), 0.75);
}

TEST(Auc, SingleClassIsDegenerate) {
  const Grid ones = {{1, 1}};
  const Scores s = {{0.2, 0.7}};
  EXPECT_THROW(auc(oracle::to_matrix(s), oracle::to_matrix(ones)), DegenerateError);
}

TEST(Metrics, ShapeMismatchIsRejected) {
  const Grid a = {{1, 0}}, b = {{1, 0, 0}};
  EXPECT_THROW(hamming_loss(oracle::to_matrix(a), oracle::to_matrix(b)), ValidationError);
  EXPECT_THROW(micro_prf(oracle::to_matrix(a), oracle::to_matrix(b)), ValidationError);
}

TEST(Metrics, MatchBruteForceOracle) {
  Rng r(99);
  int cases = 0;
  while (cases < 500) {
    const std::size_t n = 1 + r.index(64), m = 1 + r.index(8);
    const auto truth = random_grid(r, n, m, r.uniform(0.05, 0.6));
    const auto pred = random_grid(r, n, m, r.uniform(0.05, 0.6));
    const auto scores = random_scores(r, n, m, r.index(2) == 0);
    const auto P = oracle::to_matrix(pred), T = oracle::to_matrix(truth);
    EXPECT_NEAR(subset_accuracy(P, T), oracle::subset_accuracy(pred, truth), 1e-12);
    EXPECT_NEAR(hamming_loss(P, T), oracle::hamming_loss(pred, truth), 1e-12);
    EXPECT_NEAR(jaccard(P, T), oracle::jaccard(pred, truth), 1e-12);
    const auto prf = micro_prf(P, T);
    EXPECT_NEAR(prf.precision, oracle::precision(pred, truth), 1e-12);
    EXPECT_NEAR(prf.recall, oracle::recall(pred, truth), 1e-12);
    EXPECT_NEAR(prf.f1, oracle::f1(pred, truth), 1e-12);
    EXPECT_NEAR(mcc(P, T), oracle::mcc(pred, truth), 1e-12);
    if (has_both_classes(truth)) {
      EXPECT_NEAR(auc(oracle::to_matrix(scores), T), oracle::auc(scores, truth), 1e-12);
    }
    ++cases;
  }
}

TEST(Metrics, InvariantUnderRowPermutation) {
  Rng r(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + r.index(40), m = 2 + r.index(6);
    auto truth = random_grid(r, n, m, 0.3);
    truth[0][0] = 1, truth[0][1] = 0;
    auto scores = random_scores(r, n, m, false);
    const auto before = evaluate(oracle::to_matrix(scores), 0.5, oracle::to_matrix(truth));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    r.shuffle(std::span(order));
    Grid t2;
    Scores s2;
    for (auto i : order) t2.push_back(truth[i]), s2.push_back(scores[i]);
    const auto after = evaluate(oracle::to_matrix(s2), 0.5, oracle::to_matrix(t2));
    EXPECT_NEAR(after.subset_accuracy, before.subset_accuracy, 1e-12);
    EXPECT_NEAR(after.hamming_loss, before.hamming_loss, 1e-12);
    EXPECT_NEAR(after.jaccard, before.jaccard, 1e-12);
    EXPECT_NEAR(after.f1, before.f1, 1e-12);
    EXPECT_NEAR(after.mcc, before.mcc, 1e-12);
    EXPECT_NEAR(after.auc, before.auc, 1e-12);
  }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  Rng r(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + r.index(30), m = 1 + r.index(8);
    auto truth = random_grid(r, n, m, 0.4);
    truth[0][0] = 1, truth[1][0] = 0;
    const auto scores = random_scores(r, n, m, trial % 2 == 0);
    Scores warped = scores;
    for (auto& row : warped)
      for (auto& x : row) x = std::exp(3 * x) - 7;  // strictly increasing
    EXPECT_DOUBLE_EQ(auc(oracle::to_matrix(warped), oracle::to_matrix(truth)),
                     auc(oracle::to_matrix(scores), oracle::to_matrix(truth)));
  }
}

TEST(Metrics, Ranges) {
  Rng r(23);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + r.index(20), m = 1 + r.index(6);
    const auto P = oracle::to_matrix(random_grid(r, n, m, 0.5));
    const auto T = oracle::to_matrix(random_grid(r, n, m, 0.5));
    for (double v : {subset_accuracy(P, T), hamming_loss(P, T), jaccard(P, T), micro_prf(P, T).f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_GE(mcc(P, T), -1.0 - 1e-12);
    EXPECT_LE(mcc(P, T), 1.0 + 1e-12);
  }
}

TEST(ThresholdScores, UsesThresholdWithArgmaxFallback) {
  const Scores s = {{0.9, 0.1, 0.6}, {0.2, 0.4, 0.3}, {0.5, 0.5, 0.1}};
  const auto b = threshold_scores(oracle::to_matrix(s), 0.5);
  const Grid want = {{1, 0, 1}, {0, 1, 0}, {1, 0, 0}};
  EXPECT_EQ(b, oracle::to_matrix(want));
}

TEST(Evaluate, PerfectScores) {
  const Grid t = {{1, 0, 0}, {0, 1, 1}, {0, 0, 1}};
  const Scores s = {{0.9, 0.1, 0.2}, {0.1, 0.8, 0.7}, {0.3, 0.2, 0.95}};
  const auto r = evaluate(oracle::to_matrix(s), 0.5, oracle::to_matrix(t));
  EXPECT_DOUBLE_EQ(r.subset_accuracy, 1);
  EXPECT_DOUBLE_EQ(r.hamming_loss, 0);
  EXPECT_DOUBLE_EQ(r.jaccard, 1);
  EXPECT_DOUBLE_EQ(r.f1, 1);
  EXPECT_DOUBLE_EQ(r.precision, 1);
  EXPECT_DOUBLE_EQ(r.recall, 1);
  EXPECT_DOUBLE_EQ(r.mcc, 1);
  EXPECT_DOUBLE_EQ(r.auc, 1);
  EXPECT_EQ(r.sample_count, 3u);
  EXPECT_EQ(r.label_count, 3u);
}

TEST(Evaluate, FieldsEqualStandaloneMetrics) {
  Rng r(64);
  for (int trial = 0; trial < 50; ++trial) {
    auto truth = random_grid(r, 64, 8, 0.25);
    truth[0][0] = 1, truth[0][1] = 0;
    const auto scores = random_scores(r, 64, 8, false);
    const auto S = oracle::to_matrix(scores);
    const auto T = oracle::to_matrix(truth);
    const auto P = threshold_scores(S, 0.5);
    const auto rep = evaluate(S, 0.5, T);
    EXPECT_EQ(rep.subset_accuracy, subset_accuracy(P, T));
    EXPECT_EQ(rep.hamming_loss, hamming_loss(P, T));
    EXPECT_EQ(rep.jaccard, jaccard(P, T));
    const auto prf = micro_prf(P, T);
    EXPECT_EQ(rep.precision, prf.precision);
    EXPECT_EQ(rep.recall, prf.recall);
    EXPECT_EQ(rep.f1, prf.f1);
    EXPECT_EQ(rep.mcc, mcc(P, T));
    EXPECT_EQ(rep.auc, auc(S, T));
  }
}

TEST(Evaluate, MacroAveragingDiffersOnlyInPrf) {
  const Grid t = {{1, 0}, {1, 0}, {1, 0}, {0, 1}};
  const Scores s = {{0.9, 0.1}, {0.8, 0.2}, {0.7, 0.6}, {0.6, 0.4}};
  const auto micro = evaluate(oracle::to_matrix(s), 0.5, oracle::to_matrix(t), Averaging::micro);
  const auto macro = evaluate(oracle::to_matrix(s), 0.5, oracle::to_matrix(t), Averaging::macro);
  EXPECT_EQ(micro.subset_accuracy, macro.subset_accuracy);
  EXPECT_EQ(micro.auc, macro.auc);
  // label 0: tp 3 fp 1 fn 0; label 1: tp 0 fp 1 fn 1
  EXPECT_DOUBLE_EQ(micro.precision, 3.0 / 5);
  EXPECT_DOUBLE_EQ(macro.precision, (0.75 + 0.0) / 2);
  EXPECT_DOUBLE_EQ(macro.recall, (1.0 + 0.0) / 2);
}

TEST(Report, JsonRoundTripAndTable) {
  EvalReport r;
  r.subset_accuracy = 0.9474;
  r.hamming_loss = 0.0066;
  r.jaccard = 0.97;
  r.f1 = 0.8606;
  r.precision = 0.8683;
  r.recall = 0.853;
  r.mcc = 0.9;
  r.auc = 0.9996;
  r.sample_count = 76;
  r.label_count = 8;
  EXPECT_EQ(report_from_json(report_to_json(r)), r);
  EXPECT_EQ(report_from_json(ordered_json::parse(report_to_json_string(r))), r);
  EXPECT_THROW(report_from_json(ordered_json::parse("{\"f1\":1}")), ValidationError);

  const auto table = report_table(r, "DMTC");
  EXPECT_EQ(table,
            "Model\tAccuracy (%)\tHamming Loss (%)\tJaccard Similarity (%)\tF1-Score (%)\tPrecision (%)\t"
            "Recall (%)\tMCC (%)\tAUC (%)\n"
            "DMTC\t94.74\t0.66\t97.00\t86.06\t86.83\t85.30\t90.00\t99.96\n");
}
