#include <gtest/gtest.h>

#include <algorithm>

#include "dgm/metrics.hpp"
#include "dgm/rng.hpp"

using namespace dgm;

namespace {

// Brute-force tally oracle, independent loop structure from confusion().
struct BruteForce {
  std::vector<std::vector<int64_t>> counts;
  int64_t correct = 0;
};

BruteForce brute_force(const std::vector<int>& preds, const std::vector<int>& labels, int k) {
  BruteForce b;
  b.counts.assign(static_cast<size_t>(k), std::vector<int64_t>(static_cast<size_t>(k), 0));
  for (size_t i = 0; i < preds.size(); ++i) {
    b.counts[static_cast<size_t>(labels[i])][static_cast<size_t>(preds[i])]++;
    if (preds[i] == labels[i]) b.correct++;
  }
  return b;
}

}  // namespace

TEST(Confusion, PerfectPredictionsAreDiagonal) {
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 10; ++i) labels.push_back(c);
  ConfusionMatrix cm = confusion(labels, labels, 3);
  for (int t = 0; t < 3; ++t)
    for (int p = 0; p < 3; ++p) EXPECT_EQ(cm.at(t, p), t == p ? 10 : 0);
}

TEST(Confusion, AllPredictedClassZero) {
  std::vector<int> labels{0, 1, 2, 1, 2};
  std::vector<int> preds(5, 0);
  ConfusionMatrix cm = confusion(preds, labels, 3);
  for (int t = 0; t < 3; ++t)
    for (int p = 1; p < 3; ++p) EXPECT_EQ(cm.at(t, p), 0);
  EXPECT_EQ(cm.at(0, 0), 1);
  EXPECT_EQ(cm.at(1, 0), 2);
  EXPECT_EQ(cm.at(2, 0), 2);
}

TEST(Confusion, ErrorCases) {
  EXPECT_THROW(confusion({0, 1}, {0}, 2), Error);
  EXPECT_THROW(confusion({0, 3}, {0, 1}, 3), Error);
}

TEST(Confusion, RandomCasesMatchBruteForce) {
  RngStream rng(77);
  for (int k : {2, 3, 5}) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<int> preds, labels;
      for (int i = 0; i < 50; ++i) {
        preds.push_back(static_cast<int>(rng.next_below(static_cast<uint64_t>(k))));
        labels.push_back(static_cast<int>(rng.next_below(static_cast<uint64_t>(k))));
      }
      ConfusionMatrix cm = confusion(preds, labels, k);
      BruteForce b = brute_force(preds, labels, k);
      for (int t = 0; t < k; ++t)
        for (int p = 0; p < k; ++p)
          EXPECT_EQ(cm.at(t, p), b.counts[static_cast<size_t>(t)][static_cast<size_t>(p)]);
      EXPECT_EQ(correct_count(preds, labels), b.correct);
      MetricReport r = summarize(cm);
      EXPECT_DOUBLE_EQ(r.accuracy,
                       static_cast<double>(b.correct) / static_cast<double>(preds.size()));
    }
  }
}

TEST(Summarize, IdentityMatrixScoresAllOne) {
  ConfusionMatrix cm;
  cm.k = 3;
  cm.counts = {10, 0, 0, 0, 10, 0, 0, 0, 10};
  MetricReport r = summarize(cm);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.precision_macro, 1.0);
  EXPECT_DOUBLE_EQ(r.recall_macro, 1.0);
  EXPECT_DOUBLE_EQ(r.f1_macro, 1.0);
}

TEST(Summarize, ThirtySevenOfFortyIsNinetyTwoPointFive) {
  // The 40-image prediction scenario: 37 correct -> 92.5%.
  ConfusionMatrix cm;
  cm.k = 3;
  cm.counts = {13, 1, 0, 0, 12, 1, 0, 1, 12};
  ASSERT_EQ(cm.trace(), 37);
  ASSERT_EQ(cm.total(), 40);
  MetricReport r = summarize(cm);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.925);
  EXPECT_EQ(format_pct(r.accuracy), "92.5");
  EXPECT_EQ(r.correct, 37);
}

TEST(Summarize, HandComputedAsymmetricCase) {
  // counts: row=true, col=pred
  //   [5 2 1]
  //   [1 6 0]
  //   [0 2 3]
  ConfusionMatrix cm;
  cm.k = 3;
  cm.counts = {5, 2, 1, 1, 6, 0, 0, 2, 3};
  MetricReport r = summarize(cm);
  double p0 = 5.0 / 6.0, p1 = 6.0 / 10.0, p2 = 3.0 / 4.0;
  double r0 = 5.0 / 8.0, r1 = 6.0 / 7.0, r2 = 3.0 / 5.0;
  EXPECT_DOUBLE_EQ(r.accuracy, 14.0 / 20.0);
  EXPECT_DOUBLE_EQ(r.precision_macro, (p0 + p1 + p2) / 3.0);
  EXPECT_DOUBLE_EQ(r.recall_macro, (r0 + r1 + r2) / 3.0);
  double f0 = 2 * p0 * r0 / (p0 + r0), f1 = 2 * p1 * r1 / (p1 + r1), f2 = 2 * p2 * r2 / (p2 + r2);
  EXPECT_DOUBLE_EQ(r.f1_macro, (f0 + f1 + f2) / 3.0);
}

TEST(Summarize, ZeroDenominatorClassContributesZero) {
  // Class 2 never appears and is never predicted.
  ConfusionMatrix cm;
  cm.k = 3;
  cm.counts = {4, 0, 0, 0, 4, 0, 0, 0, 0};
  MetricReport r = summarize(cm);
  EXPECT_DOUBLE_EQ(r.precision_macro, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.recall_macro, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.f1_macro, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);

  ConfusionMatrix empty;
  empty.k = 2;
  empty.counts = {0, 0, 0, 0};
  EXPECT_THROW(summarize(empty), Error);
}

TEST(CorrectCount, Examples) {
  std::vector<int> v(40, 1);
  EXPECT_EQ(correct_count(v, v), 40);
  std::vector<int> a(10, 0), b(10, 1);
  EXPECT_EQ(correct_count(a, b), 0);
  EXPECT_THROW(correct_count({0}, {0, 1}), Error);
}

TEST(Properties, PairPermutationInvariance) {
  RngStream rng(9);
  std::vector<int> preds, labels;
  for (int i = 0; i < 60; ++i) {
    preds.push_back(static_cast<int>(rng.next_below(3)));
    labels.push_back(static_cast<int>(rng.next_below(3)));
  }
  MetricReport before = summarize(confusion(preds, labels, 3));

  std::vector<size_t> order(preds.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<int> preds2, labels2;
  for (size_t i : order) {
    preds2.push_back(preds[i]);
    labels2.push_back(labels[i]);
  }
  MetricReport after = summarize(confusion(preds2, labels2, 3));
  EXPECT_DOUBLE_EQ(before.accuracy, after.accuracy);
  EXPECT_DOUBLE_EQ(before.precision_macro, after.precision_macro);
  EXPECT_DOUBLE_EQ(before.recall_macro, after.recall_macro);
  EXPECT_DOUBLE_EQ(before.f1_macro, after.f1_macro);
}

TEST(Properties, ClassRelabelingPermutesMatrixAndKeepsMacros) {
  RngStream rng(10);
  std::vector<int> preds, labels;
  for (int i = 0; i < 60; ++i) {
    preds.push_back(static_cast<int>(rng.next_below(3)));
    labels.push_back(static_cast<int>(rng.next_below(3)));
  }
  ConfusionMatrix cm = confusion(preds, labels, 3);

  std::vector<int> pi{2, 0, 1};
  std::vector<int> preds_r, labels_r;
  for (size_t i = 0; i < preds.size(); ++i) {
    preds_r.push_back(pi[static_cast<size_t>(preds[i])]);
    labels_r.push_back(pi[static_cast<size_t>(labels[i])]);
  }
  ConfusionMatrix cm_r = confusion(preds_r, labels_r, 3);
  for (int t = 0; t < 3; ++t)
    for (int p = 0; p < 3; ++p)
      EXPECT_EQ(cm.at(t, p), cm_r.at(pi[static_cast<size_t>(t)], pi[static_cast<size_t>(p)]));

  MetricReport a = summarize(cm), b = summarize(cm_r);
  EXPECT_DOUBLE_EQ(a.precision_macro, b.precision_macro);
  EXPECT_DOUBLE_EQ(a.recall_macro, b.recall_macro);
  EXPECT_DOUBLE_EQ(a.f1_macro, b.f1_macro);
  EXPECT_DOUBLE_EQ(a.accuracy, b.accuracy);
}

TEST(Properties, F1Bounds) {
  RngStream rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> preds, labels;
    for (int i = 0; i < 30; ++i) {
      preds.push_back(static_cast<int>(rng.next_below(4)));
      labels.push_back(static_cast<int>(rng.next_below(4)));
    }
    MetricReport r = summarize(confusion(preds, labels, 4));
    EXPECT_GE(r.f1_macro, 0.0);
    EXPECT_LE(r.f1_macro, 1.0);
    EXPECT_GE(r.accuracy, 0.0);
    EXPECT_LE(r.accuracy, 1.0);
  }
}
