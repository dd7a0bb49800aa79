#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "code_of.hpp"
#include "fixtures.hpp"
#include "fusionkit/error.hpp"
#include "fusionkit/metrics.hpp"
#include "fusionkit/scan.hpp"
#include "fusionkit/synth.hpp"
#include "oracle.hpp"

using namespace fusionkit;
using fixtures::code_of;

namespace {

struct Synth {
  std::vector<ClassProto> protos;
  EvalSet evalset;
};

Synth from_spec(const SynthSpec& spec) {
  const auto store = synth_records(spec);
  std::vector<std::vector<Embedding>> t(store.manifest.classes.size());
  std::vector<std::vector<Embedding>> i(store.manifest.classes.size());
  Synth s;
  for (const auto& r : store.records) {
    const auto c = static_cast<std::size_t>(r.class_index);
    if (r.role == Role::kClassText) t[c].push_back(r.embedding);
    else if (r.role == Role::kClassImage) i[c].push_back(r.embedding);
    else s.evalset.push_back({r.id, r.embedding, r.class_index});
  }
  for (std::size_t c = 0; c < t.size(); ++c) {
    s.protos.push_back(make_class_proto(static_cast<int>(c), t[c], i[c]));
  }
  return s;
}

}  // namespace

TEST(Grid, HundredAndOneInclusivePoints) {
  const auto grid = weight_grid();
  ASSERT_EQ(grid.size(), 101u);
  EXPECT_EQ(grid.front(), 0.0);
  EXPECT_EQ(grid.back(), 1.0);
  EXPECT_EQ(grid[10], 0.1);
  EXPECT_EQ(grid[50], 0.5);
  EXPECT_TRUE(std::is_sorted(grid.begin(), grid.end()));
  for (std::size_t k = 1; k < grid.size(); ++k) EXPECT_NEAR(grid[k] - grid[k - 1], 0.01, 1e-15);
}

TEST(Scan, PerfectTextPlateauPicksSmallestW) {
  // Text rows equal the queries' classes; images point at the wrong class.
  std::vector<ClassProto> protos{
      make_class_proto(0, {Embedding({1.0f, 0.0f})}, {Embedding({0.0f, 1.0f})}),
      make_class_proto(1, {Embedding({0.0f, 1.0f})}, {Embedding({1.0f, 0.0f})})};
  const EvalSet evalset{{"a", fixtures::unit({1.0, 0.2}), 0}, {"b", fixtures::unit({0.3, 1.0}), 1}};
  const auto r = scan_weights(evalset, protos, FusionMode::kStandard, Metric::kTop1);
  EXPECT_EQ(r.best_accuracy, 1.0);
  EXPECT_EQ(r.accuracy_at.back(), 1.0);
  // Accuracy is 1 exactly where w t.q + (1 - w) i.q favours the right class.
  std::size_t first = 0;
  while (r.accuracy_at[first] < 1.0) ++first;
  EXPECT_EQ(r.best_index, first);
  EXPECT_EQ(r.best_w, r.grid[first]);
  EXPECT_GT(r.best_w, 0.5);
}

TEST(Scan, OnlyLowWeightsClassifyCorrectly) {
  // One query q = e1. Class 0: t0 = e2, i0 = e1. Class 1: t1 = e1, i1 = e2.
  // s0 = 1 - w, s1 = w, so the query is right for w < 0.5 and at the tie
  // w = 0.5, which goes to the lower index.
  std::vector<ClassProto> protos{
      make_class_proto(0, {Embedding({0.0f, 1.0f})}, {Embedding({1.0f, 0.0f})}),
      make_class_proto(1, {Embedding({1.0f, 0.0f})}, {Embedding({0.0f, 1.0f})})};
  const EvalSet evalset{{"q", Embedding({1.0f, 0.0f}), 0}};
  const auto r = scan_weights(evalset, protos, FusionMode::kStandard, Metric::kTop1);
  EXPECT_EQ(r.best_accuracy, 1.0);
  EXPECT_LT(r.best_w, 0.5);
  for (std::size_t k = 0; k < 101; ++k) EXPECT_EQ(r.accuracy_at[k], k <= 50 ? 1.0 : 0.0);
}

TEST(Scan, CurveMatchesIndependentReruns) {
  SynthSpec spec;
  spec.text_bias = 0.35;
  spec.image_bias = 0.3;
  spec.query_noise = 1.5;
  spec.seed = 17;
  const auto s = from_spec(spec);
  const auto lp = oracle::lprotos(s.protos);
  for (auto mode : {FusionMode::kStandard, FusionMode::kConfidence}) {
    const auto r = scan_weights(s.evalset, s.protos, mode, Metric::kTop1);
    for (std::size_t k = 0; k < 101; ++k) {
      std::size_t correct = 0;
      for (const auto& q : s.evalset) {
        const auto sc = oracle::scores(lp, oracle::to_l(q.embedding), mode,
                                       static_cast<long double>(k) / 100.0L);
        correct += oracle::argmax(sc) == q.label;
      }
      EXPECT_EQ(r.accuracy_at[k], static_cast<double>(correct) / s.evalset.size()) << "k=" << k;
    }
  }
}

TEST(Scan, EndpointsEqualBaselines) {
  SynthSpec spec;
  spec.text_bias = 0.3;
  spec.image_bias = 0.4;
  spec.query_noise = 2.0;
  const auto s = from_spec(spec);
  for (auto metric : {Metric::kTop1, Metric::kMeanPerClass}) {
    const auto r = scan_weights(s.evalset, s.protos, FusionMode::kStandard, metric);
    EXPECT_EQ(r.accuracy_at[0],
              evaluate_fixed(s.evalset, s.protos, FusionMode::kImageOnly, 0.0, metric));
    EXPECT_EQ(r.accuracy_at[100],
              evaluate_fixed(s.evalset, s.protos, FusionMode::kTextOnly, 1.0, metric));
    for (std::size_t k : {0u, 10u, 33u, 50u, 99u, 100u}) {
      EXPECT_EQ(r.accuracy_at[k], evaluate_fixed(s.evalset, s.protos, FusionMode::kStandard,
                                                 grid_weight(k), metric));
    }
    EXPECT_EQ(r.accuracy_at[10],
              evaluate_fixed(s.evalset, s.protos, FusionMode::kStandard, 0.1, metric));
  }
}

TEST(Scan, OrderAndThreadInvariant) {
  SynthSpec spec;
  spec.text_bias = 0.3;
  spec.image_bias = 0.3;
  spec.query_noise = 2.0;
  spec.queries_per_class = 40;
  auto s = from_spec(spec);
  const auto ref = scan_weights(s.evalset, s.protos, FusionMode::kConfidence, Metric::kMeanPerClass, 1);
  std::mt19937_64 rng(1);
  std::shuffle(s.evalset.begin(), s.evalset.end(), rng);
  for (unsigned t : {1u, 2u, 5u}) {
    const auto r = scan_weights(s.evalset, s.protos, FusionMode::kConfidence, Metric::kMeanPerClass, t);
    EXPECT_EQ(r.accuracy_at, ref.accuracy_at);
    EXPECT_EQ(r.best_w, ref.best_w);
  }
}

TEST(Scan, SwappingModalitiesMirrorsTheCurve) {
  SynthSpec spec;
  spec.text_bias = 0.4;
  spec.image_bias = 0.4;
  spec.query_noise = 1.8;
  spec.seed = 5;
  const auto s = from_spec(spec);
  std::vector<ClassProto> swapped;
  for (const auto& p : s.protos) {
    swapped.push_back(make_class_proto(p.class_index, p.image_embeddings, p.text_embeddings));
  }
  const auto a = scan_weights(s.evalset, s.protos, FusionMode::kStandard, Metric::kTop1);
  const auto b = scan_weights(s.evalset, swapped, FusionMode::kStandard, Metric::kTop1);
  // Weight w on (t, i) is weight 1 - w on (i, t).
  for (std::size_t k = 0; k <= 100; ++k) EXPECT_EQ(a.accuracy_at[k], b.accuracy_at[100 - k]);
}

TEST(Scan, IdenticalModalitiesGiveFlatCurve) {
  SynthSpec spec;
  spec.query_noise = 2.0;
  const auto s = from_spec(spec);
  std::vector<ClassProto> same;
  for (const auto& p : s.protos) {
    same.push_back(make_class_proto(p.class_index, p.text_embeddings, p.text_embeddings));
  }
  const auto r = scan_weights(s.evalset, same, FusionMode::kStandard, Metric::kTop1);
  for (double a : r.accuracy_at) EXPECT_EQ(a, r.accuracy_at[50]);
  EXPECT_EQ(r.best_w, 0.0);
  EXPECT_EQ(r.accuracy_at[50], r.best_accuracy);
}

TEST(Scan, Errors) {
  std::vector<ClassProto> protos{make_class_proto(0, {Embedding({1.0f})}, {Embedding({1.0f})}),
                                 make_class_proto(1, {Embedding({1.0f})}, {Embedding({1.0f})})};
  EXPECT_EQ(code_of([&] { scan_weights({}, protos, FusionMode::kStandard, Metric::kTop1); }),
            ErrorCode::kEmptyEvalSet);
  const EvalSet one{{"q", Embedding({1.0f}), 0}};
  EXPECT_EQ(code_of([&] { scan_weights(one, protos, FusionMode::kTextOnly, Metric::kTop1); }),
            ErrorCode::kInvalidArgument);
  const EvalSet bad_label{{"q", Embedding({1.0f}), 5}};
  EXPECT_EQ(code_of([&] { scan_weights(bad_label, protos, FusionMode::kStandard, Metric::kTop1); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { evaluate_fixed(one, protos, FusionMode::kStandard, 1.01, Metric::kTop1); }),
            ErrorCode::kWeightOutOfRange);
}

TEST(Top1, Examples) {
  const std::vector<int> labels{0, 0, 1};
  EXPECT_EQ(top1(labels, labels), 1.0);
  const std::vector<int> pred{0, 1, 1};
  EXPECT_DOUBLE_EQ(top1(pred, labels), 2.0 / 3.0);
  EXPECT_EQ(code_of([] { top1({}, {}); }), ErrorCode::kEmptyInput);
  const std::vector<int> short_pred{0};
  EXPECT_EQ(code_of([&] { top1(short_pred, labels); }), ErrorCode::kLengthMismatch);
}

TEST(MeanPerClass, HandCountedPair) {
  // Class 0: 1 of 10 right, class 1: 10 of 10 right.
  std::vector<int> labels(10, 0), pred(10, 1);
  pred[0] = 0;
  labels.insert(labels.end(), 10, 1);
  pred.insert(pred.end(), 10, 1);
  EXPECT_EQ(mean_per_class(pred, labels, 2), 0.55);
  EXPECT_EQ(top1(pred, labels), 11.0 / 20.0);
  EXPECT_EQ(metric_value(Metric::kMeanPerClass, pred, labels, 2), 0.55);
  const auto pairs = top_confused_pairs(pred, labels, 10);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0], (ConfusionPair{0, 1, 9, std::nullopt}));
}

TEST(MeanPerClass, BalancedPerfectEqualsTop1) {
  const std::vector<int> labels{0, 1, 2, 0, 1, 2};
  EXPECT_EQ(mean_per_class(labels, labels, 3), 1.0);
  EXPECT_EQ(mean_per_class(labels, labels, 3), top1(labels, labels));
}

TEST(MeanPerClass, ZeroSupportClassesExcluded) {
  const std::vector<int> labels{0, 0, 2};
  const std::vector<int> pred{0, 1, 2};
  EXPECT_EQ(mean_per_class(pred, labels, 4), (0.5 + 1.0) / 2.0);
  const auto table = per_class_table(pred, labels, 4);
  EXPECT_EQ(table.excluded_classes, (std::vector<int>{1, 3}));
  EXPECT_FALSE(table.per_class_accuracy.contains(1));
}

TEST(MeanPerClass, InvariantToRebalancingThatKeepsRecalls) {
  const std::vector<int> labels{0, 0, 1, 1, 1, 1};
  const std::vector<int> pred{0, 1, 1, 1, 0, 0};
  std::vector<int> l2, p2;
  for (int rep = 0; rep < 3; ++rep) {
    l2.insert(l2.end(), labels.begin(), labels.begin() + 2);
    p2.insert(p2.end(), pred.begin(), pred.begin() + 2);
  }
  l2.insert(l2.end(), labels.begin() + 2, labels.end());
  p2.insert(p2.end(), pred.begin() + 2, pred.end());
  EXPECT_EQ(mean_per_class(pred, labels, 2), mean_per_class(p2, l2, 2));
}

TEST(PerClassTable, SevenColumnShapeAndOrderInvariance) {
  std::mt19937_64 rng(4);
  std::vector<int> labels, pred;
  for (int k = 0; k < 140; ++k) {
    labels.push_back(k % 7);
    pred.push_back(static_cast<int>(rng() % 7));
  }
  const auto table = per_class_table(pred, labels, 7);
  EXPECT_EQ(table.per_class_accuracy.size(), 7u);
  std::size_t total = 0;
  for (const auto& [c, n] : table.support) total += n;
  EXPECT_EQ(total, labels.size());

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> l2, p2;
  for (auto i : order) {
    l2.push_back(labels[i]);
    p2.push_back(pred[i]);
  }
  const auto shuffled = per_class_table(p2, l2, 7);
  EXPECT_EQ(shuffled.per_class_accuracy, table.per_class_accuracy);
  EXPECT_EQ(shuffled.support, table.support);
}

TEST(PerClassTable, SingleClass) {
  const std::vector<int> labels{0, 0};
  const std::vector<int> pred{0, 0};
  const auto table = per_class_table(pred, labels, 1);
  EXPECT_EQ(table.per_class_accuracy.size(), 1u);
  EXPECT_EQ(table.per_class_accuracy.at(0), 1.0);
}

TEST(ConfusedPairs, SortingAndTotals) {
  const std::vector<int> labels{0, 0, 1, 1, 2, 2, 2, 3};
  const std::vector<int> pred{1, 1, 0, 0, 0, 1, 2, 0};
  const auto pairs = top_confused_pairs(pred, labels, 10);
  ASSERT_EQ(pairs.size(), 5u);
  EXPECT_EQ(pairs[0], (ConfusionPair{0, 1, 2, std::nullopt}));
  EXPECT_EQ(pairs[1], (ConfusionPair{1, 0, 2, std::nullopt}));
  EXPECT_EQ(pairs[2], (ConfusionPair{2, 0, 1, std::nullopt}));
  EXPECT_EQ(pairs[3], (ConfusionPair{2, 1, 1, std::nullopt}));
  EXPECT_EQ(pairs[4], (ConfusionPair{3, 0, 1, std::nullopt}));
  std::size_t sum = 0;
  for (const auto& p : pairs) sum += p.count;
  EXPECT_EQ(sum, 7u);
  EXPECT_EQ(top_confused_pairs(pred, labels, 2).size(), 2u);
  EXPECT_TRUE(top_confused_pairs(labels, labels, 3).empty());
  EXPECT_EQ(code_of([&] { top_confused_pairs(pred, labels, 0); }), ErrorCode::kInvalidArgument);
}

TEST(PairSubset, CentroidsEqualQueries) {
  std::vector<ClassProto> protos{
      make_class_proto(0, {Embedding({1.0f, 0.0f, 0.0f})}, {Embedding({1.0f, 0.0f, 0.0f})}),
      make_class_proto(1, {Embedding({0.0f, 1.0f, 0.0f})}, {Embedding({0.0f, 1.0f, 0.0f})}),
      make_class_proto(2, {Embedding({0.0f, 0.0f, 1.0f})}, {Embedding({0.0f, 0.0f, 1.0f})})};
  const EvalSet evalset{{"a", Embedding({1.0f, 0.0f, 0.0f}), 0},
                        {"c", Embedding({0.0f, 0.0f, 1.0f}), 2}};
  const auto acc = pair_subset_eval(evalset, protos, {FusionMode::kStandard, 0.5}, 0, 2);
  EXPECT_EQ(acc, std::pair(1.0, 1.0));
  EXPECT_EQ(code_of([&] { pair_subset_eval(evalset, protos, {}, 1, 1); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { pair_subset_eval(evalset, protos, {}, 0, 1); }), ErrorCode::kEmptySubset);
}

TEST(PairSubset, BiasedTextIsOffsetByImages) {
  const auto f = fixtures::bias_fixture();
  const auto text = pair_subset_eval(f.evalset, f.protos, {FusionMode::kTextOnly, 1.0}, 0, 1);
  EXPECT_EQ(text, std::pair(0.1, 1.0));
  bool found = false;
  for (std::size_t k = 0; k <= 100; ++k) {
    const auto acc = pair_subset_eval(f.evalset, f.protos, {FusionMode::kStandard, grid_weight(k)}, 0, 1);
    if (acc.first >= 0.5 && acc.second >= 0.5 && acc.first + acc.second > 1.1) found = true;
  }
  EXPECT_TRUE(found);
}
