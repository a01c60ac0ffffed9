#include "fairflow/audit.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "fairflow/errors.hpp"
#include "fairflow/prng.hpp"

namespace fairflow {
namespace {

// ---------------------------------------------------------------------------
// A deliberately naive per-row recount oracle, independent of the library's
// counting path. Everything below is re-derived from first principles.

struct OracleData {
  std::vector<std::int32_t> decisions, labels;
  std::vector<std::string> groups;
};

std::map<std::string, ConfusionCounts> oracle_counts(const OracleData& d) {
  std::map<std::string, ConfusionCounts> out;
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    ConfusionCounts& c = out[d.groups[i]];
    if (d.labels[i] == 1 && d.decisions[i] == 1) c.tp++;
    if (d.labels[i] == 0 && d.decisions[i] == 1) c.fp++;
    if (d.labels[i] == 0 && d.decisions[i] == 0) c.tn++;
    if (d.labels[i] == 1 && d.decisions[i] == 0) c.fn++;
  }
  return out;
}

Rate oracle_rate(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::map<std::string, Rate> oracle_metric(const std::map<std::string, ConfusionCounts>& counts,
                                          const std::string& name) {
  std::map<std::string, Rate> out;
  for (const auto& [g, c] : counts) {
    if (name == "tpr") out[g] = oracle_rate(c.tp, c.tp + c.fn);
    else if (name == "fpr") out[g] = oracle_rate(c.fp, c.fp + c.tn);
    else if (name == "fnr") out[g] = oracle_rate(c.fn, c.tp + c.fn);
    else if (name == "tnr") out[g] = oracle_rate(c.tn, c.fp + c.tn);
    else if (name == "precision") out[g] = oracle_rate(c.tp, c.tp + c.fp);
    else if (name == "fdr") out[g] = oracle_rate(c.fp, c.tp + c.fp);
    else if (name == "for") out[g] = oracle_rate(c.fn, c.fn + c.tn);
    else if (name == "npv") out[g] = oracle_rate(c.tn, c.fn + c.tn);
    else if (name == "ppr") out[g] = oracle_rate(c.tp + c.fp, c.total());
    else if (name == "prevalence") out[g] = oracle_rate(c.tp + c.fn, c.total());
  }
  return out;
}

OracleData random_data(Xoshiro256& rng) {
  OracleData d;
  const std::size_t n = 2 + rng.next_below(199);
  const std::size_t n_groups = 2 + rng.next_below(3);
  for (std::size_t i = 0; i < n; ++i) {
    d.decisions.push_back(static_cast<std::int32_t>(rng.next_below(2)));
    d.labels.push_back(static_cast<std::int32_t>(rng.next_below(2)));
    d.groups.push_back(std::string(1, static_cast<char>('A' + rng.next_below(n_groups))));
  }
  return d;
}

const char* kAllMetrics[] = {"tpr", "fpr", "fnr", "tnr",       "precision",
                             "fdr", "for", "npv", "prevalence", "ppr"};

TEST(AuditOracle, GroupMetricsMatchNaiveRecount) {
  Xoshiro256 rng(515151);
  for (int iter = 0; iter < 200; ++iter) {
    const OracleData d = random_data(rng);
    const auto counts = group_confusion(d.decisions, d.labels, d.groups);
    EXPECT_EQ(counts, oracle_counts(d));

    const auto metrics = group_metrics(counts);
    for (const char* name : kAllMetrics) {
      const auto want = oracle_metric(oracle_counts(d), name);
      for (const auto& m : metrics) {
        const Rate got = metric_field(m, name);
        const Rate expected = want.at(m.group);
        ASSERT_EQ(got.has_value(), expected.has_value()) << name << " " << m.group;
        if (got) {
          ASSERT_EQ(*got, *expected) << name << " " << m.group;
        }
      }
    }
  }
}

TEST(AuditOracle, DisparitiesMatchNaiveRecount) {
  Xoshiro256 rng(626262);
  for (int iter = 0; iter < 200; ++iter) {
    const OracleData d = random_data(rng);
    const auto metrics = group_metrics(group_confusion(d.decisions, d.labels, d.groups));

    // oracle reference: the largest group, ties by smallest symbol
    const auto counts = oracle_counts(d);
    std::string ref;
    std::uint64_t best = 0;
    for (const auto& [g, c] : counts)
      if (c.total() > best || (c.total() == best && (ref.empty() || g < ref))) {
        best = c.total();
        ref = g;
      }

    for (const char* name : kAllMetrics) {
      const auto report = disparities(metrics, name, ReferencePolicy::largest(), 0.8);
      ASSERT_EQ(report.reference_group, ref) << name;
      const auto values = oracle_metric(counts, name);
      const Rate rv = values.at(ref);
      for (const auto& e : report.per_group) {
        Rate want;
        if (e.group == ref) {
          if (rv && *rv != 0.0) want = 1.0;  // a zero reference rate is 0/0
        } else if (values.at(e.group) && rv) {
          if (*rv != 0.0)
            want = *values.at(e.group) / *rv;
          else if (*values.at(e.group) > 0.0)
            want = std::numeric_limits<double>::infinity();
        }
        ASSERT_EQ(e.disparity.has_value(), want.has_value()) << name << " " << e.group;
        if (want) {
          ASSERT_EQ(*e.disparity, *want) << name << " " << e.group;
        }
        if (want && std::isfinite(*want)) {
          ASSERT_EQ(e.fair, *want >= 0.8 && *want <= 1.0 / 0.8);
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// the 8-row worked example, exact rationals

OracleData worked_example() {
  OracleData d;
  d.labels = {1, 1, 0, 0, 1, 0, 0, 0};
  d.decisions = {1, 0, 1, 0, 1, 1, 0, 0};
  d.groups = {"A", "A", "A", "A", "B", "B", "B", "B"};
  return d;
}

TEST(WorkedExample, ExactCountsAndRates) {
  const OracleData d = worked_example();
  const auto metrics = group_metrics(group_confusion(d.decisions, d.labels, d.groups));
  ASSERT_EQ(metrics.size(), 2u);

  const GroupMetrics& a = metrics[0];
  EXPECT_EQ(a.group, "A");
  EXPECT_EQ(a.counts, (ConfusionCounts{1, 1, 1, 1}));
  EXPECT_EQ(*a.tpr, 0.5);
  EXPECT_EQ(*a.fpr, 0.5);

  const GroupMetrics& b = metrics[1];
  EXPECT_EQ(b.group, "B");
  EXPECT_EQ(b.counts, (ConfusionCounts{1, 1, 2, 0}));
  EXPECT_EQ(*b.tpr, 1.0);
  EXPECT_EQ(*b.fpr, 1.0 / 3.0);
}

TEST(WorkedExample, FprDisparityAndAccuracy) {
  const OracleData d = worked_example();
  const auto metrics = group_metrics(group_confusion(d.decisions, d.labels, d.groups));
  // equal group sizes: the tie breaks to the smaller symbol, A
  const auto report = disparities(metrics, "fpr", ReferencePolicy::largest(), 0.8);
  EXPECT_EQ(report.reference_group, "A");
  ASSERT_EQ(report.per_group.size(), 2u);
  EXPECT_EQ(*report.per_group[0].disparity, 1.0);
  EXPECT_TRUE(report.per_group[0].fair);
  EXPECT_EQ(*report.per_group[1].disparity, 2.0 / 3.0);
  EXPECT_FALSE(report.per_group[1].fair);  // 2/3 < 0.8

  const auto perf = performance(d.decisions, d.labels);
  EXPECT_EQ(*perf.accuracy, 5.0 / 8.0);
}

// ---------------------------------------------------------------------------
// edges of the disparity/fairness machinery

std::vector<GroupMetrics> metrics_from(
    std::map<std::string, ConfusionCounts> counts) {
  return group_metrics(counts);
}

TEST(Disparities, UndefinedWhenBothRatesUndefined) {
  // no positives anywhere: tpr is 0/0 in both groups
  const auto metrics = metrics_from({{"A", {0, 1, 3, 0}}, {"B", {0, 2, 2, 0}}});
  const auto report = disparities(metrics, "tpr", ReferencePolicy::largest(), 0.8);
  for (const auto& e : report.per_group) EXPECT_FALSE(e.disparity.has_value());
  EXPECT_FALSE(fairness_defined(report));
  EXPECT_EQ(fairness_score_from(report), 0.0);
}

TEST(Disparities, InfiniteWhenReferenceRateZero) {
  // reference group B (larger) has fpr 0, A has fpr > 0
  const auto metrics = metrics_from({{"A", {1, 1, 1, 1}}, {"B", {2, 0, 3, 1}}});
  const auto report = disparities(metrics, "fpr", ReferencePolicy::largest(), 0.8);
  EXPECT_EQ(report.reference_group, "B");
  const auto& a = report.per_group[0];
  ASSERT_TRUE(a.disparity.has_value());
  EXPECT_TRUE(std::isinf(*a.disparity));
  EXPECT_FALSE(a.fair);
  EXPECT_TRUE(fairness_defined(report));  // defined, just maximally unfair
  EXPECT_EQ(fairness_score_from(report), 0.0);
}

TEST(Disparities, TauRuleBoundariesInclusive) {
  // fpr A = 0.8, B = 1.0; reference B => disparity(A) = 0.8 exactly
  const auto metrics = metrics_from({{"A", {0, 4, 1, 0}}, {"B", {0, 5, 0, 1}}});
  const auto report = disparities(metrics, "fpr", ReferencePolicy::explicit_group("B"), 0.8);
  EXPECT_EQ(*report.per_group[0].disparity, 0.8);
  EXPECT_TRUE(report.per_group[0].fair);

  // reference A: disparity(B) = 1/0.8 = 1.25, the upper boundary
  const auto flipped = disparities(metrics, "fpr", ReferencePolicy::explicit_group("A"), 0.8);
  EXPECT_DOUBLE_EQ(*flipped.per_group[1].disparity, 1.25);
  EXPECT_TRUE(flipped.per_group[1].fair);

  // tighter tau excludes the same ratio
  const auto tight = disparities(metrics, "fpr", ReferencePolicy::explicit_group("B"), 0.81);
  EXPECT_FALSE(tight.per_group[0].fair);
}

TEST(Disparities, TauValidation) {
  const auto metrics = metrics_from({{"A", {1, 1, 1, 1}}, {"B", {1, 1, 1, 1}}});
  EXPECT_THROW(disparities(metrics, "fpr", ReferencePolicy::largest(), 0.0), Error);
  EXPECT_THROW(disparities(metrics, "fpr", ReferencePolicy::largest(), 1.5), Error);
  EXPECT_NO_THROW(disparities(metrics, "fpr", ReferencePolicy::largest(), 1.0));
}

TEST(ReferenceSelection, Policies) {
  // sizes: A=4, B=6; fpr: A=0.5, B=0.25
  const auto metrics = metrics_from({{"A", {1, 1, 1, 1}}, {"B", {2, 1, 3, 0}}});

  EXPECT_EQ(disparities(metrics, "fpr", ReferencePolicy::largest()).reference_group, "B");
  EXPECT_EQ(disparities(metrics, "fpr", ReferencePolicy::explicit_group("A")).reference_group,
            "A");
  EXPECT_EQ(disparities(metrics, "fpr", ReferencePolicy::min_metric()).reference_group, "B");

  try {
    disparities(metrics, "fpr", ReferencePolicy::explicit_group("Z"));
    FAIL() << "expected UnknownGroup";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownGroup);
  }
}

TEST(ReferenceSelection, MinMetricSkipsUndefined) {
  // tpr undefined for A (no positives); min_metric must settle on B
  const auto metrics = metrics_from({{"A", {0, 2, 2, 0}}, {"B", {1, 1, 1, 1}}});
  EXPECT_EQ(disparities(metrics, "tpr", ReferencePolicy::min_metric()).reference_group, "B");
}

TEST(FairnessScore, ParityAndWorstCase) {
  const auto equal = metrics_from({{"A", {2, 2, 2, 2}}, {"B", {1, 1, 1, 1}}});
  EXPECT_EQ(fairness_score(equal, "fpr", ReferencePolicy::largest()), 1.0);

  // disparity 2.0 -> score 0.5; disparity 0.5 -> score 0.5 (reciprocal-min)
  const auto skewed = metrics_from({{"A", {0, 2, 2, 0}}, {"B", {0, 1, 3, 0}}});
  // fpr A = 0.5, B = 0.25, reference ties at size 4 -> A; disparity B = 0.5
  EXPECT_EQ(fairness_score(skewed, "fpr", ReferencePolicy::largest()), 0.5);
}

TEST(FairnessScore, WorstGroupDominates) {
  // three groups, disparities 1.0, 0.9, 0.25 -> score 0.25
  const auto metrics = metrics_from({{"A", {0, 10, 10, 0}},   // fpr 0.5 (reference, largest)
                                     {"B", {0, 9, 11, 0}},    // fpr 0.45, d 0.9
                                     {"C", {0, 1, 7, 0}}});   // fpr 0.125, d 0.25
  EXPECT_EQ(fairness_score(metrics, "fpr", ReferencePolicy::largest()), 0.25);
}

TEST(MetricField, UnknownMetricRejected) {
  const auto metrics = metrics_from({{"A", {1, 1, 1, 1}}, {"B", {1, 1, 1, 1}}});
  try {
    metric_field(metrics[0], "auc");
    FAIL() << "expected UnknownMetric";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownMetric);
  }
}

// ---------------------------------------------------------------------------
// binarize + performance

TEST(Binarize, InclusiveThreshold) {
  const auto d = binarize({0.2, 0.5, 0.7}, 0.5);
  EXPECT_EQ(d, (std::vector<std::int32_t>{0, 1, 1}));
  EXPECT_THROW(binarize({0.5}, -0.1), Error);
  EXPECT_THROW(binarize({0.5}, 1.1), Error);
}

TEST(GroupConfusion, InputValidation) {
  EXPECT_THROW(group_confusion({1}, {1, 0}, {"A", "B"}), Error);
  try {
    group_confusion({1, 0}, {1, 2}, {"A", "B"});
    FAIL() << "expected LabelNotBinary";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LabelNotBinary);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
}

TEST(Performance, F1Harmonic) {
  // tp=2 fp=1 fn=1 tn=4: precision 2/3, recall 2/3, f1 2/3
  const std::vector<std::int32_t> decisions{1, 1, 1, 0, 0, 0, 0, 0};
  const std::vector<std::int32_t> labels{1, 1, 0, 1, 0, 0, 0, 0};
  const auto p = performance(decisions, labels);
  EXPECT_DOUBLE_EQ(*p.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*p.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*p.f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*p.accuracy, 6.0 / 8.0);
}

TEST(Performance, DegenerateRatesStayUndefined) {
  // never predicts positive and no positive labels: precision 0/0
  const auto p = performance({0, 0}, {0, 0});
  EXPECT_FALSE(p.precision.has_value());
  EXPECT_FALSE(p.recall.has_value());
  EXPECT_FALSE(p.f1.has_value());
  EXPECT_EQ(*p.accuracy, 1.0);
}

TEST(TprAtFpr, SweepFindsBudgetThreshold) {
  const std::vector<double> scores{0.1, 0.4, 0.6, 0.9};
  const std::vector<std::int32_t> labels{0, 0, 1, 1};

  const auto half = tpr_at_fpr(scores, labels, 0.5);
  EXPECT_EQ(half.threshold, 0.4);
  EXPECT_EQ(*half.tpr, 1.0);

  const auto zero = tpr_at_fpr(scores, labels, 0.0);
  EXPECT_EQ(zero.threshold, 0.6);
  EXPECT_EQ(*zero.tpr, 1.0);
}

TEST(TprAtFpr, SentinelWhenBudgetUnreachable) {
  // all rows share one score: any finite threshold admits the negative
  const auto out = tpr_at_fpr({0.5, 0.5}, {1, 0}, 0.0);
  EXPECT_TRUE(std::isinf(out.threshold));
  EXPECT_EQ(*out.tpr, 0.0);
}

TEST(TprAtFpr, BudgetValidation) {
  EXPECT_THROW(tpr_at_fpr({0.5}, {1}, -0.1), Error);
  EXPECT_THROW(tpr_at_fpr({0.5}, {1}, 1.1), Error);
}

TEST(PerformanceWithScores, BudgetPopulatesSweepFields) {
  const std::vector<double> scores{0.1, 0.4, 0.6, 0.9};
  const std::vector<std::int32_t> labels{0, 0, 1, 1};
  const auto p = performance_with_scores(scores, labels, 0.5, 0.0);
  EXPECT_EQ(*p.tpr_at_fpr, 1.0);
  EXPECT_EQ(*p.fpr_budget, 0.0);
  EXPECT_EQ(*p.realized_threshold, 0.6);

  const auto no_budget = performance_with_scores(scores, labels, 0.5);
  EXPECT_FALSE(no_budget.tpr_at_fpr.has_value());
}

// ---------------------------------------------------------------------------
// serialization

TEST(AuditJson, UndefinedAndInfiniteRates) {
  const auto metrics = metrics_from({{"A", {1, 1, 1, 1}}, {"B", {2, 0, 3, 1}}});
  const auto report = disparities(metrics, "fpr", ReferencePolicy::largest(), 0.8);
  const auto perf = performance({0, 0}, {0, 0});
  const auto doc = audit_to_json(metrics, report, perf);

  EXPECT_EQ(doc["disparities"]["metric"], "fpr");
  EXPECT_EQ(doc["disparities"]["reference"], "B");
  EXPECT_EQ(doc["disparities"]["per_group"]["A"]["disparity"], "inf");
  EXPECT_TRUE(doc["performance"]["precision"].is_null());
  EXPECT_EQ(doc["groups"][0]["counts"]["tp"], 1);
  EXPECT_FALSE(doc["performance"].contains("tpr_at_fpr"));
}

}  // namespace
}  // namespace fairflow
