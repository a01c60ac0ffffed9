#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairflow/errors.hpp"

namespace fairflow {

/// A rate that may be undefined (zero denominator). Undefined values stay
/// undefined through downstream arithmetic; they never collapse to 0 or NaN.
using Rate = std::optional<double>;

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct GroupMetrics {
  std::string group;
  ConfusionCounts counts;
  Rate tpr, fpr, fnr, tnr, precision, fdr, for_rate, npv, ppr, prevalence;
};

struct DisparityEntry {
  std::string group;
  Rate disparity;  // may hold +infinity when the reference metric is zero
  bool fair = false;
};

struct DisparityReport {
  std::string metric;
  std::string reference_group;
  double tau = 0.8;
  std::vector<DisparityEntry> per_group;  // sorted by group symbol
};

struct PerformanceMetrics {
  Rate accuracy, precision, recall, f1;
  Rate tpr_at_fpr;             // present when an fpr_budget was supplied
  Rate fpr_budget;
  Rate realized_threshold;     // +infinity when no score meets the budget
};

/// How to pick the reference group for disparity computation.
struct ReferencePolicy {
  enum class Kind { Explicit, LargestGroup, MinMetric };

  Kind kind = Kind::LargestGroup;
  std::string group;  // Explicit only

  static ReferencePolicy largest() { return {Kind::LargestGroup, {}}; }
  static ReferencePolicy explicit_group(std::string g) {
    return {Kind::Explicit, std::move(g)};
  }
  static ReferencePolicy min_metric() { return {Kind::MinMetric, {}}; }
};

// ---------------------------------------------------------------------------

/// decision = 1 iff score >= threshold (inclusive, by contract).
inline std::vector<std::int32_t> binarize(const std::vector<double>& scores,
                                          double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    raise(Errc::SchemaError, "threshold must lie in [0, 1]");
  std::vector<std::int32_t> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    out[i] = scores[i] >= threshold ? 1 : 0;
  return out;
}

inline std::map<std::string, ConfusionCounts> group_confusion(
    const std::vector<std::int32_t>& decisions,
    const std::vector<std::int32_t>& labels,
    const std::vector<std::string>& groups) {
  if (decisions.size() != labels.size() || labels.size() != groups.size())
    raise(Errc::SchemaError, "decisions, labels and groups must have equal length");
  std::map<std::string, ConfusionCounts> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      raise(Errc::LabelNotBinary, "label at row " + std::to_string(i + 1));
    auto& c = counts[groups[i]];
    const bool pos = decisions[i] != 0;
    if (labels[i] == 1)
      pos ? ++c.tp : ++c.fn;
    else
      pos ? ++c.fp : ++c.tn;
  }
  return counts;
}

namespace detail {

inline Rate ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

inline GroupMetrics metrics_from_counts(const std::string& group,
                                        const ConfusionCounts& c) {
  GroupMetrics m;
  m.group = group;
  m.counts = c;
  m.tpr = detail::ratio(c.tp, c.tp + c.fn);
  m.fnr = detail::ratio(c.fn, c.tp + c.fn);
  m.fpr = detail::ratio(c.fp, c.fp + c.tn);
  m.tnr = detail::ratio(c.tn, c.fp + c.tn);
  m.precision = detail::ratio(c.tp, c.tp + c.fp);
  m.fdr = detail::ratio(c.fp, c.tp + c.fp);
  m.for_rate = detail::ratio(c.fn, c.fn + c.tn);
  m.npv = detail::ratio(c.tn, c.fn + c.tn);
  m.ppr = detail::ratio(c.tp + c.fp, c.total());
  m.prevalence = detail::ratio(c.tp + c.fn, c.total());
  return m;
}

/// Per-group rates from counts; zero-denominator rates stay undefined.
inline std::vector<GroupMetrics> group_metrics(
    const std::map<std::string, ConfusionCounts>& counts) {
  if (counts.empty()) raise(Errc::SchemaError, "no groups to audit");
  std::vector<GroupMetrics> out;
  out.reserve(counts.size());
  for (const auto& [group, c] : counts) out.push_back(metrics_from_counts(group, c));
  return out;
}

inline Rate metric_field(const GroupMetrics& m, const std::string& name) {
  if (name == "tpr") return m.tpr;
  if (name == "fpr") return m.fpr;
  if (name == "fnr") return m.fnr;
  if (name == "tnr") return m.tnr;
  if (name == "precision") return m.precision;
  if (name == "fdr") return m.fdr;
  if (name == "for") return m.for_rate;
  if (name == "npv") return m.npv;
  if (name == "ppr") return m.ppr;
  if (name == "prevalence") return m.prevalence;
  raise(Errc::UnknownMetric, "no group metric named '" + name + "'");
}

inline const GroupMetrics& resolve_reference(
    const std::vector<GroupMetrics>& metrics, const ReferencePolicy& policy,
    const std::string& metric_name) {
  switch (policy.kind) {
    case ReferencePolicy::Kind::Explicit: {
      for (const auto& m : metrics)
        if (m.group == policy.group) return m;
      raise(Errc::UnknownGroup, "reference group '" + policy.group + "' not present");
    }
    case ReferencePolicy::Kind::LargestGroup: {
      const GroupMetrics* best = &metrics.front();
      for (const auto& m : metrics) {
        if (m.counts.total() > best->counts.total() ||
            (m.counts.total() == best->counts.total() && m.group < best->group))
          best = &m;
      }
      return *best;
    }
    case ReferencePolicy::Kind::MinMetric: {
      const GroupMetrics* best = nullptr;
      for (const auto& m : metrics) {
        const Rate v = metric_field(m, metric_name);
        if (!v) continue;
        if (!best || *v < *metric_field(*best, metric_name) ||
            (*v == *metric_field(*best, metric_name) && m.group < best->group))
          best = &m;
      }
      if (best) return *best;
      return resolve_reference(metrics, ReferencePolicy::largest(), metric_name);
    }
  }
  raise(Errc::SchemaError, "bad reference policy");
}

/// Ratio disparities versus the resolved reference group; fairness flag is
/// the two-sided tau rule (disparity within [tau, 1/tau]).
inline DisparityReport disparities(const std::vector<GroupMetrics>& metrics,
                                   const std::string& metric_name,
                                   const ReferencePolicy& policy,
                                   double tau = 0.8) {
  if (!(tau > 0.0 && tau <= 1.0)) raise(Errc::SchemaError, "tau must lie in (0, 1]");
  const GroupMetrics& ref = resolve_reference(metrics, policy, metric_name);
  const Rate ref_value = metric_field(ref, metric_name);

  DisparityReport report;
  report.metric = metric_name;
  report.reference_group = ref.group;
  report.tau = tau;
  for (const auto& m : metrics) {
    DisparityEntry e;
    e.group = m.group;
    const Rate value = metric_field(m, metric_name);
    if (value && ref_value) {
      if (*ref_value != 0.0) {
        const double d = (&m == &ref) ? 1.0 : *value / *ref_value;
        e.disparity = d;
        e.fair = d >= tau && d <= 1.0 / tau;
      } else if (*value > 0.0) {
        e.disparity = std::numeric_limits<double>::infinity();
        e.fair = false;
      }  // 0/0: left undefined
    }
    report.per_group.push_back(std::move(e));
  }
  std::sort(report.per_group.begin(), report.per_group.end(),
            [](const auto& a, const auto& b) { return a.group < b.group; });
  return report;
}

/// Scalar parity summary in [0, 1]: the worst reciprocal-min disparity over
/// non-reference groups (1 = exact parity). Undefined or infinite disparities
/// score 0; a single-group audit scores 1 by convention.
inline double fairness_score_from(const DisparityReport& report) {
  double score = 1.0;
  for (const auto& e : report.per_group) {
    if (e.group == report.reference_group) continue;
    double s = 0.0;
    if (e.disparity && std::isfinite(*e.disparity) && *e.disparity > 0.0)
      s = std::min(*e.disparity, 1.0 / *e.disparity);
    score = std::min(score, s);
  }
  return score;
}

/// True when every non-reference disparity is a defined ratio (possibly
/// infinite). An undefined disparity means the underlying rates were 0/0, so
/// downstream analysis should exclude the point rather than score it 0.
inline bool fairness_defined(const DisparityReport& report) {
  for (const auto& e : report.per_group) {
    if (e.group == report.reference_group) continue;
    if (!e.disparity) return false;
  }
  return true;
}

inline double fairness_score(const std::vector<GroupMetrics>& metrics,
                             const std::string& metric_name,
                             const ReferencePolicy& policy) {
  return fairness_score_from(disparities(metrics, metric_name, policy, 0.8));
}

// ---------------------------------------------------------------------------
// Overall performance

inline PerformanceMetrics performance(const std::vector<std::int32_t>& decisions,
                                      const std::vector<std::int32_t>& labels) {
  if (decisions.size() != labels.size() || labels.empty())
    raise(Errc::SchemaError, "decisions and labels must be non-empty and equal length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      raise(Errc::LabelNotBinary, "label at row " + std::to_string(i + 1));
    const bool pos = decisions[i] != 0;
    if (labels[i] == 1)
      pos ? ++c.tp : ++c.fn;
    else
      pos ? ++c.fp : ++c.tn;
  }
  PerformanceMetrics p;
  p.accuracy = detail::ratio(c.tp + c.tn, c.total());
  p.precision = detail::ratio(c.tp, c.tp + c.fp);
  p.recall = detail::ratio(c.tp, c.tp + c.fn);
  if (p.precision && p.recall && (*p.precision + *p.recall) > 0.0)
    p.f1 = 2.0 * *p.precision * *p.recall / (*p.precision + *p.recall);
  return p;
}

/// TPR at the lowest threshold (swept over observed score values, plus a
/// sentinel above the maximum) whose global FPR does not exceed the budget.
/// That threshold maximizes TPR subject to the budget.
struct TprAtFpr {
  Rate tpr;
  double threshold = std::numeric_limits<double>::infinity();
};

inline TprAtFpr tpr_at_fpr(const std::vector<double>& scores,
                           const std::vector<std::int32_t>& labels,
                           double fpr_budget) {
  if (scores.size() != labels.size() || labels.empty())
    raise(Errc::SchemaError, "scores and labels must be non-empty and equal length");
  if (!(fpr_budget >= 0.0 && fpr_budget <= 1.0))
    raise(Errc::SchemaError, "fpr_budget must lie in [0, 1]");

  std::vector<std::pair<double, std::int32_t>> rows(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) rows[i] = {scores[i], labels[i]};
  std::sort(rows.begin(), rows.end());

  std::uint64_t total_pos = 0, total_neg = 0;
  for (const auto& [s, y] : rows) (y == 1 ? total_pos : total_neg)++;

  // Sweep unique scores ascending; pos_ge/neg_ge track counts with score >= t.
  std::uint64_t pos_below = 0, neg_below = 0;
  std::size_t i = 0;
  while (i < rows.size()) {
    const double t = rows[i].first;
    const std::uint64_t neg_ge = total_neg - neg_below;
    const double fpr = total_neg == 0
                           ? 0.0
                           : static_cast<double>(neg_ge) / static_cast<double>(total_neg);
    if (fpr <= fpr_budget) {
      TprAtFpr out;
      out.threshold = t;
      out.tpr = detail::ratio(total_pos - pos_below, total_pos);
      return out;
    }
    while (i < rows.size() && rows[i].first == t) {
      (rows[i].second == 1 ? pos_below : neg_below)++;
      ++i;
    }
  }
  // Sentinel above every observed score: FPR = 0, TPR = 0.
  TprAtFpr out;
  out.tpr = detail::ratio(0, total_pos);
  return out;
}

/// Performance from scores: decisions at `threshold` feed accuracy/precision/
/// recall/f1; the optional budget adds the TPR@FPR sweep.
inline PerformanceMetrics performance_with_scores(
    const std::vector<double>& scores, const std::vector<std::int32_t>& labels,
    double threshold = 0.5, std::optional<double> fpr_budget = std::nullopt) {
  PerformanceMetrics p = performance(binarize(scores, threshold), labels);
  if (fpr_budget) {
    const TprAtFpr t = tpr_at_fpr(scores, labels, *fpr_budget);
    p.tpr_at_fpr = t.tpr;
    p.fpr_budget = *fpr_budget;
    p.realized_threshold = t.threshold;
  }
  return p;
}

// ---------------------------------------------------------------------------
// JSON serialization (undefined -> null, +infinity -> "inf")

namespace detail {

inline nlohmann::json rate_to_json(const Rate& r) {
  if (!r) return nullptr;
  if (std::isinf(*r)) return "inf";
  return *r;
}

}  // namespace detail

inline nlohmann::json audit_to_json(const std::vector<GroupMetrics>& metrics,
                                    const DisparityReport& report,
                                    const PerformanceMetrics& perf) {
  nlohmann::json doc;
  doc["groups"] = nlohmann::json::array();
  for (const auto& m : metrics) {
    doc["groups"].push_back({
        {"group", m.group},
        {"counts", {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"tn", m.counts.tn}, {"fn", m.counts.fn}}},
        {"metrics",
         {{"tpr", detail::rate_to_json(m.tpr)},
          {"fpr", detail::rate_to_json(m.fpr)},
          {"fnr", detail::rate_to_json(m.fnr)},
          {"tnr", detail::rate_to_json(m.tnr)},
          {"precision", detail::rate_to_json(m.precision)},
          {"fdr", detail::rate_to_json(m.fdr)},
          {"for", detail::rate_to_json(m.for_rate)},
          {"npv", detail::rate_to_json(m.npv)},
          {"ppr", detail::rate_to_json(m.ppr)},
          {"prevalence", detail::rate_to_json(m.prevalence)}}},
    });
  }
  nlohmann::json per_group = nlohmann::json::object();
  for (const auto& e : report.per_group)
    per_group[e.group] = {{"disparity", detail::rate_to_json(e.disparity)}, {"fair", e.fair}};
  doc["disparities"] = {{"metric", report.metric},
                        {"reference", report.reference_group},
                        {"tau", report.tau},
                        {"per_group", per_group}};
  doc["performance"] = {{"accuracy", detail::rate_to_json(perf.accuracy)},
                        {"precision", detail::rate_to_json(perf.precision)},
                        {"recall", detail::rate_to_json(perf.recall)},
                        {"f1", detail::rate_to_json(perf.f1)}};
  if (perf.fpr_budget) {
    doc["performance"]["tpr_at_fpr"] = detail::rate_to_json(perf.tpr_at_fpr);
    doc["performance"]["fpr_budget"] = detail::rate_to_json(perf.fpr_budget);
    doc["performance"]["realized_threshold"] = detail::rate_to_json(perf.realized_threshold);
  }
  return doc;
}

}  // namespace fairflow
