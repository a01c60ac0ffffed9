#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "fairflow/errors.hpp"
#include "fairflow/experiment.hpp"
#include "fairflow/methods.hpp"
#include "fairflow/prng.hpp"

namespace fairflow {

// ---------------------------------------------------------------------------
// Trade-off points

struct TrialRef {
  std::string dataset;
  std::string method;
  std::int64_t trial_id = 0;

  auto tie() const { return std::tie(dataset, method, trial_id); }
  bool operator==(const TrialRef&) const = default;
};

struct TradeoffPoint {
  double performance = 0.0;
  double fairness = 0.0;
  TrialRef trial_ref;

  bool operator==(const TradeoffPoint&) const = default;
};

/// q dominates p iff q is at least as good on both axes and strictly better
/// on one.
inline bool dominates(const TradeoffPoint& q, const TradeoffPoint& p) {
  return q.performance >= p.performance && q.fairness >= p.fairness &&
         (q.performance > p.performance || q.fairness > p.fairness);
}

/// Non-dominated subset, sorted by performance descending (ties: fairness
/// descending, then trial_ref). Duplicates of a frontier point are all kept.
inline std::vector<TradeoffPoint> pareto_frontier(const std::vector<TradeoffPoint>& points) {
  std::vector<TradeoffPoint> sorted = points;
  std::sort(sorted.begin(), sorted.end(), [](const TradeoffPoint& a, const TradeoffPoint& b) {
    if (a.performance != b.performance) return a.performance > b.performance;
    if (a.fairness != b.fairness) return a.fairness > b.fairness;
    return a.trial_ref.tie() < b.trial_ref.tie();
  });
  // sweep: a point is dominated iff some point before it (higher or equal
  // performance) has strictly better standing on the other axis
  std::vector<TradeoffPoint> frontier;
  double best_fairness = -1.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].performance == sorted[i].performance) ++j;
    // within an equal-performance block, only the max-fairness points survive
    // (unless an earlier block already beat them)
    const double block_best = sorted[i].fairness;
    for (std::size_t k = i; k < j; ++k)
      if (sorted[k].fairness == block_best && sorted[k].fairness > best_fairness)
        frontier.push_back(sorted[k]);
    best_fairness = std::max(best_fairness, block_best);
    i = j;
  }
  return frontier;
}

/// Maximizes alpha*performance + (1-alpha)*fairness. Ties prefer higher
/// fairness, then higher performance (keeping the winner on the frontier at
/// the alpha extremes), then the lowest trial reference.
inline TradeoffPoint best_tradeoff(const std::vector<TradeoffPoint>& points, double alpha) {
  if (points.empty()) raise(Errc::SchemaError, "best_tradeoff needs at least one point");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    raise(Errc::SchemaError, "alpha must lie in [0, 1]");
  const auto score = [alpha](const TradeoffPoint& p) {
    return alpha * p.performance + (1.0 - alpha) * p.fairness;
  };
  const TradeoffPoint* best = &points.front();
  for (const auto& p : points) {
    const double sp = score(p), sb = score(*best);
    if (sp > sb ||
        (sp == sb &&
         (p.fairness > best->fairness ||
          (p.fairness == best->fairness &&
           (p.performance > best->performance ||
            (p.performance == best->performance && p.trial_ref.tie() < best->trial_ref.tie()))))))
      best = &p;
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Collecting points from a result store

struct PointCollection {
  std::vector<TradeoffPoint> points;
  std::size_t n_failed = 0;     // trials that errored
  std::size_t n_excluded = 0;   // completed trials with undefined fairness
};

/// Gathers (selected_performance, fairness_score) per completed trial.
/// `use_test` switches between the validation metrics (model selection) and
/// the test metrics (reporting).
inline PointCollection collect_points(const ResultStore& store, bool use_test = false) {
  PointCollection out;
  for (const auto& ds : store.config().datasets) {
    for (const auto& m : store.config().methods) {
      for (const auto& rec : store.trials(ds.name, m.name)) {
        if (!rec.ok()) {
          ++out.n_failed;
          continue;
        }
        const TrialEval& e = use_test ? *rec.test : *rec.validation;
        if (!e.fairness_defined) {
          ++out.n_excluded;
          continue;
        }
        out.points.push_back(
            {e.selected_performance, e.fairness_score, {ds.name, m.name, rec.trial_id}});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bootstrap method comparison

struct MethodSummary {
  std::string method;
  double point_estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_trials = 0;    // completed trials in the sample
  std::size_t n_excluded = 0;  // undefined-fairness trials left out
  std::size_t n_failed = 0;
  std::size_t n_bootstrap = 0;
  double ci_level = 0.95;
};

/// Percentile-method bootstrap over a sample of per-trial scores: resamples
/// with replacement (size = sample size), takes the mean of each resample,
/// and reads the (1±ci_level)/2 empirical quantiles. The interval is clamped
/// to contain the point estimate.
inline MethodSummary bootstrap_summary(const std::string& method,
                                       const std::vector<double>& sample,
                                       std::size_t n_bootstrap, double ci_level,
                                       std::uint64_t seed) {
  if (sample.size() < 2)
    raise(Errc::TooFewTrials, "method '" + method + "' has " +
                                  std::to_string(sample.size()) +
                                  " usable trials; at least 2 are required");
  if (!(ci_level > 0.0 && ci_level < 1.0))
    raise(Errc::SchemaError, "ci_level must lie in (0, 1)");
  if (n_bootstrap < 1) raise(Errc::SchemaError, "n_bootstrap must be at least 1");

  MethodSummary s;
  s.method = method;
  s.n_trials = sample.size();
  s.n_bootstrap = n_bootstrap;
  s.ci_level = ci_level;

  double mean = 0.0;
  for (double v : sample) mean += v;
  mean /= static_cast<double>(sample.size());
  s.point_estimate = mean;

  Xoshiro256 rng(seed);
  std::vector<double> means(n_bootstrap);
  for (std::size_t b = 0; b < n_bootstrap; ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i)
      acc += sample[rng.next_below(sample.size())];
    means[b] = acc / static_cast<double>(sample.size());
  }
  s.ci_low = empirical_quantile(means, (1.0 - ci_level) / 2.0);
  s.ci_high = empirical_quantile(means, (1.0 + ci_level) / 2.0);
  s.ci_low = std::min(s.ci_low, s.point_estimate);
  s.ci_high = std::max(s.ci_high, s.point_estimate);
  return s;
}

/// Per-method bootstrap CIs over the combined test-set score
/// alpha*performance + (1-alpha)*fairness of each completed trial. Trials
/// pool across datasets; each method's resampling generator is seeded
/// mix_seed(seed, "method:" + name) so method order cannot matter.
inline std::vector<MethodSummary> compare_methods(const ResultStore& store, double alpha,
                                                  std::size_t n_bootstrap = 1000,
                                                  double ci_level = 0.95,
                                                  std::uint64_t seed = 0) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    raise(Errc::SchemaError, "alpha must lie in [0, 1]");
  std::vector<MethodSummary> out;
  for (const auto& m : store.config().methods) {
    std::vector<double> sample;
    std::size_t excluded = 0, failed = 0;
    for (const auto& ds : store.config().datasets) {
      for (const auto& rec : store.trials(ds.name, m.name)) {
        if (!rec.ok()) {
          ++failed;
          continue;
        }
        const TrialEval& e = *rec.test;
        if (!e.fairness_defined) {
          ++excluded;
          continue;
        }
        sample.push_back(alpha * e.selected_performance + (1.0 - alpha) * e.fairness_score);
      }
    }
    MethodSummary s = bootstrap_summary(m.name, sample, n_bootstrap, ci_level,
                                        mix_seed(seed, "method:" + m.name));
    s.n_excluded = excluded;
    s.n_failed = failed;
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Analysis export

namespace detail {

inline nlohmann::json point_to_json(const TradeoffPoint& p) {
  return {{"performance", p.performance},
          {"fairness", p.fairness},
          {"dataset", p.trial_ref.dataset},
          {"method", p.trial_ref.method},
          {"trial_id", p.trial_ref.trial_id}};
}

inline TradeoffPoint point_from_json(const nlohmann::json& j) {
  return {j.at("performance").get<double>(),
          j.at("fairness").get<double>(),
          {j.at("dataset").get<std::string>(), j.at("method").get<std::string>(),
           j.at("trial_id").get<std::int64_t>()}};
}

inline nlohmann::json summary_to_json(const MethodSummary& s) {
  return {{"method", s.method},
          {"point_estimate", s.point_estimate},
          {"ci_low", s.ci_low},
          {"ci_high", s.ci_high},
          {"n_trials", s.n_trials},
          {"n_excluded", s.n_excluded},
          {"n_failed", s.n_failed},
          {"n_bootstrap", s.n_bootstrap},
          {"ci_level", s.ci_level}};
}

inline MethodSummary summary_from_json(const nlohmann::json& j) {
  MethodSummary s;
  s.method = j.at("method").get<std::string>();
  s.point_estimate = j.at("point_estimate").get<double>();
  s.ci_low = j.at("ci_low").get<double>();
  s.ci_high = j.at("ci_high").get<double>();
  s.n_trials = j.at("n_trials").get<std::size_t>();
  s.n_excluded = j.at("n_excluded").get<std::size_t>();
  s.n_failed = j.at("n_failed").get<std::size_t>();
  s.n_bootstrap = j.at("n_bootstrap").get<std::size_t>();
  s.ci_level = j.at("ci_level").get<double>();
  return s;
}

}  // namespace detail

/// The document consumed by the render module and the CLI `plot` command.
inline nlohmann::json analysis_to_json(const PointCollection& collection,
                                       const std::vector<TradeoffPoint>& frontier,
                                       const TradeoffPoint& best, double alpha,
                                       const std::vector<MethodSummary>& summaries) {
  nlohmann::json doc;
  doc["alpha"] = alpha;
  doc["points"] = nlohmann::json::array();
  for (const auto& p : collection.points) doc["points"].push_back(detail::point_to_json(p));
  doc["frontier"] = nlohmann::json::array();
  for (const auto& p : frontier) doc["frontier"].push_back(detail::point_to_json(p));
  doc["best"] = detail::point_to_json(best);
  doc["coverage"] = {{"n_points", collection.points.size()},
                     {"n_excluded", collection.n_excluded},
                     {"n_failed", collection.n_failed}};
  doc["methods"] = nlohmann::json::array();
  for (const auto& s : summaries) doc["methods"].push_back(detail::summary_to_json(s));
  return doc;
}

}  // namespace fairflow
