#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fairflow/audit.hpp"
#include "fairflow/errors.hpp"
#include "fairflow/methods.hpp"
#include "fairflow/prng.hpp"
#include "fairflow/tabular.hpp"

namespace fairflow {

// ---------------------------------------------------------------------------
// Configuration types

struct OptimizerConfig {
  enum class Sampler { Random, Grid };

  std::int64_t n_trials = 50;
  Sampler sampler = Sampler::Random;
  std::uint64_t seed = 42;
  std::int64_t n_jobs = 1;

  void validate() const {
    if (n_trials < 1) raise(Errc::SchemaError, "n_trials must be at least 1");
    if (n_jobs < 1) raise(Errc::SchemaError, "n_jobs must be at least 1");
  }
};

inline const char* sampler_name(OptimizerConfig::Sampler s) {
  return s == OptimizerConfig::Sampler::Random ? "random" : "grid";
}

inline OptimizerConfig::Sampler sampler_from_name(const std::string& s) {
  if (s == "random") return OptimizerConfig::Sampler::Random;
  if (s == "grid") return OptimizerConfig::Sampler::Grid;
  raise(Errc::SchemaError, "unknown sampler '" + s + "' (expected random or grid)");
}

/// A named pipeline: optional pre-processor, an estimator, optional
/// post-processor, each with its own search space.
struct PipelineSpec {
  std::string name;
  std::optional<std::string> pre_kind;
  HyperparameterSpace pre_space;
  std::string estimator_kind;
  HyperparameterSpace estimator_space;
  std::optional<std::string> post_kind;
  HyperparameterSpace post_space;
};

/// What to measure per trial. The selection score pairs one performance
/// metric with the min-ratio fairness score of one group metric.
struct EvalSpec {
  std::string performance_metric = "accuracy";
  std::string fairness_metric = "fpr";
  ReferencePolicy reference = ReferencePolicy::largest();
  double tau = 0.8;
  std::optional<double> fpr_budget;
  double alpha = 0.5;
  double decision_threshold = 0.5;
};

inline double performance_field(const PerformanceMetrics& p, const std::string& name) {
  Rate r;
  if (name == "accuracy") r = p.accuracy;
  else if (name == "precision") r = p.precision;
  else if (name == "recall") r = p.recall;
  else if (name == "f1") r = p.f1;
  else if (name == "tpr_at_fpr") r = p.tpr_at_fpr;
  else raise(Errc::UnknownMetric, "no performance metric named '" + name + "'");
  return r.value_or(0.0);
}

inline void validate_eval_spec(const EvalSpec& e) {
  PerformanceMetrics probe;
  performance_field(probe, e.performance_metric);  // throws UnknownMetric
  GroupMetrics gm;
  metric_field(gm, e.fairness_metric);  // throws UnknownMetric
  if (!(e.tau > 0.0 && e.tau <= 1.0))
    raise(Errc::SchemaError, "tau must lie in (0, 1]");
  if (!(e.alpha >= 0.0 && e.alpha <= 1.0))
    raise(Errc::SchemaError, "alpha must lie in [0, 1]");
  if (e.performance_metric == "tpr_at_fpr" && !e.fpr_budget)
    raise(Errc::SchemaError, "performance metric tpr_at_fpr requires fpr_budget");
  if (e.fpr_budget && !(*e.fpr_budget >= 0.0 && *e.fpr_budget <= 1.0))
    raise(Errc::SchemaError, "fpr_budget must lie in [0, 1]");
}

// ---------------------------------------------------------------------------
// Trial records

struct TrialEval {
  PerformanceMetrics performance;
  double selected_performance = 0.0;
  double fairness_score = 0.0;
  bool fairness_defined = true;
  std::string reference_group;
};

struct TrialRecord {
  std::int64_t trial_id = 0;
  ParamAssignment params;
  std::uint64_t seed = 0;
  std::optional<TrialEval> validation;
  std::optional<TrialEval> test;
  std::string artifact_path;
  std::optional<std::string> error_code;   // Errc name of the wrapped failure
  std::optional<std::string> error_message;
  std::int64_t duration_ms = 0;

  bool ok() const { return !error_code.has_value(); }
};

// ---------------------------------------------------------------------------
// Trial planning

/// Flattens a pipeline's three spaces into one, prefixing parameter names
/// with their stage ("pre.", "estimator.", "post.").
inline HyperparameterSpace combined_space(const PipelineSpec& pipeline) {
  HyperparameterSpace space;
  for (const auto& [n, d] : pipeline.pre_space) space.emplace_back("pre." + n, d);
  for (const auto& [n, d] : pipeline.estimator_space)
    space.emplace_back("estimator." + n, d);
  for (const auto& [n, d] : pipeline.post_space) space.emplace_back("post." + n, d);
  // canonical name order: the sampling sequence (and hence every trial) must
  // not depend on how the space was assembled
  std::sort(space.begin(), space.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return space;
}

namespace detail {

inline std::vector<ParamValue> grid_values(const std::string& name, const ParamDesc& d) {
  switch (d.type) {
    case ParamDesc::Type::Int: {
      std::vector<ParamValue> vals;
      for (std::int64_t v = d.ilow; v <= d.ihigh; ++v) vals.emplace_back(v);
      return vals;
    }
    case ParamDesc::Type::Categorical:
      return d.choices;
    default:
      raise(Errc::InfiniteGrid, "parameter '" + name +
                                    "' is a continuous range; the grid sampler needs "
                                    "categorical choices or integer bounds");
  }
}

}  // namespace detail

/// Computes every trial's parameter assignment up front, before any training
/// runs: the plan is a pure function of (space, config). Random sampling
/// draws trials in order from one generator seeded with config.seed; the grid
/// sampler walks the Cartesian product in declaration order with the last
/// parameter varying fastest.
inline std::vector<ParamAssignment> plan_trials(const HyperparameterSpace& space,
                                                const OptimizerConfig& config) {
  config.validate();
  std::vector<ParamAssignment> plan;
  plan.reserve(static_cast<std::size_t>(config.n_trials));

  if (config.sampler == OptimizerConfig::Sampler::Random) {
    Xoshiro256 rng(config.seed);
    for (std::int64_t t = 0; t < config.n_trials; ++t)
      plan.push_back(sample_hyperparams(space, rng));
    return plan;
  }

  std::vector<std::vector<ParamValue>> axes;
  for (const auto& [name, desc] : space) {
    desc.validate(name);
    axes.push_back(detail::grid_values(name, desc));
  }
  std::uint64_t cardinality = 1;
  for (const auto& axis : axes) {
    if (cardinality > (1ull << 62) / axis.size()) {
      cardinality = 1ull << 62;  // saturate; certainly >= n_trials
      break;
    }
    cardinality *= axis.size();
  }
  if (static_cast<std::uint64_t>(config.n_trials) > cardinality)
    raise(Errc::GridTooSmall, "grid has " + std::to_string(cardinality) +
                                  " combinations but n_trials is " +
                                  std::to_string(config.n_trials));

  for (std::int64_t t = 0; t < config.n_trials; ++t) {
    ParamAssignment a;
    std::uint64_t rem = static_cast<std::uint64_t>(t);
    for (std::size_t j = axes.size(); j-- > 0;) {
      a[space[j].first] = axes[j][rem % axes[j].size()];
      rem /= axes[j].size();
    }
    plan.push_back(std::move(a));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Partition encoding

struct PartitionData {
  Matrix X;
  std::vector<std::int32_t> y;
  std::vector<std::int32_t> groups;
  std::vector<std::string> group_names;
};

struct EncodedSplit {
  PartitionData train, validation, test;
};

namespace detail {

inline PartitionData encode_partition(const Dataset& data, const FeatureEncoder& enc,
                                      const std::vector<std::size_t>& rows) {
  PartitionData part;
  part.X = enc.encode(data, rows);
  const auto& labels = data.labels();
  const auto& codes = data.group_codes();
  const auto& levels = data.group_levels();
  for (auto r : rows) {
    part.y.push_back(labels[r]);
    part.groups.push_back(codes[r]);
    part.group_names.push_back(levels[static_cast<std::size_t>(codes[r])]);
  }
  return part;
}

}  // namespace detail

/// One-hot-encodes features with an encoder fitted on the train partition
/// only, then materializes the three partitions.
inline EncodedSplit encode_split(const SplitDataset& split) {
  FeatureEncoder enc;
  const auto train_rows = split.partition_indices(Partition::Train);
  enc.fit(split.base(), train_rows);
  EncodedSplit out;
  out.train = detail::encode_partition(split.base(), enc, train_rows);
  out.validation = detail::encode_partition(split.base(), enc,
                                            split.partition_indices(Partition::Validation));
  out.test = detail::encode_partition(split.base(), enc,
                                      split.partition_indices(Partition::Test));
  return out;
}

// ---------------------------------------------------------------------------
// Trial execution

namespace detail {

inline ParamAssignment stage_params(const ParamAssignment& assignment,
                                    const std::string& prefix) {
  ParamAssignment out;
  for (const auto& [k, v] : assignment)
    if (k.rfind(prefix, 0) == 0) out[k.substr(prefix.size())] = v;
  return out;
}

inline TrialEval evaluate_scores(const std::vector<double>& values,
                                 const PartitionData& part, const EvalSpec& eval) {
  const auto decisions = binarize(values, eval.decision_threshold);
  const auto gm = group_metrics(group_confusion(decisions, part.y, part.group_names));
  const auto report = disparities(gm, eval.fairness_metric, eval.reference, eval.tau);
  TrialEval out;
  out.performance =
      performance_with_scores(values, part.y, eval.decision_threshold, eval.fpr_budget);
  out.selected_performance = performance_field(out.performance, eval.performance_metric);
  out.fairness_score = fairness_score_from(report);
  out.fairness_defined = fairness_defined(report);
  out.reference_group = report.reference_group;
  return out;
}

inline nlohmann::json params_to_json(const ParamAssignment& params) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : params) j[k] = param_value_to_json(v);
  return j;
}

inline ParamAssignment params_from_json(const nlohmann::json& j) {
  ParamAssignment out;
  for (auto it = j.begin(); it != j.end(); ++it)
    out[it.key()] = param_value_from_json(it.value());
  return out;
}

}  // namespace detail

/// Fits the pipeline for one assignment and evaluates it. Pre-processor and
/// estimator fit on train; the post-processor fits on validation scores (not
/// train, avoiding optimistic thresholds); metrics are computed on validation
/// (selection) and test (reporting). Any method error is captured in the
/// record — the search always continues.
///
/// Stage seeds derive from the trial seed: pre-processor seed =
/// mix_seed(trial_seed, fnv1a64("pre")).
inline TrialRecord run_trial(std::int64_t trial_id, const ParamAssignment& assignment,
                             const PipelineSpec& pipeline, const EncodedSplit& split,
                             const EvalSpec& eval, std::uint64_t trial_seed,
                             const std::string& method_dir = "") {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();

  TrialRecord rec;
  rec.trial_id = trial_id;
  rec.params = assignment;
  rec.seed = trial_seed;

  try {
    const auto pre_params = detail::stage_params(assignment, "pre.");
    const auto est_params = detail::stage_params(assignment, "estimator.");
    const auto post_params = detail::stage_params(assignment, "post.");

    nlohmann::json artifact{{"method", pipeline.name},
                            {"trial_id", trial_id},
                            {"seeds", {{"trial", trial_seed}}}};

    const Matrix* train_X = &split.train.X;
    const std::vector<std::int32_t>* train_y = &split.train.y;
    const std::vector<std::int32_t>* train_g = &split.train.groups;
    std::vector<double> train_w;
    TransformedData transformed;
    if (pipeline.pre_kind) {
      const std::uint64_t pre_seed = mix_seed(trial_seed, fnv1a64("pre"));
      auto pre = MethodRegistry::make_pre(*pipeline.pre_kind, pre_params, pre_seed);
      pre->fit(split.train.X, split.train.y, split.train.groups);
      transformed = pre->transform(split.train.X, split.train.y, split.train.groups);
      train_X = &transformed.X;
      train_y = &transformed.y;
      train_g = &transformed.groups;
      train_w = transformed.weights;
      artifact["seeds"]["pre"] = pre_seed;
      artifact["pipeline"]["pre"] = {{"method_kind", pre->kind()},
                                     {"hyperparams", detail::params_to_json(pre_params)},
                                     {"learned", pre->learned_state()}};
      if (!transformed.warnings.empty())
        artifact["pipeline"]["pre"]["warnings"] = transformed.warnings;
    }

    auto estimator = MethodRegistry::make_estimator(pipeline.estimator_kind, est_params);
    estimator->fit(*train_X, *train_y, *train_g, train_w);
    artifact["pipeline"]["estimator"] = {
        {"method_kind", estimator->kind()},
        {"hyperparams", detail::params_to_json(est_params)},
        {"learned", estimator->learned_state()}};

    std::vector<double> val_values =
        estimator->predict_scores(split.validation.X, split.validation.groups);
    std::vector<double> test_values =
        estimator->predict_scores(split.test.X, split.test.groups);
    if (pipeline.post_kind) {
      auto post = MethodRegistry::make_post(*pipeline.post_kind, post_params);
      post->fit(val_values, split.validation.y, split.validation.groups);
      val_values = post->adjust(val_values, split.validation.groups);
      test_values = post->adjust(test_values, split.test.groups);
      artifact["pipeline"]["post"] = {{"method_kind", post->kind()},
                                      {"hyperparams", detail::params_to_json(post_params)},
                                      {"learned", post->learned_state()}};
    }

    rec.validation = detail::evaluate_scores(val_values, split.validation, eval);
    rec.test = detail::evaluate_scores(test_values, split.test, eval);

    if (!method_dir.empty()) {
      namespace fs = std::filesystem;
      const fs::path dir = fs::path(method_dir) / "artifacts";
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) raise(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
      const std::string rel = "artifacts/trial_" + std::to_string(trial_id) + ".model.json";
      std::ofstream out(fs::path(method_dir) / rel);
      if (!out) raise(Errc::IoError, "cannot write model artifact for trial " +
                                         std::to_string(trial_id));
      out << artifact.dump(2) << "\n";
      rec.artifact_path = rel;
    }
  } catch (const Error& e) {
    rec.error_code = errc_name(e.code());
    rec.error_message = e.what();
    rec.validation.reset();
    rec.test.reset();
  } catch (const std::exception& e) {
    rec.error_code = errc_name(Errc::TrialFailed);
    rec.error_message = e.what();
    rec.validation.reset();
    rec.test.reset();
  }

  rec.duration_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - t0).count();
  return rec;
}

/// Plans and runs every trial. Records return ordered by trial_id and are
/// bit-identical regardless of n_jobs or scheduling: each trial derives its
/// own seed mix_seed(config.seed, trial_id) and writes to its own slot.
inline std::vector<TrialRecord> run_search(const PipelineSpec& pipeline,
                                           const EncodedSplit& split,
                                           const OptimizerConfig& config,
                                           const EvalSpec& eval,
                                           const std::string& method_dir = "") {
  validate_eval_spec(eval);
  const auto plan = plan_trials(combined_space(pipeline), config);
  std::vector<TrialRecord> records(plan.size());

  const auto worker_count =
      std::min<std::size_t>(static_cast<std::size_t>(config.n_jobs), plan.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    while (true) {
      const std::size_t t = next.fetch_add(1);
      if (t >= plan.size()) return;
      const auto id = static_cast<std::int64_t>(t);
      records[t] = run_trial(id, plan[t], pipeline, split, eval,
                             mix_seed(config.seed, static_cast<std::uint64_t>(id)),
                             method_dir);
    }
  };
  if (worker_count <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(worker_count);
    for (std::size_t i = 0; i < worker_count; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return records;
}

inline std::vector<TrialRecord> run_search(const PipelineSpec& pipeline,
                                           const SplitDataset& split,
                                           const OptimizerConfig& config,
                                           const EvalSpec& eval,
                                           const std::string& method_dir = "") {
  return run_search(pipeline, encode_split(split), config, eval, method_dir);
}

// ---------------------------------------------------------------------------
// Trial record serialization

namespace detail {

inline nlohmann::json trial_eval_to_json(const TrialEval& e) {
  return {{"accuracy", rate_to_json(e.performance.accuracy)},
          {"precision", rate_to_json(e.performance.precision)},
          {"recall", rate_to_json(e.performance.recall)},
          {"f1", rate_to_json(e.performance.f1)},
          {"tpr_at_fpr", rate_to_json(e.performance.tpr_at_fpr)},
          {"fpr_budget", rate_to_json(e.performance.fpr_budget)},
          {"realized_threshold", rate_to_json(e.performance.realized_threshold)},
          {"selected_performance", e.selected_performance},
          {"fairness_score", e.fairness_score},
          {"fairness_defined", e.fairness_defined},
          {"reference_group", e.reference_group}};
}

inline Rate rate_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  if (j.is_string()) return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

inline TrialEval trial_eval_from_json(const nlohmann::json& j) {
  TrialEval e;
  e.performance.accuracy = rate_from_json(j.at("accuracy"));
  e.performance.precision = rate_from_json(j.at("precision"));
  e.performance.recall = rate_from_json(j.at("recall"));
  e.performance.f1 = rate_from_json(j.at("f1"));
  e.performance.tpr_at_fpr = rate_from_json(j.at("tpr_at_fpr"));
  e.performance.fpr_budget = rate_from_json(j.at("fpr_budget"));
  e.performance.realized_threshold = rate_from_json(j.at("realized_threshold"));
  e.selected_performance = j.at("selected_performance").get<double>();
  e.fairness_score = j.at("fairness_score").get<double>();
  e.fairness_defined = j.at("fairness_defined").get<bool>();
  e.reference_group = j.at("reference_group").get<std::string>();
  return e;
}

}  // namespace detail

inline nlohmann::json trial_to_json(const TrialRecord& rec, const EvalSpec& eval) {
  nlohmann::json j{{"trial_id", rec.trial_id},
                   {"params", detail::params_to_json(rec.params)},
                   {"seed", rec.seed},
                   {"fairness",
                    {{"metric", eval.fairness_metric},
                     {"performance_metric", eval.performance_metric},
                     {"tau", eval.tau},
                     {"alpha", eval.alpha}}},
                   {"duration_ms", rec.duration_ms}};
  if (rec.validation) j["validation"] = detail::trial_eval_to_json(*rec.validation);
  if (rec.test) j["test"] = detail::trial_eval_to_json(*rec.test);
  if (!rec.artifact_path.empty()) j["artifact_path"] = rec.artifact_path;
  if (rec.error_code)
    j["error"] = {{"code", *rec.error_code}, {"message", rec.error_message.value_or("")}};
  return j;
}

inline TrialRecord trial_from_json(const nlohmann::json& j) {
  TrialRecord rec;
  rec.trial_id = j.at("trial_id").get<std::int64_t>();
  rec.params = detail::params_from_json(j.at("params"));
  rec.seed = j.at("seed").get<std::uint64_t>();
  rec.duration_ms = j.at("duration_ms").get<std::int64_t>();
  if (j.contains("validation"))
    rec.validation = detail::trial_eval_from_json(j.at("validation"));
  if (j.contains("test")) rec.test = detail::trial_eval_from_json(j.at("test"));
  if (j.contains("artifact_path")) rec.artifact_path = j.at("artifact_path").get<std::string>();
  if (j.contains("error")) {
    rec.error_code = j.at("error").at("code").get<std::string>();
    rec.error_message = j.at("error").at("message").get<std::string>();
  }
  return rec;
}

}  // namespace fairflow
