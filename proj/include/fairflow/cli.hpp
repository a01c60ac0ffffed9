#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairflow/analysis.hpp"
#include "fairflow/audit.hpp"
#include "fairflow/errors.hpp"
#include "fairflow/experiment.hpp"
#include "fairflow/render.hpp"
#include "fairflow/tabular.hpp"
#include "fairflow/yaml.hpp"

namespace fairflow::cli {

// Exit codes are a stable contract: 0 success, 2 configuration/input error,
// 3 runtime error.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kRuntimeError = 3;

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot write " + path.string());
  out << content;
  if (!out) raise(Errc::IoError, "failed writing " + path.string());
}

inline std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

/// flag > FAIRFLOW_SEED env > config value.
inline std::optional<std::uint64_t> seed_override(const std::optional<std::uint64_t>& flag) {
  if (flag) return flag;
  if (const char* env = std::getenv("FAIRFLOW_SEED")) {
    const std::string s(env);
    // digits only: stoull would silently wrap a negative value
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      raise(Errc::SchemaError, "FAIRFLOW_SEED must be a non-negative integer, got '" + s + "'");
    try {
      return static_cast<std::uint64_t>(std::stoull(s));
    } catch (const std::exception&) {
      raise(Errc::SchemaError, "FAIRFLOW_SEED must be a non-negative integer, got '" + s + "'");
    }
  }
  return std::nullopt;
}

inline void write_render(const RenderResult& r, const std::filesystem::path& svg_path) {
  write_file(svg_path, r.svg);
  write_file(svg_path.string() + ".json", r.sidecar.dump(2) + "\n");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// run

inline int cmd_run(const std::string& config_path, const std::string& out_dir, bool force,
                   std::optional<std::uint64_t> seed_flag) {
  ExperimentConfig cfg;
  std::string config_text;
  try {
    config_text = detail::read_file(config_path);
    nlohmann::json doc = yaml::parse(config_text);
    if (const auto seed = detail::seed_override(seed_flag)) {
      doc["global_seed"] = *seed;
      config_text.clear();  // the effective config differs; embed its echo instead
    }
    cfg = parse_config_json(doc);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    const ResultStore store = run_experiment(cfg, out_dir, force, config_text);

    const PointCollection selection = collect_points(store, /*use_test=*/false);
    if (selection.points.empty())
      raise(Errc::TooFewTrials, "no completed trials with defined fairness; nothing to analyze");
    const auto frontier = pareto_frontier(selection.points);
    const auto best = best_tradeoff(selection.points, cfg.evaluation.alpha);
    const auto summaries =
        compare_methods(store, cfg.evaluation.alpha, 1000, 0.95,
                        mix_seed(cfg.global_seed, "analysis"));

    const nlohmann::json analysis =
        analysis_to_json(selection, frontier, best, cfg.evaluation.alpha, summaries);
    detail::write_file(store.root() / "analysis.json", analysis.dump(2) + "\n");
    detail::write_render(render_model_selection(selection.points, frontier, best),
                         store.root() / "model_selection.svg");
    detail::write_render(render_method_comparison(summaries),
                         store.root() / "method_comparison.svg");

    // summary table: best validation trade-off per method + test-score CI
    std::cout << "experiment " << cfg.experiment_id << ": "
              << selection.points.size() << " trials analyzed ("
              << selection.n_failed << " failed, " << selection.n_excluded
              << " excluded)\n";
    std::cout << "method                    best_trial  performance  fairness  combined"
                 "  test_ci\n";
    for (const auto& s : summaries) {
      std::vector<TradeoffPoint> mine;
      for (const auto& p : selection.points)
        if (p.trial_ref.method == s.method) mine.push_back(p);
      std::string row = s.method;
      row.resize(26, ' ');
      if (mine.empty()) {
        row += "-";
      } else {
        const auto b = best_tradeoff(mine, cfg.evaluation.alpha);
        const double combined = cfg.evaluation.alpha * b.performance +
                                (1.0 - cfg.evaluation.alpha) * b.fairness;
        std::string id = std::to_string(b.trial_ref.trial_id);
        id.resize(12, ' ');
        row += id + detail::fmt4(b.performance) + "       " + detail::fmt4(b.fairness) +
               "    " + detail::fmt4(combined);
      }
      row += "  [" + detail::fmt4(s.ci_low) + ", " + detail::fmt4(s.ci_high) + "]";
      std::cout << row << "\n";
    }
    std::cout << "best trade-off: " << best.trial_ref.dataset << "/" << best.trial_ref.method
              << "/trial_" << best.trial_ref.trial_id << " (performance "
              << detail::fmt4(best.performance) << ", fairness "
              << detail::fmt4(best.fairness) << ")\n";
    std::cout << "store: " << store.root().string() << "\n";
    return kOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

// ---------------------------------------------------------------------------
// audit

inline int cmd_audit(const std::string& scores_path, const std::string& score_column,
                     const std::string& labels_column, const std::string& group_column,
                     const std::optional<std::string>& reference, double tau,
                     const std::string& metric, double threshold,
                     const std::string& out_path) {
  try {
    const std::vector<ColumnSpec> schema{{score_column, ColumnKind::Numeric},
                                         {labels_column, ColumnKind::BinaryLabel},
                                         {group_column, ColumnKind::SensitiveGroup}};
    const Dataset data = load_csv(scores_path, schema);
    const auto& scores = data.column(data.column_index(score_column)).numeric;
    const auto decisions = binarize(scores, threshold);
    const auto metrics = group_metrics(group_confusion(decisions, data.labels(),
                                                       data.group_names()));
    const ReferencePolicy policy = reference ? ReferencePolicy::explicit_group(*reference)
                                             : ReferencePolicy::largest();
    const DisparityReport report = disparities(metrics, metric, policy, tau);
    const PerformanceMetrics perf = performance_with_scores(scores, data.labels(), threshold);

    const auto show = [](const Rate& r) {
      if (!r) return std::string("undefined");
      if (std::isinf(*r)) return std::string("inf");
      return detail::fmt4(*r);
    };
    std::cout << "group      tp    fp    tn    fn    tpr       fpr       precision  ppr\n";
    for (const auto& m : metrics) {
      std::string row = m.group;
      row.resize(10, ' ');
      const auto num = [](std::uint64_t v) {
        std::string s = std::to_string(v);
        s.resize(6, ' ');
        return s;
      };
      std::string tpr = show(m.tpr), fpr = show(m.fpr), prec = show(m.precision);
      tpr.resize(10, ' ');
      fpr.resize(10, ' ');
      prec.resize(11, ' ');
      std::cout << row << " " << num(m.counts.tp) << num(m.counts.fp) << num(m.counts.tn)
                << num(m.counts.fn) << tpr << fpr << prec << show(m.ppr) << "\n";
    }
    std::cout << "\ndisparity (" << report.metric << ", reference " << report.reference_group
              << ", tau " << detail::fmt4(report.tau) << "):\n";
    for (const auto& e : report.per_group) {
      std::string row = e.group;
      row.resize(10, ' ');
      std::cout << row << " " << show(e.disparity) << (e.fair ? "  fair" : "  unfair") << "\n";
    }
    std::cout << "\naccuracy " << show(perf.accuracy) << ", fairness score "
              << detail::fmt4(fairness_score_from(report)) << "\n";

    nlohmann::json doc = audit_to_json(metrics, report, perf);
    detail::write_file(out_path, doc.dump(2) + "\n");
    return kOk;
  } catch (const Error& e) {
    const bool config = e.code() == Errc::MissingColumn || e.code() == Errc::SchemaError ||
                        e.code() == Errc::UnknownMetric || e.code() == Errc::UnknownGroup ||
                        e.code() == Errc::IoError || e.code() == Errc::ParseError;
    std::cerr << "error: " << e.what() << "\n";
    return config ? kConfigError : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

// ---------------------------------------------------------------------------
// plot

inline int cmd_plot(const std::string& store_dir, const std::string& kind,
                    const std::string& out_path) {
  nlohmann::json analysis;
  try {
    const std::string text = detail::read_file(
        (std::filesystem::path(store_dir) / "analysis.json").string());
    analysis = nlohmann::json::parse(text);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: invalid analysis.json: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (kind == "model_selection") {
      std::vector<TradeoffPoint> points, frontier;
      for (const auto& p : analysis.at("points"))
        points.push_back(fairflow::detail::point_from_json(p));
      for (const auto& p : analysis.at("frontier"))
        frontier.push_back(fairflow::detail::point_from_json(p));
      const TradeoffPoint best = fairflow::detail::point_from_json(analysis.at("best"));
      detail::write_render(render_model_selection(points, frontier, best), out_path);
    } else {
      std::vector<MethodSummary> summaries;
      for (const auto& s : analysis.at("methods"))
        summaries.push_back(fairflow::detail::summary_from_json(s));
      detail::write_render(render_method_comparison(summaries), out_path);
    }
    std::cout << "wrote " << out_path << "\n";
    return kOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

// ---------------------------------------------------------------------------
// validate-config

inline int cmd_validate_config(const std::string& config_path) {
  try {
    parse_config(config_path);
    std::cout << "valid\n";
    return kOk;
  } catch (const Error& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return kConfigError;
  }
}

// ---------------------------------------------------------------------------
// generate-synthetic

inline int cmd_generate_synthetic(std::int64_t rows, std::int64_t groups,
                                  std::vector<double> base_rates,
                                  std::vector<double> fractions,
                                  std::vector<double> separation, std::uint64_t seed,
                                  const std::string& out_path) {
  try {
    const auto k = static_cast<std::size_t>(groups);
    if (groups < 2) raise(Errc::InvalidFractions, "--groups must be at least 2");
    if (fractions.empty()) {
      fractions.assign(k, 1.0 / static_cast<double>(k));
      double acc = 0.0;
      for (std::size_t i = 0; i + 1 < k; ++i) acc += fractions[i];
      fractions[k - 1] = 1.0 - acc;
    }
    if (base_rates.empty()) base_rates.assign(k, 0.5);
    if (separation.empty()) separation.assign(k, 1.0);
    if (separation.size() == 1 && k > 1) separation.assign(k, separation[0]);
    if (fractions.size() != k || base_rates.size() != k || separation.size() != k)
      raise(Errc::InvalidFractions,
            "--fractions, --base-rates and --separation must list one value per group");

    const Dataset data = generate_synthetic(static_cast<std::size_t>(rows), fractions,
                                            base_rates, separation, seed);
    write_csv(data, out_path);
    std::cout << "wrote " << out_path << " (" << data.n_rows() << " rows, " << k
              << " groups)\n";
    return kOk;
  } catch (const Error& e) {
    const bool config = e.code() == Errc::InvalidFractions || e.code() == Errc::SchemaError;
    std::cerr << "error: " << e.what() << "\n";
    return config ? kConfigError : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

// ---------------------------------------------------------------------------
// list-methods

inline int cmd_list_methods() {
  const auto dump = [](const char* family, const std::vector<std::string>& kinds) {
    std::cout << family << ":\n";
    for (const auto& k : kinds) {
      std::cout << "  " << k;
      const auto params = MethodRegistry::declared_params(k);
      if (!params.empty()) {
        std::cout << " (";
        for (std::size_t i = 0; i < params.size(); ++i)
          std::cout << (i ? ", " : "") << params[i];
        std::cout << ")";
      }
      std::cout << "\n";
    }
  };
  dump("preprocessing", MethodRegistry::pre_kinds());
  dump("estimators", MethodRegistry::estimator_kinds());
  dump("postprocessing", MethodRegistry::post_kinds());
  return kOk;
}

// ---------------------------------------------------------------------------

inline int main(int argc, char** argv) {
  CLI::App app{"fairflow: fair-ML experimentation engine"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  std::string run_config, run_out = "results";
  bool run_force = false;
  std::optional<std::uint64_t> run_seed;
  run->add_option("--config", run_config, "experiment config (YAML)")->required();
  run->add_option("--out", run_out, "output root directory");
  run->add_flag("--force", run_force, "overwrite an existing result store");
  run->add_option("--seed", run_seed, "override global_seed (precedence: flag > FAIRFLOW_SEED > config)");

  auto* audit = app.add_subcommand("audit", "audit a CSV of scores, labels and groups");
  std::string audit_scores, audit_score_col = "score", audit_labels, audit_group;
  std::optional<std::string> audit_reference;
  double audit_tau = 0.8, audit_threshold = 0.5;
  std::string audit_metric = "fpr", audit_out = "audit.json";
  audit->add_option("--scores", audit_scores, "CSV file with scores, labels and groups")->required();
  audit->add_option("--score-column", audit_score_col, "score column name");
  audit->add_option("--labels-column", audit_labels, "label column name")->required();
  audit->add_option("--group-column", audit_group, "sensitive group column name")->required();
  audit->add_option("--reference", audit_reference, "explicit reference group (default: largest)");
  audit->add_option("--tau", audit_tau, "fairness ratio threshold");
  audit->add_option("--metric", audit_metric, "disparity metric (tpr, fpr, ppr, ...)");
  audit->add_option("--threshold", audit_threshold, "decision threshold on scores");
  audit->add_option("--out", audit_out, "audit JSON output path");

  auto* plot = app.add_subcommand("plot", "re-render a plot from a stored analysis");
  std::string plot_store, plot_kind, plot_out;
  plot->add_option("--store", plot_store, "result store directory")->required();
  plot->add_option("--kind", plot_kind, "model_selection or method_comparison")
      ->required()
      ->check(CLI::IsMember({"model_selection", "method_comparison"}));
  plot->add_option("--out", plot_out, "output SVG path")->required();

  auto* validate = app.add_subcommand("validate-config", "check a config file");
  std::string validate_path;
  validate->add_option("--config", validate_path, "experiment config (YAML)")->required();

  auto* gen = app.add_subcommand("generate-synthetic", "write a synthetic dataset CSV");
  std::int64_t gen_rows = 600, gen_groups = 2;
  std::vector<double> gen_rates, gen_fractions, gen_separation;
  std::uint64_t gen_seed = 42;
  std::string gen_out;
  gen->add_option("--rows", gen_rows, "number of rows");
  gen->add_option("--groups", gen_groups, "number of groups");
  gen->add_option("--base-rates", gen_rates, "per-group positive rates")->delimiter(',');
  gen->add_option("--fractions", gen_fractions, "per-group population fractions")->delimiter(',');
  gen->add_option("--separation", gen_separation, "per-group class separation")->delimiter(',');
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output CSV path")->required();

  app.add_subcommand("list-methods", "list registered method kinds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  if (run->parsed()) return cmd_run(run_config, run_out, run_force, run_seed);
  if (audit->parsed())
    return cmd_audit(audit_scores, audit_score_col, audit_labels, audit_group,
                     audit_reference, audit_tau, audit_metric, audit_threshold, audit_out);
  if (plot->parsed()) return cmd_plot(plot_store, plot_kind, plot_out);
  if (validate->parsed()) return cmd_validate_config(validate_path);
  if (gen->parsed())
    return cmd_generate_synthetic(gen_rows, gen_groups, gen_rates, gen_fractions,
                                  gen_separation, gen_seed, gen_out);
  return cmd_list_methods();
}

}  // namespace fairflow::cli
