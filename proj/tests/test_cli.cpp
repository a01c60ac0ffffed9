#include "fairflow/cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairflow/errors.hpp"
#include "fairflow/tabular.hpp"

namespace fairflow {
namespace {

namespace fs = std::filesystem;

struct Captured {
  int rc = 0;
  std::string out;
  std::string err;
};

template <typename Fn>
Captured capture(Fn&& fn) {
  ::testing::internal::CaptureStdout();
  ::testing::internal::CaptureStderr();
  Captured c;
  c.rc = fn();
  c.out = ::testing::internal::GetCapturedStdout();
  c.err = ::testing::internal::GetCapturedStderr();
  return c;
}

/// Clears FAIRFLOW_SEED for the test's duration (and restores nothing: the
/// suite never expects an ambient value).
struct EnvGuard {
  EnvGuard() { unsetenv("FAIRFLOW_SEED"); }
  ~EnvGuard() { unsetenv("FAIRFLOW_SEED"); }
};

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fairflow_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  EXPECT_TRUE(in.good()) << p;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path write_config(const fs::path& dir, const std::string& experiment_id) {
  const fs::path path = dir / "config.yaml";
  std::ofstream out(path);
  out << "version: fairflow-config/1\n"
         "experiment_id: " << experiment_id << "\n"
         "datasets:\n"
         "  - name: d1\n"
         "    source: synthetic\n"
         "    synthetic:\n"
         "      n_rows: 120\n"
         "      group_fractions: [0.6, 0.4]\n"
         "      base_rates: [0.7, 0.3]\n"
         "methods:\n"
         "  - name: plain\n"
         "    estimator:\n"
         "      kind: logreg\n"
         "      space:\n"
         "        learning_rate:\n"
         "          type: logfloat\n"
         "          low: 0.05\n"
         "          high: 0.5\n"
         "  - name: threshold\n"
         "    estimator:\n"
         "      kind: logreg\n"
         "    postprocessing:\n"
         "      kind: group_threshold\n"
         "      space:\n"
         "        target_rate:\n"
         "          type: float\n"
         "          low: 0.2\n"
         "          high: 0.8\n"
         "optimization:\n"
         "  n_trials: 3\n"
         "evaluation:\n"
         "  fairness_metric: ppr\n";
  return path;
}

std::uint64_t manifest_seed(const fs::path& store_root) {
  const auto manifest = nlohmann::json::parse(slurp(store_root / "manifest.json"));
  return manifest.at("global_seed").get<std::uint64_t>();
}

// ---------------------------------------------------------------------------
// seed precedence

TEST(SeedOverride, FlagBeatsEnvBeatsNothing) {
  EnvGuard guard;
  EXPECT_FALSE(cli::detail::seed_override(std::nullopt).has_value());
  EXPECT_EQ(cli::detail::seed_override(7).value(), 7u);

  setenv("FAIRFLOW_SEED", "9", 1);
  EXPECT_EQ(cli::detail::seed_override(std::nullopt).value(), 9u);
  EXPECT_EQ(cli::detail::seed_override(7).value(), 7u);  // flag wins

  setenv("FAIRFLOW_SEED", "9x", 1);
  EXPECT_THROW(cli::detail::seed_override(std::nullopt), Error);
  setenv("FAIRFLOW_SEED", "-4", 1);
  EXPECT_THROW(cli::detail::seed_override(std::nullopt), Error);
}

// ---------------------------------------------------------------------------
// run + plot

TEST(CmdRun, ProducesStoreAnalysisAndPlots) {
  EnvGuard guard;
  const fs::path dir = scratch_dir("run");
  const fs::path config = write_config(dir, "cli_exp");
  const fs::path out_root = dir / "results";

  const auto r = capture([&] {
    return cli::cmd_run(config.string(), out_root.string(), false, std::nullopt);
  });
  ASSERT_EQ(r.rc, cli::kOk) << r.err;

  const fs::path store = out_root / "cli_exp";
  for (const char* f : {"COMPLETE", "manifest.json", "analysis.json",
                        "model_selection.svg", "model_selection.svg.json",
                        "method_comparison.svg", "method_comparison.svg.json"})
    EXPECT_TRUE(fs::exists(store / f)) << f;

  EXPECT_NE(r.out.find("experiment cli_exp"), std::string::npos);
  EXPECT_NE(r.out.find("best trade-off: d1/"), std::string::npos);
  EXPECT_NE(r.out.find("store: "), std::string::npos);
  EXPECT_NE(r.out.find("plain"), std::string::npos);
  EXPECT_NE(r.out.find("threshold"), std::string::npos);

  // the embedded config text is the verbatim file
  const auto manifest = nlohmann::json::parse(slurp(store / "manifest.json"));
  EXPECT_EQ(manifest.at("config").get<std::string>(), slurp(config));
  EXPECT_EQ(manifest_seed(store), 42u);

  // rerunning without --force refuses to clobber the store
  const auto again = capture([&] {
    return cli::cmd_run(config.string(), out_root.string(), false, std::nullopt);
  });
  EXPECT_EQ(again.rc, cli::kRuntimeError);
  EXPECT_NE(again.err.find("StoreExists"), std::string::npos);

  const auto forced = capture([&] {
    return cli::cmd_run(config.string(), out_root.string(), true, std::nullopt);
  });
  EXPECT_EQ(forced.rc, cli::kOk) << forced.err;
}

TEST(CmdRun, SeedPrecedenceReachesTheManifest) {
  EnvGuard guard;
  const fs::path dir = scratch_dir("run_seed");
  const fs::path config = write_config(dir, "seeded");

  setenv("FAIRFLOW_SEED", "9", 1);
  auto r = capture([&] {
    return cli::cmd_run(config.string(), (dir / "env").string(), false, std::nullopt);
  });
  ASSERT_EQ(r.rc, cli::kOk) << r.err;
  EXPECT_EQ(manifest_seed(dir / "env" / "seeded"), 9u);

  r = capture([&] {
    return cli::cmd_run(config.string(), (dir / "flag").string(), false, 7);
  });
  ASSERT_EQ(r.rc, cli::kOk) << r.err;
  EXPECT_EQ(manifest_seed(dir / "flag" / "seeded"), 7u);
  // an overridden seed invalidates the verbatim text; the echo is embedded
  const auto manifest =
      nlohmann::json::parse(slurp(dir / "flag" / "seeded" / "manifest.json"));
  const auto echoed = parse_config_text(manifest.at("config").get<std::string>());
  EXPECT_EQ(echoed.global_seed, 7u);

  setenv("FAIRFLOW_SEED", "nonsense", 1);
  r = capture([&] {
    return cli::cmd_run(config.string(), (dir / "bad").string(), false, std::nullopt);
  });
  EXPECT_EQ(r.rc, cli::kConfigError);
  EXPECT_NE(r.err.find("FAIRFLOW_SEED"), std::string::npos);
}

TEST(CmdRun, BadConfigIsAConfigError) {
  EnvGuard guard;
  const fs::path dir = scratch_dir("run_bad");
  const fs::path config = dir / "bad.yaml";
  std::ofstream(config) << "experiment_id: nope\n";
  const auto r = capture([&] {
    return cli::cmd_run(config.string(), (dir / "out").string(), false, std::nullopt);
  });
  EXPECT_EQ(r.rc, cli::kConfigError);
  EXPECT_NE(r.err.find("config error: "), std::string::npos);
  EXPECT_NE(r.err.find("missing required key 'version'"), std::string::npos);
}

TEST(CmdPlot, RegeneratesByteIdenticalSvgs) {
  EnvGuard guard;
  const fs::path dir = scratch_dir("plot");
  const fs::path config = write_config(dir, "plotted");
  const auto r = capture([&] {
    return cli::cmd_run(config.string(), dir.string(), false, std::nullopt);
  });
  ASSERT_EQ(r.rc, cli::kOk) << r.err;
  const fs::path store = dir / "plotted";

  const fs::path a_out = dir / "regen_a.svg";
  auto p = capture(
      [&] { return cli::cmd_plot(store.string(), "model_selection", a_out.string()); });
  ASSERT_EQ(p.rc, cli::kOk) << p.err;
  EXPECT_NE(p.out.find("wrote "), std::string::npos);
  EXPECT_EQ(slurp(a_out), slurp(store / "model_selection.svg"));
  EXPECT_EQ(slurp(a_out.string() + ".json"),
            slurp(store / "model_selection.svg.json"));

  const fs::path b_out = dir / "regen_b.svg";
  p = capture([&] { return cli::cmd_plot(store.string(), "method_comparison", b_out.string()); });
  ASSERT_EQ(p.rc, cli::kOk) << p.err;
  EXPECT_EQ(slurp(b_out), slurp(store / "method_comparison.svg"));

  p = capture([&] {
    return cli::cmd_plot((dir / "nostore").string(), "model_selection",
                         (dir / "x.svg").string());
  });
  EXPECT_EQ(p.rc, cli::kConfigError);
}

// ---------------------------------------------------------------------------
// audit

TEST(CmdAudit, WorkedExampleTableAndJson) {
  const std::string scores = std::string(FAIRFLOW_TEST_DATA) + "/scores8.csv";
  const fs::path dir = scratch_dir("audit");
  const std::string out = (dir / "audit.json").string();
  const auto r = capture([&] {
    return cli::cmd_audit(scores, "score", "label", "group", std::nullopt, 0.8, "fpr",
                          0.5, out);
  });
  ASSERT_EQ(r.rc, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("0.6667"), std::string::npos);   // B's fpr disparity
  EXPECT_NE(r.out.find("unfair"), std::string::npos);
  EXPECT_NE(r.out.find("accuracy 0.6250"), std::string::npos);
  EXPECT_NE(r.out.find("fairness score 0.6667"), std::string::npos);
  EXPECT_NE(r.out.find("reference A"), std::string::npos);

  const auto doc = nlohmann::json::parse(slurp(out));
  EXPECT_EQ(doc.at("disparities").at("reference"), "A");
  EXPECT_EQ(doc.at("disparities").at("per_group").at("B").at("disparity"), 2.0 / 3.0);
  EXPECT_EQ(doc.at("groups").size(), 2u);
}

TEST(CmdAudit, InputProblemsAreConfigErrors) {
  const std::string scores = std::string(FAIRFLOW_TEST_DATA) + "/scores8.csv";
  const fs::path dir = scratch_dir("audit_err");
  const std::string out = (dir / "audit.json").string();

  auto r = capture([&] {
    return cli::cmd_audit(scores, "confidence", "label", "group", std::nullopt, 0.8,
                          "fpr", 0.5, out);
  });
  EXPECT_EQ(r.rc, cli::kConfigError);
  EXPECT_NE(r.err.find("'confidence'"), std::string::npos);

  r = capture([&] {
    return cli::cmd_audit(scores, "score", "label", "group", std::nullopt, 0.8, "auc",
                          0.5, out);
  });
  EXPECT_EQ(r.rc, cli::kConfigError);

  r = capture([&] {
    return cli::cmd_audit(scores, "score", "label", "group", std::string("Z"), 0.8,
                          "fpr", 0.5, out);
  });
  EXPECT_EQ(r.rc, cli::kConfigError);
  EXPECT_NE(r.err.find("'Z'"), std::string::npos);

  r = capture([&] {
    return cli::cmd_audit("/nonexistent.csv", "score", "label", "group", std::nullopt,
                          0.8, "fpr", 0.5, out);
  });
  EXPECT_EQ(r.rc, cli::kConfigError);
}

// ---------------------------------------------------------------------------
// validate-config / generate-synthetic / list-methods

TEST(CmdValidateConfig, ReportsValidityWithExitCodes) {
  EnvGuard guard;
  const auto ok = capture([&] {
    return cli::cmd_validate_config(std::string(FAIRFLOW_CONFIG_DIR) + "/example.yaml");
  });
  EXPECT_EQ(ok.rc, cli::kOk);
  EXPECT_EQ(ok.out, "valid\n");

  const fs::path dir = scratch_dir("validate");
  std::ofstream(dir / "bad.yaml") << "version: fairflow-config/1\n";
  const auto bad = capture([&] {
    return cli::cmd_validate_config((dir / "bad.yaml").string());
  });
  EXPECT_EQ(bad.rc, cli::kConfigError);
  EXPECT_NE(bad.err.find("invalid: "), std::string::npos);

  const auto missing = capture([&] {
    return cli::cmd_validate_config((dir / "nope.yaml").string());
  });
  EXPECT_EQ(missing.rc, cli::kConfigError);
}

TEST(CmdGenerateSynthetic, WritesALoadableDeterministicCsv) {
  const fs::path dir = scratch_dir("gen");
  const std::string out1 = (dir / "a.csv").string();
  const std::string out2 = (dir / "b.csv").string();

  auto r = capture([&] {
    return cli::cmd_generate_synthetic(200, 2, {0.7, 0.3}, {0.6, 0.4}, {1.0}, 11, out1);
  });
  ASSERT_EQ(r.rc, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("(200 rows, 2 groups)"), std::string::npos);

  r = capture([&] {
    return cli::cmd_generate_synthetic(200, 2, {0.7, 0.3}, {0.6, 0.4}, {1.0}, 11, out2);
  });
  ASSERT_EQ(r.rc, cli::kOk);
  EXPECT_EQ(slurp(out1), slurp(out2));

  const std::vector<ColumnSpec> schema{{"x1", ColumnKind::Numeric},
                                       {"x2", ColumnKind::Numeric},
                                       {"group", ColumnKind::SensitiveGroup},
                                       {"y", ColumnKind::BinaryLabel}};
  const Dataset d = load_csv(out1, schema);
  EXPECT_EQ(d.n_rows(), 200u);
  EXPECT_EQ(d.group_levels().size(), 2u);

  const auto bad = capture([&] {
    return cli::cmd_generate_synthetic(200, 1, {}, {}, {}, 11, (dir / "c.csv").string());
  });
  EXPECT_EQ(bad.rc, cli::kConfigError);

  const auto mismatch = capture([&] {
    return cli::cmd_generate_synthetic(200, 3, {0.5, 0.5}, {}, {}, 11,
                                       (dir / "d.csv").string());
  });
  EXPECT_EQ(mismatch.rc, cli::kConfigError);
}

TEST(CmdListMethods, NamesEveryFamilyAndParams) {
  const auto r = capture([] { return cli::cmd_list_methods(); });
  EXPECT_EQ(r.rc, cli::kOk);
  for (const char* needle :
       {"preprocessing", "estimators", "postprocessing", "reweighing",
        "prevalence_sampling", "logreg", "fair_logreg (", "group_threshold",
        "fairness_lambda", "target_rate"})
    EXPECT_NE(r.out.find(needle), std::string::npos) << needle;
}

// ---------------------------------------------------------------------------
// argv dispatch

int run_main(std::vector<std::string> args) {
  std::vector<char*> argv;
  argv.reserve(args.size());
  for (auto& a : args) argv.push_back(a.data());
  return cli::main(static_cast<int>(argv.size()), argv.data());
}

TEST(CliMain, DispatchesAndValidatesArguments) {
  EnvGuard guard;
  auto r = capture([&] { return run_main({"fairflow", "list-methods"}); });
  EXPECT_EQ(r.rc, cli::kOk);
  EXPECT_NE(r.out.find("estimators"), std::string::npos);

  // a subcommand is required
  r = capture([&] { return run_main({"fairflow"}); });
  EXPECT_EQ(r.rc, cli::kConfigError);

  // unknown subcommand
  r = capture([&] { return run_main({"fairflow", "frobnicate"}); });
  EXPECT_EQ(r.rc, cli::kConfigError);

  // --kind is restricted to the two plots
  r = capture([&] {
    return run_main({"fairflow", "plot", "--store", "s", "--kind", "c", "--out", "o"});
  });
  EXPECT_EQ(r.rc, cli::kConfigError);

  // --help succeeds
  r = capture([&] { return run_main({"fairflow", "--help"}); });
  EXPECT_EQ(r.rc, cli::kOk);
  EXPECT_NE(r.out.find("run"), std::string::npos);

  // full audit through argv
  const fs::path dir = scratch_dir("main_audit");
  r = capture([&] {
    return run_main({"fairflow", "audit", "--scores",
                     std::string(FAIRFLOW_TEST_DATA) + "/scores8.csv",
                     "--labels-column", "label", "--group-column", "group", "--out",
                     (dir / "audit.json").string()});
  });
  EXPECT_EQ(r.rc, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("0.6667"), std::string::npos);
}

}  // namespace
}  // namespace fairflow
