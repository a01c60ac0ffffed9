#include "fairflow/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairflow/errors.hpp"
#include "fairflow/prng.hpp"

namespace fairflow {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  EXPECT_TRUE(in.good()) << p;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fairflow_experiment_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// config parsing

nlohmann::json base_doc() {
  return nlohmann::json::parse(R"({
    "version": "fairflow-config/1",
    "experiment_id": "exp1",
    "global_seed": 42,
    "datasets": [{
      "name": "d1",
      "source": "synthetic",
      "synthetic": {"n_rows": 120, "group_fractions": [0.6, 0.4], "base_rates": [0.7, 0.3]},
      "split": {"proportions": [0.6, 0.2, 0.2]}
    }],
    "methods": [{
      "name": "plain",
      "estimator": {
        "kind": "logreg",
        "space": {"learning_rate": {"type": "logfloat", "low": 0.05, "high": 0.5}}
      }
    }],
    "optimization": {"n_trials": 3},
    "evaluation": {"fairness_metric": "ppr"}
  })");
}

void expect_schema_error(const nlohmann::json& doc, const std::string& fragment,
                         Errc code = Errc::SchemaError) {
  try {
    parse_config_json(doc);
    FAIL() << "expected failure mentioning: " << fragment;
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

TEST(ParseConfig, PopulatesAllFields) {
  const auto cfg = parse_config_json(base_doc());
  EXPECT_EQ(cfg.experiment_id, "exp1");
  EXPECT_EQ(cfg.global_seed, 42u);
  ASSERT_EQ(cfg.datasets.size(), 1u);
  EXPECT_EQ(cfg.datasets[0].name, "d1");
  ASSERT_TRUE(cfg.datasets[0].synthetic.has_value());
  EXPECT_EQ(cfg.datasets[0].synthetic->n_rows, 120u);
  EXPECT_EQ(cfg.datasets[0].split.proportions[0], 0.6);
  ASSERT_EQ(cfg.methods.size(), 1u);
  EXPECT_EQ(cfg.methods[0].estimator_kind, "logreg");
  ASSERT_EQ(cfg.methods[0].estimator_space.size(), 1u);
  EXPECT_EQ(cfg.methods[0].estimator_space[0].first, "learning_rate");
  EXPECT_EQ(cfg.optimization.n_trials, 3);
  EXPECT_EQ(cfg.evaluation.fairness_metric, "ppr");
  EXPECT_EQ(cfg.evaluation.tau, 0.8);  // default
}

TEST(ParseConfig, DerivedSeedsFollowTheChain) {
  const auto cfg = parse_config_json(base_doc());
  const std::uint64_t base = dataset_seed(42, "d1");
  EXPECT_EQ(cfg.datasets[0].split.seed, mix_seed(base, "split"));
  EXPECT_EQ(cfg.datasets[0].synthetic->seed, mix_seed(base, "generate"));

  // explicit seeds override the derivation
  auto doc = base_doc();
  doc["datasets"][0]["synthetic"]["seed"] = 7;
  doc["datasets"][0]["split"]["seed"] = 8;
  const auto cfg2 = parse_config_json(doc);
  EXPECT_EQ(cfg2.datasets[0].synthetic->seed, 7u);
  EXPECT_EQ(cfg2.datasets[0].split.seed, 8u);
}

TEST(ParseConfig, ErrorsNameTheExactField) {
  auto doc = base_doc();
  doc.erase("version");
  expect_schema_error(doc, "config: missing required key 'version'");

  doc = base_doc();
  doc["version"] = "fairflow-config/2";
  expect_schema_error(doc, "version: unsupported config version");

  doc = base_doc();
  doc["methods"][0]["estimator"]["space"]["learning_rate"]["low"] = "fast";
  expect_schema_error(doc, "methods[0].estimator.space.learning_rate.low: expected a number");

  doc = base_doc();
  doc["methods"][0]["estimator"]["space"]["learning_rate"]["low"] = 2.0;
  expect_schema_error(doc, "methods[0].estimator.space.learning_rate");

  doc = base_doc();
  doc["datasets"][0]["split"]["proportions"] = {0.5, 0.5};
  expect_schema_error(doc, "datasets[0].split.proportions: expected exactly 3");

  doc = base_doc();
  doc["datasets"][0]["split"]["method"] = "stratified";
  expect_schema_error(doc, "datasets[0].split.method: unknown split method");
}

TEST(ParseConfig, UnknownKeysAreRejectedEverywhere) {
  auto doc = base_doc();
  doc["bogus"] = 1;
  expect_schema_error(doc, "config: unknown key 'bogus'");

  doc = base_doc();
  doc["datasets"][0]["extra"] = 1;
  expect_schema_error(doc, "datasets[0]: unknown key 'extra'");

  doc = base_doc();
  doc["evaluation"]["metric"] = "accuracy";
  expect_schema_error(doc, "evaluation: unknown key 'metric'");

  doc = base_doc();
  doc["optimization"]["seed"] = 1;  // seeds derive from global_seed only
  expect_schema_error(doc, "optimization: unknown key 'seed'");
}

TEST(ParseConfig, NamesMustBeUniqueIdentifiers) {
  auto doc = base_doc();
  doc["datasets"].push_back(doc["datasets"][0]);
  expect_schema_error(doc, "datasets[1].name: duplicate dataset name 'd1'",
                      Errc::DuplicateName);

  doc = base_doc();
  doc["methods"].push_back(doc["methods"][0]);
  expect_schema_error(doc, "methods[1].name: duplicate method name 'plain'",
                      Errc::DuplicateName);

  doc = base_doc();
  doc["experiment_id"] = "bad name!";
  expect_schema_error(doc, "not a valid identifier");
}

TEST(ParseConfig, MethodStageValidation) {
  auto doc = base_doc();
  doc["methods"][0]["estimator"]["kind"] = "svm";
  expect_schema_error(doc, "methods[0].estimator.kind: no estimator kind named 'svm'",
                      Errc::UnknownKind);

  doc = base_doc();
  doc["methods"][0]["estimator"]["space"]["momentum"] = {{"type", "float"},
                                                         {"low", 0.0},
                                                         {"high", 1.0}};
  expect_schema_error(doc, "'momentum' is not a parameter of kind 'logreg'");

  doc = base_doc();
  doc["methods"][0]["preprocessing"] = {{"kind", "smote"}};
  expect_schema_error(doc, "no pre-processing kind named 'smote'", Errc::UnknownKind);
}

TEST(ParseConfig, DatasetSourceValidation) {
  auto doc = base_doc();
  doc["datasets"][0]["source"] = "data.xlsx";
  doc["datasets"][0].erase("synthetic");
  expect_schema_error(doc, "datasets[0].source: must be 'synthetic' or a .csv/.parquet path");

  doc = base_doc();
  doc["datasets"][0]["schema"] = nlohmann::json::array();
  expect_schema_error(doc, "synthetic datasets declare no schema");

  doc = base_doc();
  doc["datasets"][0]["source"] = "data.csv";
  doc["datasets"][0].erase("synthetic");
  // a file source requires a schema
  expect_schema_error(doc, "datasets[0]: missing required key 'schema'");

  doc["datasets"][0]["schema"] = {{{"name", "x"}, {"kind", "numeric"}},
                                  {{"name", "y"}, {"kind", "binary_label"}}};
  expect_schema_error(doc, "datasets[0].schema");  // no sensitive_group column
}

TEST(ParseConfig, EvaluationValidation) {
  auto doc = base_doc();
  doc["evaluation"]["reference_policy"] = "largest_group";
  doc["evaluation"]["reference_group"] = "A";
  expect_schema_error(doc, "evaluation: reference_policy and reference_group");

  doc = base_doc();
  doc["evaluation"]["reference_policy"] = "median";
  expect_schema_error(doc, "unknown reference policy");

  doc = base_doc();
  doc["evaluation"]["fairness_metric"] = "auc";
  expect_schema_error(doc, "evaluation:", Errc::UnknownMetric);

  doc = base_doc();
  doc["evaluation"]["tau"] = 0.0;
  expect_schema_error(doc, "tau must lie in (0, 1]");

  doc = base_doc();
  doc["optimization"]["sampler"] = "bayes";
  expect_schema_error(doc, "optimization.sampler");

  doc = base_doc();
  doc["datasets"] = nlohmann::json::array();
  expect_schema_error(doc, "datasets: at least one dataset is required");

  doc = base_doc();
  doc["methods"] = nlohmann::json::array();
  expect_schema_error(doc, "methods: at least one method is required");
}

TEST(ParseConfig, AcceptsYamlText) {
  const std::string text = R"(version: fairflow-config/1
experiment_id: yaml_exp
datasets:
  - name: d1
    source: synthetic
    synthetic:
      n_rows: 100
      group_fractions: [0.5, 0.5]
      base_rates: [0.6, 0.4]
methods:
  - name: plain
    estimator:
      kind: logreg
evaluation:
  fairness_metric: tpr
)";
  const auto cfg = parse_config_text(text);
  EXPECT_EQ(cfg.experiment_id, "yaml_exp");
  EXPECT_EQ(cfg.global_seed, 42u);  // default
  EXPECT_EQ(cfg.evaluation.fairness_metric, "tpr");
  EXPECT_EQ(cfg.datasets[0].synthetic->n_rows, 100u);
}

TEST(ParseConfig, MissingFileIsIoError) {
  try {
    parse_config("/nonexistent/config.yaml");
    FAIL() << "expected IoError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IoError);
  }
}

TEST(ParseConfig, BundledExampleIsValid) {
  const auto cfg = parse_config(std::string(FAIRFLOW_CONFIG_DIR) + "/example.yaml");
  EXPECT_EQ(cfg.experiment_id, "synth_credit_baseline");
  EXPECT_EQ(cfg.methods.size(), 4u);
}

// ---------------------------------------------------------------------------
// config echo

TEST(ConfigEcho, EmitParseEmitIsStable) {
  DatasetSpec ds;
  ds.name = "synth";
  ds.source = "synthetic";
  ds.synthetic = SyntheticSpec{};
  const ExperimentConfig cfg = default_experiment(ds);
  validate_config(cfg);

  const std::string once = emit_config(cfg);
  const ExperimentConfig back = parse_config_text(once);
  const std::string twice = emit_config(back);
  EXPECT_EQ(once, twice);
  EXPECT_EQ(config_to_json(cfg), config_to_json(back));
}

TEST(ConfigEcho, BundledExampleRoundTrips) {
  const auto cfg = parse_config(std::string(FAIRFLOW_CONFIG_DIR) + "/example.yaml");
  const std::string once = emit_config(cfg);
  const auto back = parse_config_text(once);
  EXPECT_EQ(emit_config(back), once);
}

TEST(DefaultExperiment, ResolvesDerivedSeeds) {
  DatasetSpec ds;
  ds.name = "synth";
  ds.source = "synthetic";
  ds.synthetic = SyntheticSpec{};  // seed 0 means "derive"
  const ExperimentConfig cfg = default_experiment(ds);
  const std::uint64_t base = dataset_seed(42, "synth");
  EXPECT_EQ(cfg.datasets[0].split.seed, mix_seed(base, "split"));
  EXPECT_EQ(cfg.datasets[0].synthetic->seed, mix_seed(base, "generate"));
  EXPECT_EQ(cfg.methods.size(), 4u);
  EXPECT_EQ(cfg.optimization.n_trials, 50);
}

// ---------------------------------------------------------------------------
// dataset materialization

TEST(LoadDataset, SyntheticAndFileSources) {
  DatasetSpec synth;
  synth.name = "s";
  synth.source = "synthetic";
  synth.synthetic = SyntheticSpec{};
  synth.synthetic->n_rows = 150;
  synth.synthetic->seed = 5;
  const Dataset d = load_dataset(synth);
  EXPECT_EQ(d.n_rows(), 150u);

  DatasetSpec file;
  file.name = "scores";
  file.source = std::string(FAIRFLOW_TEST_DATA) + "/scores8.csv";
  file.schema = {{"score", ColumnKind::Numeric},
                 {"label", ColumnKind::BinaryLabel},
                 {"group", ColumnKind::SensitiveGroup}};
  EXPECT_EQ(load_dataset(file).n_rows(), 8u);
}

TEST(LoadDataset, FailureNamesTheDatasetAndInnerCode) {
  DatasetSpec file;
  file.name = "ghost";
  file.source = "/nonexistent/ghost.csv";
  file.schema = {{"score", ColumnKind::Numeric},
                 {"label", ColumnKind::BinaryLabel},
                 {"group", ColumnKind::SensitiveGroup}};
  try {
    load_dataset(file);
    FAIL() << "expected DatasetLoadError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DatasetLoadError);
    const std::string what = e.what();
    EXPECT_NE(what.find("dataset 'ghost'"), std::string::npos) << what;
    EXPECT_NE(what.find("IoError"), std::string::npos) << what;
  }
}

// ---------------------------------------------------------------------------
// result store

ExperimentConfig small_config() {
  auto doc = base_doc();
  doc["methods"].push_back(nlohmann::json{
      {"name", "threshold"},
      {"estimator", {{"kind", "logreg"}}},
      {"postprocessing",
       {{"kind", "group_threshold"},
        {"space",
         {{"target_rate", {{"type", "float"}, {"low", 0.2}, {"high", 0.8}}}}}}}});
  return parse_config_json(doc);
}

TEST(RunExperiment, WritesTheDocumentedLayout) {
  const fs::path out = scratch_dir("layout");
  const ExperimentConfig cfg = small_config();
  const ResultStore store = run_experiment(cfg, out.string());

  const fs::path root = out / "exp1";
  EXPECT_EQ(store.root(), root);
  EXPECT_TRUE(store.complete());
  EXPECT_EQ(slurp(root / "COMPLETE"), "complete\n");

  const auto manifest = nlohmann::json::parse(slurp(root / "manifest.json"));
  EXPECT_EQ(manifest.at("store_version"), "fairflow-store/1");
  EXPECT_EQ(manifest.at("experiment_id"), "exp1");
  EXPECT_EQ(manifest.at("global_seed"), 42);
  EXPECT_EQ(manifest.at("n_trials"), 3);
  ASSERT_EQ(manifest.at("cells").size(), 2u);
  EXPECT_EQ(manifest.at("cells")[0].at("dir"), "d1/plain");

  // the config text is embedded verbatim together with its hash
  const std::string text = manifest.at("config").get<std::string>();
  EXPECT_NO_THROW(parse_config_text(text));
  const std::string hash = manifest.at("config_fnv1a64").get<std::string>();
  ASSERT_EQ(hash.size(), 18u);
  EXPECT_EQ(hash.substr(0, 2), "0x");
  char want[19];
  std::snprintf(want, sizeof want, "0x%016llx",
                static_cast<unsigned long long>(fnv1a64(text)));
  EXPECT_EQ(hash, want);

  for (const char* method : {"plain", "threshold"})
    for (int k = 0; k < 3; ++k) {
      const auto trial =
          root / "d1" / method / ("trial_" + std::to_string(k) + ".json");
      ASSERT_TRUE(fs::exists(trial)) << trial;
      const auto j = nlohmann::json::parse(slurp(trial));
      EXPECT_EQ(j.at("trial_id"), k);
      ASSERT_TRUE(fs::exists(root / "d1" / method /
                             j.at("artifact_path").get<std::string>()));
    }
}

TEST(RunExperiment, TrialSeedsFollowTheCellChain) {
  const fs::path out = scratch_dir("seeds");
  const ExperimentConfig cfg = small_config();
  run_experiment(cfg, out.string());
  const ResultStore store = ResultStore::open(out / "exp1");
  EXPECT_EQ(store.config().experiment_id, "exp1");
  for (const char* method : {"plain", "threshold"}) {
    const auto trials = store.trials("d1", method);
    ASSERT_EQ(trials.size(), 3u);
    const std::uint64_t cell = cell_seed(42, "d1", method);
    for (std::size_t k = 0; k < trials.size(); ++k) {
      EXPECT_EQ(trials[k].trial_id, static_cast<std::int64_t>(k));
      EXPECT_EQ(trials[k].seed, mix_seed(cell, static_cast<std::uint64_t>(k)));
      EXPECT_TRUE(trials[k].ok());
    }
  }
}

TEST(RunExperiment, ExistingStoreNeedsForce) {
  const fs::path out = scratch_dir("force");
  const ExperimentConfig cfg = small_config();
  run_experiment(cfg, out.string());
  try {
    run_experiment(cfg, out.string());
    FAIL() << "expected StoreExists";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::StoreExists);
  }
  EXPECT_NO_THROW(run_experiment(cfg, out.string(), /*force=*/true));
}

TEST(RunExperiment, RerunsAreIdenticalIgnoringDurations) {
  const fs::path a = scratch_dir("rerun_a");
  const fs::path b = scratch_dir("rerun_b");
  const ExperimentConfig cfg = small_config();
  run_experiment(cfg, a.string());
  run_experiment(cfg, b.string());
  const auto diff = store_difference(a / "exp1", b / "exp1");
  EXPECT_FALSE(diff.has_value()) << *diff;
}

TEST(RunExperiment, DifferentSeedsProduceDifferentStores) {
  const fs::path a = scratch_dir("seed_a");
  const fs::path b = scratch_dir("seed_b");
  ExperimentConfig cfg = small_config();
  run_experiment(cfg, a.string());
  auto doc = base_doc();
  doc["global_seed"] = 43;
  run_experiment(parse_config_json(doc), b.string());
  const auto diff = store_difference(a / "exp1", b / "exp1");
  ASSERT_TRUE(diff.has_value());
  EXPECT_EQ(*diff, "manifest.json differs");
}

TEST(ResultStore, OpenRequiresManifest) {
  try {
    ResultStore::open("/nonexistent/store");
    FAIL() << "expected IoError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IoError);
  }
}

TEST(ValidateConfig, GuardsHandBuiltConfigs) {
  ExperimentConfig cfg;
  cfg.experiment_id = "ok";
  EXPECT_THROW(validate_config(cfg), Error);  // no datasets

  DatasetSpec ds;
  ds.name = "d";
  ds.source = "synthetic";  // but no synthetic parameters
  cfg.datasets.push_back(ds);
  PipelineSpec m;
  m.name = "m";
  m.estimator_kind = "logreg";
  cfg.methods.push_back(m);
  EXPECT_THROW(validate_config(cfg), Error);

  cfg.datasets[0].synthetic = SyntheticSpec{};
  EXPECT_NO_THROW(validate_config(cfg));

  cfg.methods[0].estimator_kind = "svm";
  try {
    validate_config(cfg);
    FAIL() << "expected UnknownKind";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownKind);
  }
}

}  // namespace
}  // namespace fairflow
