#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "fairflow/errors.hpp"
#include "fairflow/hyperopt.hpp"
#include "fairflow/methods.hpp"
#include "fairflow/parquet.hpp"
#include "fairflow/prng.hpp"
#include "fairflow/tabular.hpp"
#include "fairflow/yaml.hpp"

namespace fairflow {

inline constexpr const char* kConfigVersion = "fairflow-config/1";
inline constexpr const char* kStoreVersion = "fairflow-store/1";
inline constexpr const char* kCompleteMarker = "complete\n";

// ---------------------------------------------------------------------------
// Configuration types

struct SyntheticSpec {
  std::size_t n_rows = 600;
  std::vector<double> group_fractions{0.7, 0.3};
  std::vector<double> base_rates{0.8, 0.2};
  std::vector<double> separation{1.0, 1.0};
  std::uint64_t seed = 0;
};

struct DatasetSpec {
  std::string name;
  std::string source;  // "synthetic" or a .csv/.parquet path
  std::optional<SyntheticSpec> synthetic;
  std::vector<ColumnSpec> schema;  // file sources only
  SplitSpec split;
};

struct ExperimentConfig {
  std::string experiment_id;
  std::uint64_t global_seed = 42;
  std::vector<DatasetSpec> datasets;
  std::vector<PipelineSpec> methods;
  OptimizerConfig optimization;  // seed field unused; cells derive their own
  EvalSpec evaluation;
};

// ---------------------------------------------------------------------------
// Seed derivation
//
// Every component seed derives from global_seed through mix_seed over a
// labelled name, so adding or reordering config entries never shifts the
// seeds of unrelated components:
//   dataset_seed  = mix_seed(global_seed, "dataset:" + dataset_name)
//   split seed    = mix_seed(dataset_seed, "split")        (when defaulted)
//   generator     = mix_seed(dataset_seed, "generate")     (when defaulted)
//   cell seed     = mix_seed(dataset_seed, "method:" + method_name)
//   trial seed    = mix_seed(cell_seed, trial_id)          (hyperopt)

inline std::uint64_t dataset_seed(std::uint64_t global_seed, const std::string& dataset) {
  return mix_seed(global_seed, "dataset:" + dataset);
}

inline std::uint64_t cell_seed(std::uint64_t global_seed, const std::string& dataset,
                               const std::string& method) {
  return mix_seed(dataset_seed(global_seed, dataset), "method:" + method);
}

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

inline bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

/// JSON node plus the dotted path to it, so every schema error names the
/// exact field (e.g. methods[1].estimator.space.learning_rate.low).
class ConfNode {
 public:
  ConfNode(const nlohmann::json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const nlohmann::json& raw() const { return *j_; }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

  ConfNode child(const std::string& key) const {
    if (!j_->is_object()) fail("expected a mapping");
    if (!j_->contains(key)) fail("missing required key '" + key + "'");
    return ConfNode((*j_)[key], path_.empty() ? key : path_ + "." + key);
  }

  std::optional<ConfNode> opt(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return child(key);
  }

  void allow_keys(std::initializer_list<const char*> keys) const {
    if (!j_->is_object()) fail("expected a mapping");
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      bool ok = false;
      for (const char* k : keys)
        if (it.key() == k) {
          ok = true;
          break;
        }
      if (!ok) fail("unknown key '" + it.key() + "'");
    }
  }

  std::size_t size() const {
    if (!j_->is_array()) fail("expected a sequence");
    return j_->size();
  }

  ConfNode item(std::size_t i) const {
    return ConfNode((*j_)[i], path_ + "[" + std::to_string(i) + "]");
  }

  std::string str() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }

  std::string identifier() const {
    const std::string s = str();
    if (!is_identifier(s))
      fail("'" + s + "' is not a valid identifier (letters, digits, _ and -)");
    return s;
  }

  std::int64_t integer() const {
    if (!j_->is_number_integer()) fail("expected an integer");
    return j_->get<std::int64_t>();
  }

  std::uint64_t unsigned_integer() const {
    if (j_->is_number_unsigned()) return j_->get<std::uint64_t>();
    if (j_->is_number_integer() && j_->get<std::int64_t>() >= 0)
      return static_cast<std::uint64_t>(j_->get<std::int64_t>());
    fail("expected a non-negative integer");
  }

  double real() const {
    if (!j_->is_number()) fail("expected a number");
    return j_->get<double>();
  }

  std::vector<double> real_list() const {
    if (!j_->is_array()) fail("expected a sequence of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j_->size(); ++i) out.push_back(item(i).real());
    return out;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    raise(Errc::SchemaError, (path_.empty() ? "config" : path_) + ": " + msg);
  }

 private:
  const nlohmann::json* j_;
  std::string path_;
};

inline ParamDesc parse_param_desc(const ConfNode& n) {
  n.allow_keys({"type", "low", "high", "choices"});
  const std::string type = n.child("type").str();
  ParamDesc desc;
  if (type == "int") {
    desc.type = ParamDesc::Type::Int;
    desc.ilow = n.child("low").integer();
    desc.ihigh = n.child("high").integer();
  } else if (type == "float" || type == "logfloat") {
    desc.type = type == "float" ? ParamDesc::Type::Float : ParamDesc::Type::LogFloat;
    desc.low = n.child("low").real();
    desc.high = n.child("high").real();
  } else if (type == "categorical") {
    desc.type = ParamDesc::Type::Categorical;
    const ConfNode choices = n.child("choices");
    for (std::size_t i = 0; i < choices.size(); ++i)
      desc.choices.push_back(param_value_from_json(choices.item(i).raw()));
  } else {
    n.child("type").fail("unknown parameter type '" + type +
                         "' (expected int, float, logfloat or categorical)");
  }
  desc.validate(n.path());
  return desc;
}

inline HyperparameterSpace parse_space(const ConfNode& n, const std::string& kind) {
  HyperparameterSpace space;
  if (!n.raw().is_object()) n.fail("expected a mapping of parameter names");
  const auto declared = MethodRegistry::declared_params(kind);
  for (auto it = n.raw().begin(); it != n.raw().end(); ++it) {
    bool known = false;
    for (const auto& d : declared)
      if (d == it.key()) {
        known = true;
        break;
      }
    if (!known)
      n.fail("'" + it.key() + "' is not a parameter of kind '" + kind + "'");
    space.emplace_back(it.key(), parse_param_desc(n.child(it.key())));
  }
  return space;
}

inline void parse_stage(const ConfNode& n, const std::vector<std::string>& kinds,
                        const char* family, std::string& kind_out,
                        HyperparameterSpace& space_out) {
  n.allow_keys({"kind", "space"});
  const std::string kind = n.child("kind").str();
  bool known = false;
  for (const auto& k : kinds)
    if (k == kind) known = true;
  if (!known)
    raise(Errc::UnknownKind,
          n.path() + ".kind: no " + std::string(family) + " kind named '" + kind + "'");
  kind_out = kind;
  if (auto space = n.opt("space")) space_out = parse_space(*space, kind);
}

inline PipelineSpec parse_method(const ConfNode& n) {
  n.allow_keys({"name", "preprocessing", "estimator", "postprocessing"});
  PipelineSpec m;
  m.name = n.child("name").identifier();
  if (auto pre = n.opt("preprocessing")) {
    std::string kind;
    parse_stage(*pre, MethodRegistry::pre_kinds(), "pre-processing", kind, m.pre_space);
    m.pre_kind = kind;
  }
  parse_stage(n.child("estimator"), MethodRegistry::estimator_kinds(), "estimator",
              m.estimator_kind, m.estimator_space);
  if (auto post = n.opt("postprocessing")) {
    std::string kind;
    parse_stage(*post, MethodRegistry::post_kinds(), "post-processing", kind, m.post_space);
    m.post_kind = kind;
  }
  return m;
}

inline SplitSpec parse_split(const ConfNode& n, std::uint64_t default_seed) {
  SplitSpec split;
  split.seed = default_seed;
  n.allow_keys({"method", "proportions", "seed", "column", "mapping"});
  const std::string method = n.has("method") ? n.child("method").str() : "random";
  if (method == "random") {
    split.method = SplitSpec::Method::Random;
    if (auto props = n.opt("proportions")) {
      const auto p = props->real_list();
      if (p.size() != 3) props->fail("expected exactly 3 proportions (train, validation, test)");
      split.proportions = {p[0], p[1], p[2]};
    }
    if (auto seed = n.opt("seed")) split.seed = seed->unsigned_integer();
  } else if (method == "column") {
    split.method = SplitSpec::Method::Column;
    split.split_column = n.child("column").str();
    const ConfNode mapping = n.child("mapping");
    if (!mapping.raw().is_object()) mapping.fail("expected a value-to-partition mapping");
    for (auto it = mapping.raw().begin(); it != mapping.raw().end(); ++it)
      split.mapping[it.key()] = partition_from_name(mapping.child(it.key()).str());
  } else {
    n.child("method").fail("unknown split method '" + method + "' (expected random or column)");
  }
  return split;
}

inline DatasetSpec parse_dataset(const ConfNode& n, std::uint64_t global_seed) {
  n.allow_keys({"name", "source", "synthetic", "schema", "split"});
  DatasetSpec ds;
  ds.name = n.child("name").identifier();
  ds.source = n.child("source").str();
  const std::uint64_t base = dataset_seed(global_seed, ds.name);

  if (ds.source == "synthetic") {
    if (n.has("schema")) n.fail("synthetic datasets declare no schema");
    SyntheticSpec synth;
    synth.seed = mix_seed(base, "generate");
    bool explicit_separation = false;
    if (auto sn = n.opt("synthetic")) {
      sn->allow_keys({"n_rows", "group_fractions", "base_rates", "separation", "seed"});
      if (auto v = sn->opt("n_rows")) {
        const std::int64_t rows = v->integer();
        if (rows < 1) v->fail("n_rows must be positive");
        synth.n_rows = static_cast<std::size_t>(rows);
      }
      if (auto v = sn->opt("group_fractions")) synth.group_fractions = v->real_list();
      if (auto v = sn->opt("base_rates")) synth.base_rates = v->real_list();
      if (auto v = sn->opt("separation")) {
        explicit_separation = true;
        if (v->raw().is_number())
          synth.separation.assign(synth.group_fractions.size(), v->real());
        else
          synth.separation = v->real_list();
      }
      if (auto v = sn->opt("seed")) synth.seed = v->unsigned_integer();
    }
    if (!explicit_separation)
      synth.separation.assign(synth.group_fractions.size(), 1.0);
    if (synth.base_rates.size() != synth.group_fractions.size())
      n.fail("synthetic.base_rates and group_fractions must have equal length");
    if (synth.separation.size() != synth.group_fractions.size())
      n.fail("synthetic.separation and group_fractions must have equal length");
    ds.synthetic = std::move(synth);
  } else {
    const auto ends_with = [&](const char* suffix) {
      const std::string s(suffix);
      return ds.source.size() >= s.size() &&
             ds.source.compare(ds.source.size() - s.size(), s.size(), s) == 0;
    };
    if (!ends_with(".csv") && !ends_with(".parquet") && !ends_with(".pq"))
      n.child("source").fail("must be 'synthetic' or a .csv/.parquet path");
    const ConfNode schema = n.child("schema");
    for (std::size_t i = 0; i < schema.size(); ++i) {
      const ConfNode col = schema.item(i);
      col.allow_keys({"name", "kind"});
      ColumnSpec spec;
      spec.name = col.child("name").str();
      const std::string kind = col.child("kind").str();
      if (kind != "numeric" && kind != "categorical" && kind != "binary_label" &&
          kind != "sensitive_group")
        col.child("kind").fail("unknown column kind '" + kind + "'");
      spec.kind = column_kind_from_name(kind);
      ds.schema.push_back(std::move(spec));
    }
    try {
      validate_schema(ds.schema);
    } catch (const Error& e) {
      raise(e.code(), n.child("schema").path() + ": " + e.what());
    }
  }

  const std::uint64_t default_split_seed = mix_seed(base, "split");
  if (auto sp = n.opt("split"))
    ds.split = parse_split(*sp, default_split_seed);
  else
    ds.split.seed = default_split_seed;
  return ds;
}

}  // namespace detail

/// Builds a fully validated config from the parsed YAML document. All
/// defaults are resolved here — nothing downstream fills blanks.
inline ExperimentConfig parse_config_json(const nlohmann::json& doc) {
  detail::ConfNode root(doc, "");
  root.allow_keys({"version", "experiment_id", "global_seed", "datasets", "methods",
                   "optimization", "evaluation"});

  const std::string version = root.child("version").str();
  if (version != kConfigVersion)
    root.child("version").fail("unsupported config version '" + version + "' (expected " +
                               std::string(kConfigVersion) + ")");

  ExperimentConfig cfg;
  cfg.experiment_id = root.child("experiment_id").identifier();
  if (auto seed = root.opt("global_seed")) cfg.global_seed = seed->unsigned_integer();

  const detail::ConfNode datasets = root.child("datasets");
  if (datasets.size() == 0) datasets.fail("at least one dataset is required");
  std::set<std::string> dataset_names;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    DatasetSpec ds = detail::parse_dataset(datasets.item(i), cfg.global_seed);
    if (!dataset_names.insert(ds.name).second)
      raise(Errc::DuplicateName,
            datasets.item(i).path() + ".name: duplicate dataset name '" + ds.name + "'");
    cfg.datasets.push_back(std::move(ds));
  }

  const detail::ConfNode methods = root.child("methods");
  if (methods.size() == 0) methods.fail("at least one method is required");
  std::set<std::string> method_names;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    PipelineSpec m = detail::parse_method(methods.item(i));
    if (!method_names.insert(m.name).second)
      raise(Errc::DuplicateName,
            methods.item(i).path() + ".name: duplicate method name '" + m.name + "'");
    cfg.methods.push_back(std::move(m));
  }

  if (auto opt = root.opt("optimization")) {
    opt->allow_keys({"n_trials", "sampler", "n_jobs"});
    if (auto v = opt->opt("n_trials")) cfg.optimization.n_trials = v->integer();
    if (auto v = opt->opt("sampler")) {
      try {
        cfg.optimization.sampler = sampler_from_name(v->str());
      } catch (const Error& e) {
        v->fail(e.what());
      }
    }
    if (auto v = opt->opt("n_jobs")) cfg.optimization.n_jobs = v->integer();
    try {
      cfg.optimization.validate();
    } catch (const Error& e) {
      opt->fail(e.what());
    }
  }
  cfg.optimization.seed = cfg.global_seed;  // echoed; cells re-derive their own

  if (auto ev = root.opt("evaluation")) {
    ev->allow_keys({"performance_metric", "fairness_metric", "reference_policy",
                    "reference_group", "tau", "fpr_budget", "alpha", "decision_threshold"});
    if (auto v = ev->opt("performance_metric")) cfg.evaluation.performance_metric = v->str();
    if (auto v = ev->opt("fairness_metric")) cfg.evaluation.fairness_metric = v->str();
    if (ev->has("reference_policy") && ev->has("reference_group"))
      ev->fail("reference_policy and reference_group are mutually exclusive");
    if (auto v = ev->opt("reference_policy")) {
      const std::string p = v->str();
      if (p == "largest_group") cfg.evaluation.reference = ReferencePolicy::largest();
      else if (p == "min_metric") cfg.evaluation.reference = ReferencePolicy::min_metric();
      else v->fail("unknown reference policy '" + p + "' (expected largest_group or min_metric)");
    }
    if (auto v = ev->opt("reference_group"))
      cfg.evaluation.reference = ReferencePolicy::explicit_group(v->str());
    if (auto v = ev->opt("tau")) cfg.evaluation.tau = v->real();
    if (auto v = ev->opt("fpr_budget")) cfg.evaluation.fpr_budget = v->real();
    if (auto v = ev->opt("alpha")) cfg.evaluation.alpha = v->real();
    if (auto v = ev->opt("decision_threshold")) cfg.evaluation.decision_threshold = v->real();
    try {
      validate_eval_spec(cfg.evaluation);
    } catch (const Error& e) {
      raise(e.code(), ev->path() + ": " + e.what());
    }
  } else {
    validate_eval_spec(cfg.evaluation);
  }
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  return parse_config_json(yaml::parse(text));
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

// ---------------------------------------------------------------------------
// Config echo (struct -> canonical JSON -> YAML)

namespace detail {

inline nlohmann::json param_desc_to_json(const ParamDesc& d) {
  switch (d.type) {
    case ParamDesc::Type::Int:
      return {{"type", "int"}, {"low", d.ilow}, {"high", d.ihigh}};
    case ParamDesc::Type::Float:
      return {{"type", "float"}, {"low", d.low}, {"high", d.high}};
    case ParamDesc::Type::LogFloat:
      return {{"type", "logfloat"}, {"low", d.low}, {"high", d.high}};
    case ParamDesc::Type::Categorical: {
      nlohmann::json choices = nlohmann::json::array();
      for (const auto& c : d.choices) choices.push_back(param_value_to_json(c));
      return {{"type", "categorical"}, {"choices", choices}};
    }
  }
  raise(Errc::SchemaError, "bad parameter descriptor");
}

inline nlohmann::json space_to_json(const HyperparameterSpace& space) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, desc] : space) j[name] = param_desc_to_json(desc);
  return j;
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json doc;
  doc["version"] = kConfigVersion;
  doc["experiment_id"] = cfg.experiment_id;
  doc["global_seed"] = cfg.global_seed;

  doc["datasets"] = nlohmann::json::array();
  for (const auto& ds : cfg.datasets) {
    nlohmann::json d{{"name", ds.name}, {"source", ds.source}};
    if (ds.synthetic) {
      d["synthetic"] = {{"n_rows", ds.synthetic->n_rows},
                        {"group_fractions", ds.synthetic->group_fractions},
                        {"base_rates", ds.synthetic->base_rates},
                        {"separation", ds.synthetic->separation},
                        {"seed", ds.synthetic->seed}};
    } else {
      nlohmann::json schema = nlohmann::json::array();
      for (const auto& col : ds.schema)
        schema.push_back({{"name", col.name}, {"kind", column_kind_name(col.kind)}});
      d["schema"] = schema;
    }
    if (ds.split.method == SplitSpec::Method::Random) {
      d["split"] = {{"method", "random"},
                    {"proportions", std::vector<double>{ds.split.proportions[0],
                                                        ds.split.proportions[1],
                                                        ds.split.proportions[2]}},
                    {"seed", ds.split.seed}};
    } else {
      nlohmann::json mapping = nlohmann::json::object();
      for (const auto& [value, part] : ds.split.mapping)
        mapping[value] = partition_name(part);
      d["split"] = {{"method", "column"},
                    {"column", ds.split.split_column},
                    {"mapping", mapping}};
    }
    doc["datasets"].push_back(std::move(d));
  }

  doc["methods"] = nlohmann::json::array();
  for (const auto& m : cfg.methods) {
    nlohmann::json j{{"name", m.name}};
    // empty spaces are omitted: the emitted text must stay within the
    // block-style subset the config reader accepts
    const auto stage = [](const std::string& kind, const HyperparameterSpace& space) {
      nlohmann::json s{{"kind", kind}};
      if (!space.empty()) s["space"] = detail::space_to_json(space);
      return s;
    };
    if (m.pre_kind) j["preprocessing"] = stage(*m.pre_kind, m.pre_space);
    j["estimator"] = stage(m.estimator_kind, m.estimator_space);
    if (m.post_kind) j["postprocessing"] = stage(*m.post_kind, m.post_space);
    doc["methods"].push_back(std::move(j));
  }

  doc["optimization"] = {{"n_trials", cfg.optimization.n_trials},
                         {"sampler", sampler_name(cfg.optimization.sampler)},
                         {"n_jobs", cfg.optimization.n_jobs}};

  nlohmann::json ev{{"performance_metric", cfg.evaluation.performance_metric},
                    {"fairness_metric", cfg.evaluation.fairness_metric},
                    {"tau", cfg.evaluation.tau},
                    {"alpha", cfg.evaluation.alpha},
                    {"decision_threshold", cfg.evaluation.decision_threshold}};
  switch (cfg.evaluation.reference.kind) {
    case ReferencePolicy::Kind::LargestGroup: ev["reference_policy"] = "largest_group"; break;
    case ReferencePolicy::Kind::MinMetric: ev["reference_policy"] = "min_metric"; break;
    case ReferencePolicy::Kind::Explicit: ev["reference_group"] = cfg.evaluation.reference.group; break;
  }
  if (cfg.evaluation.fpr_budget) ev["fpr_budget"] = *cfg.evaluation.fpr_budget;
  doc["evaluation"] = std::move(ev);
  return doc;
}

inline std::string emit_config(const ExperimentConfig& cfg) {
  return yaml::emit(config_to_json(cfg));
}

// ---------------------------------------------------------------------------
// Default experiment expansion

/// The baseline suite: plain logistic regression plus one mitigation from
/// each family, 50 random trials each, seed 42.
inline ExperimentConfig default_experiment(const DatasetSpec& dataset) {
  const auto logfloat = [](double low, double high) {
    ParamDesc d;
    d.type = ParamDesc::Type::LogFloat;
    d.low = low;
    d.high = high;
    return d;
  };
  const auto floatrange = [](double low, double high) {
    ParamDesc d;
    d.type = ParamDesc::Type::Float;
    d.low = low;
    d.high = high;
    return d;
  };
  const HyperparameterSpace logreg_space{{"learning_rate", logfloat(1e-2, 1.0)},
                                         {"l2_penalty", logfloat(1e-5, 1e-1)}};

  ExperimentConfig cfg;
  cfg.experiment_id = dataset.name + "_baseline";
  cfg.global_seed = 42;
  // resolve derived seeds the same way the parser would, so the emitted
  // config reproduces this experiment exactly; a seed of 0 means "derive"
  DatasetSpec ds = dataset;
  const std::uint64_t base = dataset_seed(cfg.global_seed, ds.name);
  if (ds.split.seed == 0) ds.split.seed = mix_seed(base, "split");
  if (ds.synthetic && ds.synthetic->seed == 0) ds.synthetic->seed = mix_seed(base, "generate");
  cfg.datasets.push_back(std::move(ds));
  cfg.optimization.n_trials = 50;
  cfg.optimization.sampler = OptimizerConfig::Sampler::Random;
  cfg.optimization.seed = cfg.global_seed;
  cfg.optimization.n_jobs = 1;

  PipelineSpec plain;
  plain.name = "plain_logreg";
  plain.estimator_kind = "logreg";
  plain.estimator_space = logreg_space;
  cfg.methods.push_back(plain);

  PipelineSpec reweigh = plain;
  reweigh.name = "reweighing_logreg";
  reweigh.pre_kind = "reweighing";
  cfg.methods.push_back(reweigh);

  PipelineSpec fair;
  fair.name = "fair_logreg";
  fair.estimator_kind = "fair_logreg";
  fair.estimator_space = logreg_space;
  fair.estimator_space.emplace_back("fairness_lambda", logfloat(1e-2, 1e2));
  cfg.methods.push_back(fair);

  PipelineSpec threshold = plain;
  threshold.name = "threshold_logreg";
  threshold.post_kind = "group_threshold";
  threshold.post_space = {{"target_rate", floatrange(0.05, 0.95)}};
  cfg.methods.push_back(threshold);

  return cfg;
}

// ---------------------------------------------------------------------------
// Dataset materialization

/// Loads or generates the dataset named by the spec; any failure is wrapped
/// in DatasetLoadError naming the dataset (fail-fast before trials start).
inline Dataset load_dataset(const DatasetSpec& spec) {
  try {
    if (spec.source == "synthetic") {
      const SyntheticSpec& s = *spec.synthetic;
      return generate_synthetic(s.n_rows, s.group_fractions, s.base_rates, s.separation,
                                s.seed);
    }
    const auto ends_with = [&](const char* suffix) {
      const std::string sfx(suffix);
      return spec.source.size() >= sfx.size() &&
             spec.source.compare(spec.source.size() - sfx.size(), sfx.size(), sfx) == 0;
    };
    if (ends_with(".parquet") || ends_with(".pq")) return load_parquet(spec.source, spec.schema);
    return load_csv(spec.source, spec.schema);
  } catch (const Error& e) {
    raise(Errc::DatasetLoadError,
          "dataset '" + spec.name + "': " + errc_name(e.code()) + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Result store

class ResultStore {
 public:
  ResultStore(std::filesystem::path root, nlohmann::json manifest, ExperimentConfig config)
      : root_(std::move(root)), manifest_(std::move(manifest)), config_(std::move(config)) {}

  static ResultStore open(const std::filesystem::path& root) {
    std::ifstream in(root / "manifest.json");
    if (!in) raise(Errc::IoError, "cannot open " + (root / "manifest.json").string());
    nlohmann::json manifest = nlohmann::json::parse(in, nullptr, false);
    if (manifest.is_discarded())
      raise(Errc::ParseError, (root / "manifest.json").string() + ": invalid JSON");
    ExperimentConfig cfg = parse_config_text(manifest.at("config").get<std::string>());
    return ResultStore(root, std::move(manifest), std::move(cfg));
  }

  const std::filesystem::path& root() const { return root_; }
  const nlohmann::json& manifest() const { return manifest_; }
  const ExperimentConfig& config() const { return config_; }

  bool complete() const {
    std::ifstream in(root_ / "COMPLETE");
    if (!in) return false;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str() == kCompleteMarker;
  }

  std::vector<TrialRecord> trials(const std::string& dataset, const std::string& method) const {
    const std::int64_t n = manifest_.at("n_trials").get<std::int64_t>();
    std::vector<TrialRecord> out;
    out.reserve(static_cast<std::size_t>(n));
    for (std::int64_t k = 0; k < n; ++k) {
      const auto path = root_ / dataset / method / ("trial_" + std::to_string(k) + ".json");
      std::ifstream in(path);
      if (!in) raise(Errc::IoError, "missing trial file " + path.string());
      nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded()) raise(Errc::ParseError, path.string() + ": invalid JSON");
      out.push_back(trial_from_json(j));
    }
    return out;
  }

 private:
  std::filesystem::path root_;
  nlohmann::json manifest_;
  ExperimentConfig config_;
};

/// Structural validation for hand-built configs (parse_config output is
/// already valid by construction).
inline void validate_config(const ExperimentConfig& cfg) {
  if (!detail::is_identifier(cfg.experiment_id))
    raise(Errc::SchemaError, "experiment_id must be a valid identifier");
  if (cfg.datasets.empty()) raise(Errc::SchemaError, "at least one dataset is required");
  if (cfg.methods.empty()) raise(Errc::SchemaError, "at least one method is required");
  std::set<std::string> names;
  for (const auto& ds : cfg.datasets) {
    if (!detail::is_identifier(ds.name))
      raise(Errc::SchemaError, "dataset name '" + ds.name + "' is not a valid identifier");
    if (!names.insert(ds.name).second)
      raise(Errc::DuplicateName, "duplicate dataset name '" + ds.name + "'");
    if (ds.source == "synthetic" && !ds.synthetic)
      raise(Errc::SchemaError, "dataset '" + ds.name + "': synthetic source without parameters");
  }
  names.clear();
  for (const auto& m : cfg.methods) {
    if (!detail::is_identifier(m.name))
      raise(Errc::SchemaError, "method name '" + m.name + "' is not a valid identifier");
    if (!names.insert(m.name).second)
      raise(Errc::DuplicateName, "duplicate method name '" + m.name + "'");
    for (const auto& [kind, kinds, family] :
         std::vector<std::tuple<std::string, std::vector<std::string>, const char*>>{
             {m.pre_kind.value_or(""), MethodRegistry::pre_kinds(), "pre-processing"},
             {m.estimator_kind, MethodRegistry::estimator_kinds(), "estimator"},
             {m.post_kind.value_or(""), MethodRegistry::post_kinds(), "post-processing"}}) {
      if (kind.empty()) continue;
      bool known = false;
      for (const auto& k : kinds)
        if (k == kind) known = true;
      if (!known)
        raise(Errc::UnknownKind, "no " + std::string(family) + " kind named '" + kind + "'");
    }
  }
  cfg.optimization.validate();
  validate_eval_spec(cfg.evaluation);
}

/// Runs every (dataset x method) cell and persists the store:
///   <out_root>/<experiment_id>/manifest.json
///   <...>/<dataset>/<method>/trial_<k>.json
///   <...>/<dataset>/<method>/artifacts/trial_<k>.model.json
///   <...>/COMPLETE            (constant content, written only on success)
/// `config_text` is embedded verbatim in the manifest; pass the raw file
/// contents when available so the hash covers the user's bytes.
inline ResultStore run_experiment(const ExperimentConfig& cfg, const std::string& out_root,
                                  bool force = false, std::string config_text = "") {
  namespace fs = std::filesystem;
  validate_config(cfg);
  if (config_text.empty()) config_text = emit_config(cfg);

  const fs::path root = fs::path(out_root) / cfg.experiment_id;
  if (fs::exists(root)) {
    if (!force)
      raise(Errc::StoreExists, root.string() + " already exists (use force to overwrite)");
    fs::remove_all(root);
  }
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) raise(Errc::IoError, "cannot create " + root.string() + ": " + ec.message());

  // materialize every dataset before any trial runs (fail-fast)
  std::vector<std::pair<DatasetSpec, SplitDataset>> splits;
  for (const auto& ds : cfg.datasets) {
    Dataset data = load_dataset(ds);
    try {
      splits.emplace_back(ds, create_splits(data, ds.split));
    } catch (const Error& e) {
      raise(Errc::DatasetLoadError,
            "dataset '" + ds.name + "': " + errc_name(e.code()) + ": " + e.what());
    }
  }

  nlohmann::json manifest;
  manifest["store_version"] = kStoreVersion;
  manifest["experiment_id"] = cfg.experiment_id;
  manifest["config"] = config_text;
  {
    char hex[19];
    std::snprintf(hex, sizeof hex, "0x%016llx",
                  static_cast<unsigned long long>(fnv1a64(config_text)));
    manifest["config_fnv1a64"] = hex;
  }
  manifest["global_seed"] = cfg.global_seed;
  manifest["n_trials"] = cfg.optimization.n_trials;
  manifest["datasets"] = nlohmann::json::array();
  for (const auto& ds : cfg.datasets) manifest["datasets"].push_back(ds.name);
  manifest["methods"] = nlohmann::json::array();
  for (const auto& m : cfg.methods) manifest["methods"].push_back(m.name);
  manifest["cells"] = nlohmann::json::array();
  for (const auto& ds : cfg.datasets)
    for (const auto& m : cfg.methods)
      manifest["cells"].push_back(
          {{"dataset", ds.name}, {"method", m.name}, {"dir", ds.name + "/" + m.name}});
  {
    std::ofstream out(root / "manifest.json");
    if (!out) raise(Errc::IoError, "cannot write manifest.json");
    out << manifest.dump(2) << "\n";
  }

  for (const auto& [ds, split] : splits) {
    const EncodedSplit encoded = encode_split(split);
    for (const auto& m : cfg.methods) {
      const fs::path cell_dir = root / ds.name / m.name;
      fs::create_directories(cell_dir, ec);
      if (ec) raise(Errc::IoError, "cannot create " + cell_dir.string() + ": " + ec.message());

      OptimizerConfig opt = cfg.optimization;
      opt.seed = cell_seed(cfg.global_seed, ds.name, m.name);
      const auto records = run_search(m, encoded, opt, cfg.evaluation, cell_dir.string());

      for (const auto& rec : records) {
        std::ofstream out(cell_dir / ("trial_" + std::to_string(rec.trial_id) + ".json"));
        if (!out)
          raise(Errc::IoError, "cannot write trial file for " + ds.name + "/" + m.name);
        out << trial_to_json(rec, cfg.evaluation).dump(2) << "\n";
      }
    }
  }

  {
    std::ofstream out(root / "COMPLETE");
    if (!out) raise(Errc::IoError, "cannot write completion marker");
    out << kCompleteMarker;
  }
  return ResultStore(root, std::move(manifest), cfg);
}

// ---------------------------------------------------------------------------
// Store comparison (determinism checks)

/// Returns the first difference between two stores, ignoring duration_ms
/// fields; std::nullopt means the stores are equal under the documented
/// comparison.
inline std::optional<std::string> store_difference(const std::filesystem::path& a,
                                                   const std::filesystem::path& b) {
  namespace fs = std::filesystem;
  const auto read_json = [](const fs::path& p) {
    std::ifstream in(p);
    if (!in) raise(Errc::IoError, "cannot open " + p.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) raise(Errc::ParseError, p.string() + ": invalid JSON");
    return j;
  };

  const nlohmann::json ma = read_json(a / "manifest.json");
  const nlohmann::json mb = read_json(b / "manifest.json");
  if (ma != mb) return "manifest.json differs";

  const auto n = ma.at("n_trials").get<std::int64_t>();
  for (const auto& cell : ma.at("cells")) {
    const std::string dir = cell.at("dir").get<std::string>();
    for (std::int64_t k = 0; k < n; ++k) {
      const std::string trial = dir + "/trial_" + std::to_string(k) + ".json";
      nlohmann::json ta = read_json(a / trial);
      nlohmann::json tb = read_json(b / trial);
      ta.erase("duration_ms");
      tb.erase("duration_ms");
      if (ta != tb) return trial + " differs";
      if (ta.contains("artifact_path")) {
        const std::string rel = dir + "/" + ta.at("artifact_path").get<std::string>();
        if (read_json(a / rel) != read_json(b / rel)) return rel + " differs";
      }
    }
  }
  const bool ca = fs::exists(a / "COMPLETE"), cb = fs::exists(b / "COMPLETE");
  if (ca != cb) return std::string("completion markers differ");
  return std::nullopt;
}

}  // namespace fairflow
