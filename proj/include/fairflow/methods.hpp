#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fairflow/errors.hpp"
#include "fairflow/matrix.hpp"
#include "fairflow/prng.hpp"

namespace fairflow {

// ---------------------------------------------------------------------------
// Hyperparameter descriptors

using ParamValue = std::variant<std::int64_t, double, std::string>;
using ParamAssignment = std::map<std::string, ParamValue>;

inline nlohmann::json param_value_to_json(const ParamValue& v) {
  if (std::holds_alternative<std::int64_t>(v)) return std::get<std::int64_t>(v);
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  return std::get<std::string>(v);
}

inline ParamValue param_value_from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return std::string(j.get<bool>() ? "true" : "false");
  raise(Errc::SchemaError, "hyperparameter values must be scalars");
}

inline double param_as_double(const ParamValue& v, const std::string& name) {
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  if (std::holds_alternative<std::int64_t>(v))
    return static_cast<double>(std::get<std::int64_t>(v));
  raise(Errc::InvalidHyperparameter, "'" + name + "' must be numeric");
}

inline std::int64_t param_as_int(const ParamValue& v, const std::string& name) {
  if (std::holds_alternative<std::int64_t>(v)) return std::get<std::int64_t>(v);
  if (std::holds_alternative<double>(v)) {
    const double d = std::get<double>(v);
    if (d == std::floor(d)) return static_cast<std::int64_t>(d);
  }
  raise(Errc::InvalidHyperparameter, "'" + name + "' must be an integer");
}

inline std::string param_as_string(const ParamValue& v, const std::string& name) {
  if (std::holds_alternative<std::string>(v)) return std::get<std::string>(v);
  raise(Errc::InvalidHyperparameter, "'" + name + "' must be a string");
}

struct ParamDesc {
  enum class Type { Int, Float, LogFloat, Categorical };

  Type type = Type::Float;
  double low = 0.0, high = 1.0;          // Float / LogFloat
  std::int64_t ilow = 0, ihigh = 1;      // Int
  std::vector<ParamValue> choices;       // Categorical

  void validate(const std::string& name) const {
    switch (type) {
      case Type::Int:
        if (ilow > ihigh)
          raise(Errc::SchemaError, name + ": int bounds require low <= high");
        break;
      case Type::Float:
        if (!(low < high)) raise(Errc::SchemaError, name + ": requires low < high");
        break;
      case Type::LogFloat:
        if (!(low < high)) raise(Errc::SchemaError, name + ": requires low < high");
        if (!(low > 0.0))
          raise(Errc::SchemaError, name + ": logfloat bounds must be positive");
        break;
      case Type::Categorical: {
        if (choices.empty()) raise(Errc::SchemaError, name + ": choices must be non-empty");
        std::set<std::string> seen;
        for (const auto& c : choices)
          if (!seen.insert(param_value_to_json(c).dump()).second)
            raise(Errc::SchemaError, name + ": duplicate choice");
        break;
      }
    }
  }
};

/// Ordered search space: declaration order drives sampling order and grid
/// enumeration order.
using HyperparameterSpace = std::vector<std::pair<std::string, ParamDesc>>;

/// Draws one assignment; advances `rng` deterministically (parameters are
/// consumed in declaration order).
inline ParamAssignment sample_hyperparams(const HyperparameterSpace& space,
                                          Xoshiro256& rng) {
  ParamAssignment out;
  for (const auto& [name, desc] : space) {
    desc.validate(name);
    switch (desc.type) {
      case ParamDesc::Type::Int: {
        const auto span = static_cast<std::uint64_t>(desc.ihigh - desc.ilow) + 1;
        out[name] = desc.ilow + static_cast<std::int64_t>(rng.next_below(span));
        break;
      }
      case ParamDesc::Type::Float:
        out[name] = rng.uniform(desc.low, desc.high);
        break;
      case ParamDesc::Type::LogFloat:
        out[name] = std::exp(rng.uniform(std::log(desc.low), std::log(desc.high)));
        break;
      case ParamDesc::Type::Categorical:
        out[name] = desc.choices[rng.next_below(desc.choices.size())];
        break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standardized method interfaces

/// Output of a pre-processing transform. Row count may differ from the input
/// (resampling); weights are per surviving row.
struct TransformedData {
  Matrix X;
  std::vector<std::int32_t> y;
  std::vector<std::int32_t> groups;
  std::vector<double> weights;
  std::vector<std::string> warnings;
};

class PreProcessor {
 public:
  virtual ~PreProcessor() = default;
  virtual void fit(const Matrix& X, const std::vector<std::int32_t>& y,
                   const std::vector<std::int32_t>& groups) = 0;
  virtual TransformedData transform(const Matrix& X,
                                    const std::vector<std::int32_t>& y,
                                    const std::vector<std::int32_t>& groups) const = 0;
  virtual std::string kind() const = 0;
  virtual nlohmann::json learned_state() const = 0;
};

class Estimator {
 public:
  virtual ~Estimator() = default;
  virtual void fit(const Matrix& X, const std::vector<std::int32_t>& y,
                   const std::vector<std::int32_t>& groups,
                   const std::vector<double>& sample_weights) = 0;
  virtual std::vector<double> predict_scores(const Matrix& X,
                                             const std::vector<std::int32_t>& groups) const = 0;
  virtual std::string kind() const = 0;
  virtual nlohmann::json learned_state() const = 0;
};

/// Post-processors return adjusted per-row values; thresholding methods emit
/// hard 0/1 decisions, score-rescaling methods would emit scores. Either way
/// the result binarizes at 0.5 into final decisions.
class PostProcessor {
 public:
  virtual ~PostProcessor() = default;
  virtual void fit(const std::vector<double>& scores,
                   const std::vector<std::int32_t>& labels,
                   const std::vector<std::int32_t>& groups) = 0;
  virtual std::vector<double> adjust(const std::vector<double>& scores,
                                     const std::vector<std::int32_t>& groups) const = 0;
  virtual std::string kind() const = 0;
  virtual nlohmann::json learned_state() const = 0;
};

// ---------------------------------------------------------------------------
// Reweighing (pre-processing)

/// weight(g, y) = n_g * n_y / (n * n_{g,y}) over the fit data. Attaching
/// these weights makes every group's weighted label prevalence equal the
/// global prevalence.
class Reweighing : public PreProcessor {
 public:
  void fit(const Matrix&, const std::vector<std::int32_t>& y,
           const std::vector<std::int32_t>& groups) override {
    if (y.size() != groups.size() || y.empty())
      raise(Errc::SchemaError, "labels and groups must be non-empty and equal length");
    weights_.clear();
    std::map<std::int32_t, std::uint64_t> n_g;
    std::array<std::uint64_t, 2> n_y{0, 0};
    std::map<std::pair<std::int32_t, std::int32_t>, std::uint64_t> n_gy;
    for (std::size_t i = 0; i < y.size(); ++i) {
      n_g[groups[i]]++;
      n_y[static_cast<std::size_t>(y[i])]++;
      n_gy[{groups[i], y[i]}]++;
    }
    const auto n = static_cast<double>(y.size());
    for (const auto& [cell, count] : n_gy) {
      weights_[cell] = (static_cast<double>(n_g[cell.first]) *
                        static_cast<double>(n_y[static_cast<std::size_t>(cell.second)])) /
                       (n * static_cast<double>(count));
    }
    fitted_ = true;
  }

  TransformedData transform(const Matrix& X, const std::vector<std::int32_t>& y,
                            const std::vector<std::int32_t>& groups) const override {
    if (!fitted_) raise(Errc::NotFitted, "Reweighing::transform before fit");
    TransformedData out;
    out.X = X;
    out.y = y;
    out.groups = groups;
    out.weights.resize(y.size(), 1.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      auto it = weights_.find({groups[i], y[i]});
      if (it == weights_.end()) {
        out.warnings.push_back("unseen (group,label) cell (" + std::to_string(groups[i]) +
                               "," + std::to_string(y[i]) + ") at row " +
                               std::to_string(i + 1) + "; weight 1.0");
      } else {
        out.weights[i] = it->second;
      }
    }
    return out;
  }

  double weight_for(std::int32_t group, std::int32_t label) const {
    auto it = weights_.find({group, label});
    return it == weights_.end() ? 1.0 : it->second;
  }

  std::string kind() const override { return "reweighing"; }

  nlohmann::json learned_state() const override {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& [cell, w] : weights_)
      cells.push_back({{"group", cell.first}, {"label", cell.second}, {"weight", w}});
    return {{"weight_table", cells}};
  }

 private:
  std::map<std::pair<std::int32_t, std::int32_t>, double> weights_;
  bool fitted_ = false;
};

// ---------------------------------------------------------------------------
// Prevalence sampling (pre-processing)

/// Undersamples the over-prevalent (group, label) cells so each group's label
/// prevalence matches the global prevalence of the fit data to within one
/// row. Groups missing a label entirely are left untouched.
class PrevalenceSampling : public PreProcessor {
 public:
  explicit PrevalenceSampling(std::uint64_t seed) : seed_(seed) {}

  void fit(const Matrix&, const std::vector<std::int32_t>& y,
           const std::vector<std::int32_t>&) override {
    if (y.empty()) raise(Errc::SchemaError, "empty fit data");
    std::uint64_t positives = 0;
    for (auto v : y) positives += static_cast<std::uint64_t>(v);
    target_prevalence_ = static_cast<double>(positives) / static_cast<double>(y.size());
    fitted_ = true;
  }

  TransformedData transform(const Matrix& X, const std::vector<std::int32_t>& y,
                            const std::vector<std::int32_t>& groups) const override {
    if (!fitted_) raise(Errc::NotFitted, "PrevalenceSampling::transform before fit");
    const double p = target_prevalence_;

    std::map<std::int32_t, std::array<std::vector<std::size_t>, 2>> cells;
    for (std::size_t i = 0; i < y.size(); ++i)
      cells[groups[i]][static_cast<std::size_t>(y[i])].push_back(i);

    std::vector<std::size_t> kept;
    std::vector<std::string> warnings;
    for (const auto& [g, rows] : cells) {
      const auto n1 = static_cast<double>(rows[1].size());
      const auto n0 = static_cast<double>(rows[0].size());
      std::size_t keep1 = rows[1].size(), keep0 = rows[0].size();
      if (rows[0].empty() || rows[1].empty()) {
        if (p > 0.0 && p < 1.0)
          warnings.push_back("group " + std::to_string(g) +
                             " lacks a label cell; left unsampled");
      } else {
        const double pg = n1 / (n1 + n0);
        if (pg > p) {
          keep1 = static_cast<std::size_t>(std::llround(p / (1.0 - p) * n0));
          keep1 = std::min(keep1, rows[1].size());
        } else if (pg < p) {
          keep0 = static_cast<std::size_t>(std::llround((1.0 - p) / p * n1));
          keep0 = std::min(keep0, rows[0].size());
        }
      }
      subsample(rows[1], keep1, mix_seed(seed_, static_cast<std::uint64_t>(g) * 2 + 1), kept);
      subsample(rows[0], keep0, mix_seed(seed_, static_cast<std::uint64_t>(g) * 2), kept);
    }
    std::sort(kept.begin(), kept.end());

    TransformedData out;
    out.X = Matrix(kept.size(), X.cols);
    out.warnings = std::move(warnings);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const std::size_t r = kept[i];
      std::copy(X.row(r), X.row(r) + X.cols, out.X.row(i));
      out.y.push_back(y[r]);
      out.groups.push_back(groups[r]);
      out.weights.push_back(1.0);
    }
    if (out.y.empty()) raise(Errc::EmptyDataset, "prevalence sampling dropped every row");
    return out;
  }

  std::string kind() const override { return "prevalence_sampling"; }

  nlohmann::json learned_state() const override {
    return {{"target_prevalence", target_prevalence_}, {"seed", seed_}};
  }

 private:
  static void subsample(const std::vector<std::size_t>& rows, std::size_t keep,
                        std::uint64_t seed, std::vector<std::size_t>& kept) {
    if (keep >= rows.size()) {
      kept.insert(kept.end(), rows.begin(), rows.end());
      return;
    }
    std::vector<std::size_t> order = rows;
    Xoshiro256 rng(seed);
    shuffle(order, rng);
    kept.insert(kept.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
  }

  std::uint64_t seed_;
  double target_prevalence_ = 0.0;
  bool fitted_ = false;
};

// ---------------------------------------------------------------------------
// Logistic regression (base estimator) and its fairness-penalized variant

struct LogregHyperparams {
  double learning_rate = 0.1;
  double l2_penalty = 1e-4;
  std::int64_t max_iters = 300;
  double tol = 1e-6;
  double fairness_lambda = 0.0;  // 0 = plain logistic regression
};

struct ObjectiveEval {
  double loss = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
};

namespace detail {

inline double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Centered one-vs-rest group indicators. Two observed groups collapse to a
/// single indicator (of the higher code), matching the binary covariance
/// penalty; more groups contribute one squared covariance each.
inline std::vector<std::vector<double>> centered_indicators(
    const std::vector<std::int32_t>& groups) {
  std::set<std::int32_t> distinct(groups.begin(), groups.end());
  std::vector<std::int32_t> codes;
  if (distinct.size() == 2)
    codes.push_back(*distinct.rbegin());
  else
    codes.assign(distinct.begin(), distinct.end());
  std::vector<std::vector<double>> out;
  const double n = static_cast<double>(groups.size());
  for (auto code : codes) {
    std::vector<double> ind(groups.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      ind[i] = groups[i] == code ? 1.0 : 0.0;
      mean += ind[i];
    }
    mean /= n;
    for (auto& v : ind) v -= mean;
    out.push_back(std::move(ind));
  }
  return out;
}

}  // namespace detail

/// Objective and gradient of the (optionally fairness-penalized) weighted
/// logistic loss on a raw feature matrix:
///   (1/W) sum_i w_i * logloss_i + (l2/2)*|w|^2 + lambda * sum_g cov_g^2
/// where cov_g is the plain mean of the centered group indicator times the
/// margin w'x+b. The intercept is neither penalized nor covariance-coupled.
inline ObjectiveEval logreg_eval(const Matrix& X, const std::vector<std::int32_t>& y,
                                 const std::vector<double>& sample_weights,
                                 const std::vector<std::int32_t>& groups,
                                 const LogregHyperparams& hp,
                                 const std::vector<double>& w, double b) {
  const std::size_t n = X.rows, d = X.cols;
  ObjectiveEval ev;
  ev.grad_w.assign(d, 0.0);

  double total_weight = 0.0;
  if (sample_weights.empty())
    total_weight = static_cast<double>(n);
  else
    for (double sw : sample_weights) total_weight += sw;

  std::vector<double> margin(n, b);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = X.row(i);
    double z = b;
    for (std::size_t j = 0; j < d; ++j) z += row[j] * w[j];
    margin[i] = z;
    const double sw = sample_weights.empty() ? 1.0 : sample_weights[i];
    const double yi = static_cast<double>(y[i]);
    ev.loss += sw * (detail::softplus(z) - yi * z);
    const double resid = sw * (detail::sigmoid(z) - yi);
    for (std::size_t j = 0; j < d; ++j) ev.grad_w[j] += resid * row[j];
    ev.grad_b += resid;
  }
  ev.loss /= total_weight;
  ev.grad_b /= total_weight;
  for (std::size_t j = 0; j < d; ++j) {
    ev.grad_w[j] = ev.grad_w[j] / total_weight + hp.l2_penalty * w[j];
    ev.loss += 0.5 * hp.l2_penalty * w[j] * w[j];
  }

  if (hp.fairness_lambda != 0.0) {
    const auto indicators = detail::centered_indicators(groups);
    const double dn = static_cast<double>(n);
    for (const auto& ind : indicators) {
      double cov = 0.0;
      for (std::size_t i = 0; i < n; ++i) cov += ind[i] * margin[i];
      cov /= dn;
      ev.loss += hp.fairness_lambda * cov * cov;
      const double scale = 2.0 * hp.fairness_lambda * cov / dn;
      for (std::size_t i = 0; i < n; ++i) {
        const double s = scale * ind[i];
        const double* row = X.row(i);
        for (std::size_t j = 0; j < d; ++j) ev.grad_w[j] += s * row[j];
      }
    }
  }
  return ev;
}

/// Group-score covariance of the margin, mean of s~ * (w'x + b); the quantity
/// the fairness penalty suppresses. For audits of the penalty's effect.
inline double group_margin_covariance(const Matrix& X,
                                      const std::vector<std::int32_t>& groups,
                                      const std::vector<double>& w, double b) {
  const auto indicators = detail::centered_indicators(groups);
  double worst = 0.0;
  for (const auto& ind : indicators) {
    double cov = 0.0;
    for (std::size_t i = 0; i < X.rows; ++i) {
      const double* row = X.row(i);
      double z = b;
      for (std::size_t j = 0; j < X.cols; ++j) z += row[j] * w[j];
      cov += ind[i] * z;
    }
    cov /= static_cast<double>(X.rows);
    worst = std::max(worst, std::abs(cov));
  }
  return worst;
}

/// Full-batch gradient descent from zero initialization on internally
/// standardized features (train mean/std; zero-variance features dropped).
/// Stops at max_iters or when the gradient infinity-norm falls below tol.
class LogisticRegression : public Estimator {
 public:
  explicit LogisticRegression(LogregHyperparams hp = {}) : hp_(hp) {
    if (!(hp_.learning_rate > 0.0))
      raise(Errc::InvalidHyperparameter, "learning_rate must be positive");
    if (hp_.l2_penalty < 0.0)
      raise(Errc::InvalidHyperparameter, "l2_penalty must be non-negative");
    if (hp_.max_iters < 1)
      raise(Errc::InvalidHyperparameter, "max_iters must be at least 1");
  }

  void fit(const Matrix& X, const std::vector<std::int32_t>& y,
           const std::vector<std::int32_t>& groups,
           const std::vector<double>& sample_weights) override {
    if (X.rows != y.size() || X.rows == 0)
      raise(Errc::SchemaError, "feature matrix and labels must be non-empty and aligned");
    if (!sample_weights.empty() && sample_weights.size() != y.size())
      raise(Errc::SchemaError, "sample_weights length mismatch");

    standardize(X);
    const Matrix Xs = apply_standardization(X);

    weights_.assign(Xs.cols, 0.0);
    intercept_ = 0.0;
    iterations_ = 0;
    const std::vector<std::int32_t>& g =
        hp_.fairness_lambda != 0.0 ? groups : empty_groups_;
    for (std::int64_t it = 0; it < hp_.max_iters; ++it) {
      ObjectiveEval ev = logreg_eval(Xs, y, sample_weights, g, hp_, weights_, intercept_);
      if (!std::isfinite(ev.loss))
        raise(Errc::NonFiniteLoss, "objective diverged at iteration " + std::to_string(it) +
                                       " (learning rate too high)");
      double grad_norm = std::abs(ev.grad_b);
      for (double gw : ev.grad_w) grad_norm = std::max(grad_norm, std::abs(gw));
      final_loss_ = ev.loss;
      iterations_ = it;
      if (grad_norm < hp_.tol) break;
      for (std::size_t j = 0; j < weights_.size(); ++j)
        weights_[j] -= hp_.learning_rate * ev.grad_w[j];
      intercept_ -= hp_.learning_rate * ev.grad_b;
    }
    fitted_ = true;
  }

  std::vector<double> predict_scores(const Matrix& X,
                                     const std::vector<std::int32_t>&) const override {
    if (!fitted_) raise(Errc::NotFitted, "predict_scores before fit");
    if (X.cols != means_.size())
      raise(Errc::SchemaError, "feature width mismatch at predict time");
    std::vector<double> scores(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) {
      const double* row = X.row(i);
      double z = intercept_;
      for (std::size_t k = 0; k < kept_.size(); ++k) {
        const std::size_t j = kept_[k];
        z += weights_[k] * (row[j] - means_[j]) / stds_[j];
      }
      scores[i] = detail::sigmoid(z);
    }
    return scores;
  }

  std::string kind() const override {
    return hp_.fairness_lambda != 0.0 ? "fair_logreg" : "logreg";
  }

  nlohmann::json learned_state() const override {
    return {{"weights", weights_},
            {"intercept", intercept_},
            {"feature_means", means_},
            {"feature_stds", stds_},
            {"kept_features", kept_},
            {"iterations", iterations_},
            {"final_loss", final_loss_}};
  }

  const std::vector<double>& weights() const { return weights_; }
  double intercept() const { return intercept_; }
  std::int64_t iterations() const { return iterations_; }
  double final_loss() const { return final_loss_; }
  const LogregHyperparams& hyperparams() const { return hp_; }

 private:
  void standardize(const Matrix& X) {
    const std::size_t n = X.rows, d = X.cols;
    means_.assign(d, 0.0);
    stds_.assign(d, 1.0);
    kept_.clear();
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += X.at(i, j);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dev = X.at(i, j) - mean;
        var += dev * dev;
      }
      var /= static_cast<double>(n);
      means_[j] = mean;
      const double sd = std::sqrt(var);
      if (sd > 1e-12) {
        stds_[j] = sd;
        kept_.push_back(j);
      }
    }
  }

  Matrix apply_standardization(const Matrix& X) const {
    Matrix out(X.rows, kept_.size());
    for (std::size_t i = 0; i < X.rows; ++i)
      for (std::size_t k = 0; k < kept_.size(); ++k) {
        const std::size_t j = kept_[k];
        out.at(i, k) = (X.at(i, j) - means_[j]) / stds_[j];
      }
    return out;
  }

  LogregHyperparams hp_;
  std::vector<double> means_, stds_;
  std::vector<std::size_t> kept_;
  std::vector<double> weights_;
  double intercept_ = 0.0;
  std::int64_t iterations_ = 0;
  double final_loss_ = 0.0;
  bool fitted_ = false;
  inline static const std::vector<std::int32_t> empty_groups_{};
};

// ---------------------------------------------------------------------------
// Group thresholding (post-processing)

enum class ThresholdStrategy { DemographicParity, TprParity };

inline const char* threshold_strategy_name(ThresholdStrategy s) {
  return s == ThresholdStrategy::DemographicParity ? "demographic_parity" : "tpr_parity";
}

inline ThresholdStrategy threshold_strategy_from_name(const std::string& s) {
  if (s == "demographic_parity") return ThresholdStrategy::DemographicParity;
  if (s == "tpr_parity") return ThresholdStrategy::TprParity;
  raise(Errc::InvalidHyperparameter, "unknown threshold strategy '" + s + "'");
}

/// Lower empirical quantile: ascending sort, index floor(q*n) clamped to the
/// last element. With inclusive >= decisions this realizes a predicted
/// positive share of ceil((1-q)*n)/n.
inline double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) raise(Errc::SchemaError, "quantile of empty set");
  std::sort(values.begin(), values.end());
  auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(values.size())));
  idx = std::min(idx, values.size() - 1);
  return values[idx];
}

/// Per-group score thresholds: demographic parity thresholds each group at
/// the (1 - target_rate) quantile of its scores; tpr parity uses only the
/// positive-label scores, equalizing recall across groups.
class GroupThreshold : public PostProcessor {
 public:
  GroupThreshold(ThresholdStrategy strategy, double target_rate)
      : strategy_(strategy), target_rate_(target_rate) {
    if (!(target_rate_ >= 0.0 && target_rate_ <= 1.0))
      raise(Errc::InvalidHyperparameter, "target_rate must lie in [0, 1]");
  }

  void fit(const std::vector<double>& scores, const std::vector<std::int32_t>& labels,
           const std::vector<std::int32_t>& groups) override {
    if (scores.size() != labels.size() || scores.size() != groups.size() || scores.empty())
      raise(Errc::SchemaError, "scores, labels and groups must be non-empty and aligned");
    const double q = 1.0 - target_rate_;
    std::map<std::int32_t, std::vector<double>> pools;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (strategy_ == ThresholdStrategy::DemographicParity || labels[i] == 1)
        pools[groups[i]].push_back(scores[i]);
    }
    std::set<std::int32_t> present(groups.begin(), groups.end());
    thresholds_.clear();
    for (auto g : present) {
      auto it = pools.find(g);
      if (it == pools.end() || it->second.empty()) {
        if (strategy_ == ThresholdStrategy::TprParity)
          raise(Errc::NoPositivesInGroup,
                "group " + std::to_string(g) + " has no positive labels");
        raise(Errc::EmptyGroupAtFit, "group " + std::to_string(g) + " is empty");
      }
      thresholds_[g] = empirical_quantile(it->second, q);
    }
    pooled_threshold_ = empirical_quantile(scores, q);
    fitted_ = true;
  }

  /// Hard 0/1 decisions; groups unseen at fit fall back to the pooled
  /// threshold.
  std::vector<double> adjust(const std::vector<double>& scores,
                             const std::vector<std::int32_t>& groups) const override {
    if (!fitted_) raise(Errc::NotFitted, "GroupThreshold::adjust before fit");
    if (scores.size() != groups.size())
      raise(Errc::SchemaError, "scores and groups must be aligned");
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      auto it = thresholds_.find(groups[i]);
      const double t = it == thresholds_.end() ? pooled_threshold_ : it->second;
      out[i] = scores[i] >= t ? 1.0 : 0.0;
    }
    return out;
  }

  const std::map<std::int32_t, double>& thresholds() const { return thresholds_; }

  std::string kind() const override { return "group_threshold"; }

  nlohmann::json learned_state() const override {
    nlohmann::json th = nlohmann::json::array();
    for (const auto& [g, t] : thresholds_)
      th.push_back({{"group", g}, {"threshold", t}});
    return {{"strategy", threshold_strategy_name(strategy_)},
            {"target_rate", target_rate_},
            {"thresholds", th},
            {"pooled_threshold", pooled_threshold_}};
  }

 private:
  ThresholdStrategy strategy_;
  double target_rate_;
  std::map<std::int32_t, double> thresholds_;
  double pooled_threshold_ = 0.5;
  bool fitted_ = false;
};

// ---------------------------------------------------------------------------
// Method registry

/// Declared parameters and factory functions per method kind. The experiment
/// layer validates config search spaces against these declarations.
struct MethodRegistry {
  static const std::vector<std::string>& pre_kinds() {
    static const std::vector<std::string> kinds{"reweighing", "prevalence_sampling"};
    return kinds;
  }
  static const std::vector<std::string>& estimator_kinds() {
    static const std::vector<std::string> kinds{"logreg", "fair_logreg"};
    return kinds;
  }
  static const std::vector<std::string>& post_kinds() {
    static const std::vector<std::string> kinds{"group_threshold"};
    return kinds;
  }

  static std::vector<std::string> declared_params(const std::string& kind) {
    if (kind == "reweighing" || kind == "prevalence_sampling") return {};
    if (kind == "logreg")
      return {"learning_rate", "l2_penalty", "max_iters", "tol"};
    if (kind == "fair_logreg")
      return {"learning_rate", "l2_penalty", "max_iters", "tol", "fairness_lambda"};
    if (kind == "group_threshold") return {"strategy", "target_rate"};
    raise(Errc::UnknownKind, "no method kind named '" + kind + "'");
  }

  static std::unique_ptr<PreProcessor> make_pre(const std::string& kind,
                                                const ParamAssignment&,
                                                std::uint64_t seed) {
    if (kind == "reweighing") return std::make_unique<Reweighing>();
    if (kind == "prevalence_sampling") return std::make_unique<PrevalenceSampling>(seed);
    raise(Errc::UnknownKind, "no pre-processing kind named '" + kind + "'");
  }

  static std::unique_ptr<Estimator> make_estimator(const std::string& kind,
                                                   const ParamAssignment& params) {
    if (kind != "logreg" && kind != "fair_logreg")
      raise(Errc::UnknownKind, "no estimator kind named '" + kind + "'");
    LogregHyperparams hp;
    if (kind == "fair_logreg") hp.fairness_lambda = 1.0;
    for (const auto& [name, value] : params) {
      if (name == "learning_rate") hp.learning_rate = param_as_double(value, name);
      else if (name == "l2_penalty") hp.l2_penalty = param_as_double(value, name);
      else if (name == "max_iters") hp.max_iters = param_as_int(value, name);
      else if (name == "tol") hp.tol = param_as_double(value, name);
      else if (name == "fairness_lambda" && kind == "fair_logreg")
        hp.fairness_lambda = param_as_double(value, name);
      else
        raise(Errc::InvalidHyperparameter, "'" + name + "' is not a parameter of " + kind);
    }
    return std::make_unique<LogisticRegression>(hp);
  }

  static std::unique_ptr<PostProcessor> make_post(const std::string& kind,
                                                  const ParamAssignment& params) {
    if (kind != "group_threshold")
      raise(Errc::UnknownKind, "no post-processing kind named '" + kind + "'");
    ThresholdStrategy strategy = ThresholdStrategy::DemographicParity;
    double target_rate = 0.5;
    for (const auto& [name, value] : params) {
      if (name == "strategy")
        strategy = threshold_strategy_from_name(param_as_string(value, name));
      else if (name == "target_rate")
        target_rate = param_as_double(value, name);
      else
        raise(Errc::InvalidHyperparameter, "'" + name + "' is not a parameter of " + kind);
    }
    return std::make_unique<GroupThreshold>(strategy, target_rate);
  }
};

}  // namespace fairflow
