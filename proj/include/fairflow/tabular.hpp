#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "fairflow/errors.hpp"
#include "fairflow/matrix.hpp"
#include "fairflow/prng.hpp"

namespace fairflow {

enum class ColumnKind { Numeric, Categorical, BinaryLabel, SensitiveGroup };

inline const char* column_kind_name(ColumnKind k) {
  switch (k) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::BinaryLabel: return "binary_label";
    case ColumnKind::SensitiveGroup: return "sensitive_group";
  }
  return "?";
}

inline ColumnKind column_kind_from_name(const std::string& s) {
  if (s == "numeric") return ColumnKind::Numeric;
  if (s == "categorical") return ColumnKind::Categorical;
  if (s == "binary_label") return ColumnKind::BinaryLabel;
  if (s == "sensitive_group") return ColumnKind::SensitiveGroup;
  raise(Errc::SchemaError, "unknown column kind '" + s + "'");
}

struct ColumnSpec {
  std::string name;
  ColumnKind kind;

  bool operator==(const ColumnSpec&) const = default;
};

/// Storage for one column. Numeric columns use `numeric`; categorical and
/// sensitive columns store integer codes into `levels` (first-appearance
/// order); the label column stores 0/1 in `codes` with no levels.
struct ColumnData {
  std::vector<double> numeric;
  std::vector<std::int32_t> codes;
  std::vector<std::string> levels;

  bool operator==(const ColumnData&) const = default;
};

namespace detail {

inline void validate_schema(const std::vector<ColumnSpec>& schema) {
  int labels = 0, groups = 0;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].kind == ColumnKind::BinaryLabel) ++labels;
    if (schema[i].kind == ColumnKind::SensitiveGroup) ++groups;
    for (std::size_t j = i + 1; j < schema.size(); ++j)
      if (schema[i].name == schema[j].name)
        raise(Errc::DuplicateName, "column '" + schema[i].name + "' declared twice");
  }
  if (labels != 1)
    raise(Errc::SchemaError, "schema must declare exactly one binary_label column");
  if (groups != 1)
    raise(Errc::SchemaError, "schema must declare exactly one sensitive_group column");
}

}  // namespace detail

/// Immutable typed table with one label column and one sensitive column.
class Dataset {
 public:
  Dataset(std::vector<ColumnSpec> schema, std::vector<ColumnData> columns)
      : schema_(std::move(schema)), columns_(std::move(columns)) {
    detail::validate_schema(schema_);
    if (schema_.size() != columns_.size())
      raise(Errc::SchemaError, "schema/data column count mismatch");
    n_rows_ = 0;
    for (std::size_t i = 0; i < schema_.size(); ++i) {
      const auto& col = columns_[i];
      const std::size_t n = schema_[i].kind == ColumnKind::Numeric
                                ? col.numeric.size()
                                : col.codes.size();
      if (i == 0) n_rows_ = n;
      if (n != n_rows_)
        raise(Errc::SchemaError, "column '" + schema_[i].name + "' has " +
                                     std::to_string(n) + " rows, expected " +
                                     std::to_string(n_rows_));
      if (schema_[i].kind == ColumnKind::BinaryLabel) {
        label_col_ = i;
        for (auto v : col.codes)
          if (v != 0 && v != 1)
            raise(Errc::LabelNotBinary, "label column '" + schema_[i].name +
                                            "' holds value " + std::to_string(v));
      }
      if (schema_[i].kind == ColumnKind::SensitiveGroup) group_col_ = i;
    }
    if (n_rows_ == 0) raise(Errc::EmptyDataset, "dataset has no rows");
    const auto& g = columns_[group_col_];
    std::vector<int> seen(g.levels.size(), 0);
    for (auto c : g.codes) seen[static_cast<std::size_t>(c)] = 1;
    int distinct = 0;
    for (int s : seen) distinct += s;
    if (distinct < 2)
      raise(Errc::TypeViolation, "sensitive column '" + schema_[group_col_].name +
                                     "' must carry at least 2 distinct groups");
  }

  std::size_t n_rows() const { return n_rows_; }
  const std::vector<ColumnSpec>& schema() const { return schema_; }
  const ColumnData& column(std::size_t i) const { return columns_[i]; }

  std::size_t label_column() const { return label_col_; }
  std::size_t group_column() const { return group_col_; }

  const std::vector<std::int32_t>& labels() const {
    return columns_[label_col_].codes;
  }
  const std::vector<std::int32_t>& group_codes() const {
    return columns_[group_col_].codes;
  }
  const std::vector<std::string>& group_levels() const {
    return columns_[group_col_].levels;
  }

  /// Row-wise group symbols (levels expanded); handy for audits.
  std::vector<std::string> group_names() const {
    const auto& col = columns_[group_col_];
    std::vector<std::string> out;
    out.reserve(n_rows_);
    for (auto c : col.codes) out.push_back(col.levels[static_cast<std::size_t>(c)]);
    return out;
  }

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < schema_.size(); ++i)
      if (schema_[i].name == name) return i;
    raise(Errc::MissingColumn, "no column named '" + name + "'");
  }

  /// Canonical string form of a cell, used by the CSV writer and by
  /// column-based splitting.
  std::string cell_to_string(std::size_t row, std::size_t col) const {
    const auto& spec = schema_[col];
    const auto& data = columns_[col];
    switch (spec.kind) {
      case ColumnKind::Numeric: {
        char buf[32];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, data.numeric[row]);
        return std::string(buf, ptr);
      }
      case ColumnKind::BinaryLabel:
        return data.codes[row] ? "1" : "0";
      case ColumnKind::Categorical:
      case ColumnKind::SensitiveGroup:
        return data.levels[static_cast<std::size_t>(data.codes[row])];
    }
    return {};
  }

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<ColumnSpec> schema_;
  std::vector<ColumnData> columns_;
  std::size_t n_rows_ = 0;
  std::size_t label_col_ = 0;
  std::size_t group_col_ = 0;
};

// ---------------------------------------------------------------------------
// CSV (RFC 4180, UTF-8, header required, '.' decimal separator)

namespace detail {

inline std::vector<std::vector<std::string>> parse_csv_records(
    const std::string& text, const std::string& path) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        any = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty() || !fields.empty()) {
          fields.push_back(std::move(field));
          field.clear();
          records.push_back(std::move(fields));
          fields.clear();
          any = false;
        }
        break;
      default:
        field.push_back(c);
        any = true;
    }
  }
  if (in_quotes) raise(Errc::ParseError, path + ": unterminated quoted field");
  if (any || !field.empty() || !fields.empty()) {
    fields.push_back(std::move(field));
    records.push_back(std::move(fields));
  }
  return records;
}

inline bool parse_double_token(const std::string& tok, double& out) {
  if (tok.empty()) return false;
  const char* begin = tok.data();
  const char* end = tok.data() + tok.size();
  if (*begin == '+') ++begin;  // from_chars rejects leading '+'
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

/// Shared column assembler for the CSV and Parquet loaders. Rows arrive as
/// typed-or-string cells; categorical levels are recorded in first-appearance
/// order.
class ColumnAccumulator {
 public:
  ColumnAccumulator(ColumnSpec spec, std::string source)
      : spec_(std::move(spec)), source_(std::move(source)) {}

  void add_text(std::size_t row, const std::string& tok) {
    switch (spec_.kind) {
      case ColumnKind::Numeric: {
        double v;
        if (!parse_double_token(tok, v))
          raise(Errc::TypeViolation, cell_ref(row) + ": expected a finite number, got '" + tok + "'");
        data_.numeric.push_back(v);
        break;
      }
      case ColumnKind::BinaryLabel: {
        double v;
        if (!parse_double_token(tok, v))
          raise(Errc::TypeViolation, cell_ref(row) + ": expected 0 or 1, got '" + tok + "'");
        add_label(row, v);
        break;
      }
      case ColumnKind::Categorical:
      case ColumnKind::SensitiveGroup:
        if (tok.empty())
          raise(Errc::TypeViolation, cell_ref(row) + ": empty value in categorical column");
        add_symbol(tok);
        break;
    }
  }

  void add_number(std::size_t row, double v) {
    switch (spec_.kind) {
      case ColumnKind::Numeric:
        if (!std::isfinite(v))
          raise(Errc::TypeViolation, cell_ref(row) + ": non-finite value");
        data_.numeric.push_back(v);
        break;
      case ColumnKind::BinaryLabel:
        add_label(row, v);
        break;
      default: {
        // numeric source feeding a categorical column: use the canonical
        // shortest textual form as the symbol
        char buf[32];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        add_symbol(std::string(buf, ptr));
      }
    }
  }

  void add_label(std::size_t row, double v) {
    if (v == 0.0) {
      data_.codes.push_back(0);
    } else if (v == 1.0) {
      data_.codes.push_back(1);
    } else {
      raise(Errc::LabelNotBinary, cell_ref(row) + ": label value " + std::to_string(v) + " is outside {0, 1}");
    }
  }

  void add_symbol(const std::string& tok) {
    auto it = level_index_.find(tok);
    if (it == level_index_.end()) {
      it = level_index_.emplace(tok, static_cast<std::int32_t>(data_.levels.size())).first;
      data_.levels.push_back(tok);
    }
    data_.codes.push_back(it->second);
  }

  ColumnData take() { return std::move(data_); }
  const ColumnSpec& spec() const { return spec_; }

 private:
  std::string cell_ref(std::size_t row) const {
    return source_ + ": row " + std::to_string(row + 1) + ", column '" + spec_.name + "'";
  }

  ColumnSpec spec_;
  std::string source_;
  ColumnData data_;
  std::unordered_map<std::string, std::int32_t> level_index_;
};

}  // namespace detail

inline Dataset load_csv(const std::string& path, const std::vector<ColumnSpec>& schema) {
  detail::validate_schema(schema);
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  auto records = detail::parse_csv_records(buf.str(), path);
  if (records.empty()) raise(Errc::EmptyDataset, path + ": no header row");
  const auto& header = records.front();

  std::vector<std::size_t> file_col(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    bool found = false;
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == schema[i].name) {
        file_col[i] = j;
        found = true;
        break;
      }
    if (!found)
      raise(Errc::MissingColumn, path + ": header lacks column '" + schema[i].name + "'");
  }
  if (records.size() == 1) raise(Errc::EmptyDataset, path + ": no data rows");

  std::vector<detail::ColumnAccumulator> acc;
  acc.reserve(schema.size());
  for (const auto& spec : schema) acc.emplace_back(spec, path);

  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size())
      raise(Errc::ParseError, path + ": row " + std::to_string(r) + " has " +
                                  std::to_string(rec.size()) + " fields, header has " +
                                  std::to_string(header.size()));
    for (std::size_t i = 0; i < schema.size(); ++i)
      acc[i].add_text(r - 1, rec[file_col[i]]);
  }

  std::vector<ColumnData> cols;
  cols.reserve(acc.size());
  for (auto& a : acc) cols.push_back(a.take());
  return Dataset(schema, std::move(cols));
}

inline void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot open " + path + " for writing");
  auto quote = [](const std::string& s) {
    bool needs = s.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += "\"\"";
      else q.push_back(c);
    }
    q.push_back('"');
    return q;
  };
  const auto& schema = data.schema();
  for (std::size_t i = 0; i < schema.size(); ++i)
    out << (i ? "," : "") << quote(schema[i].name);
  out << "\n";
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    for (std::size_t c = 0; c < schema.size(); ++c)
      out << (c ? "," : "") << quote(data.cell_to_string(r, c));
    out << "\n";
  }
  if (!out) raise(Errc::IoError, "failed writing " + path);
}

// ---------------------------------------------------------------------------
// Splits

enum class Partition : std::uint8_t { Train = 0, Validation = 1, Test = 2 };

inline const char* partition_name(Partition p) {
  switch (p) {
    case Partition::Train: return "train";
    case Partition::Validation: return "validation";
    case Partition::Test: return "test";
  }
  return "?";
}

inline Partition partition_from_name(const std::string& s) {
  if (s == "train") return Partition::Train;
  if (s == "validation") return Partition::Validation;
  if (s == "test") return Partition::Test;
  raise(Errc::SchemaError, "unknown partition '" + s + "' (expected train|validation|test)");
}

struct SplitSpec {
  enum class Method { Random, Column };

  Method method = Method::Random;
  std::array<double, 3> proportions{0.7, 0.15, 0.15};  // train, validation, test
  std::uint64_t seed = 0;
  std::string split_column;                   // column method
  std::map<std::string, Partition> mapping;   // column method

  bool operator==(const SplitSpec&) const = default;
};

class SplitDataset {
 public:
  SplitDataset(Dataset base, std::vector<Partition> assignment, SplitSpec spec)
      : base_(std::move(base)), assignment_(std::move(assignment)), spec_(std::move(spec)) {
    if (assignment_.size() != base_.n_rows())
      raise(Errc::SchemaError, "assignment length does not match row count");
    std::array<std::size_t, 3> counts{0, 0, 0};
    for (auto p : assignment_) counts[static_cast<std::size_t>(p)]++;
    for (std::size_t k = 0; k < 3; ++k)
      if (counts[k] == 0)
        raise(Errc::DegenerateSplit,
              std::string(partition_name(static_cast<Partition>(k))) + " partition is empty");
  }

  const Dataset& base() const { return base_; }
  const std::vector<Partition>& assignment() const { return assignment_; }
  const SplitSpec& spec() const { return spec_; }

  std::vector<std::size_t> partition_indices(Partition p) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < assignment_.size(); ++i)
      if (assignment_[i] == p) idx.push_back(i);
    return idx;
  }

 private:
  Dataset base_;
  std::vector<Partition> assignment_;
  SplitSpec spec_;
};

/// Partitions rows per the spec. Random splits shuffle with the portable
/// generator and cut at floor(n*p_train) and floor(n*(p_train+p_val));
/// remainder rows fall to test.
inline SplitDataset create_splits(const Dataset& data, const SplitSpec& spec) {
  const std::size_t n = data.n_rows();
  std::vector<Partition> assignment(n, Partition::Test);

  if (spec.method == SplitSpec::Method::Random) {
    double sum = 0.0;
    for (double p : spec.proportions) {
      if (!(p > 0.0 && p < 1.0))
        raise(Errc::InvalidFractions, "split proportions must lie in (0, 1)");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      raise(Errc::InvalidFractions, "split proportions must sum to 1");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Xoshiro256 rng(spec.seed);
    shuffle(order, rng);
    const auto n_train = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * spec.proportions[0]));
    const auto n_train_val = static_cast<std::size_t>(std::floor(
        static_cast<double>(n) * (spec.proportions[0] + spec.proportions[1])));
    for (std::size_t k = 0; k < n; ++k) {
      if (k < n_train) assignment[order[k]] = Partition::Train;
      else if (k < n_train_val) assignment[order[k]] = Partition::Validation;
      else assignment[order[k]] = Partition::Test;
    }
  } else {
    const std::size_t col = data.column_index(spec.split_column);
    const auto kind = data.schema()[col].kind;
    if (kind == ColumnKind::Numeric)
      raise(Errc::Unsupported, "split column '" + spec.split_column +
                                   "' must be categorical, not numeric");
    for (std::size_t r = 0; r < n; ++r) {
      const std::string value = data.cell_to_string(r, col);
      auto it = spec.mapping.find(value);
      if (it == spec.mapping.end())
        raise(Errc::UnmappedSplitValue, "split value '" + value + "' (row " +
                                            std::to_string(r + 1) + ") has no partition");
      assignment[r] = it->second;
    }
  }
  return SplitDataset(data, std::move(assignment), spec);
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Two Gaussian features per row; feature means shift with the label by
/// `separation[g]` (full shift on x1, half on x2), labels are
/// Bernoulli(base_rates[g]), group sizes follow group_fractions via largest
/// remainder. Fully determined by `seed`.
inline Dataset generate_synthetic(std::size_t n_rows,
                                  const std::vector<double>& group_fractions,
                                  const std::vector<double>& base_rates,
                                  const std::vector<double>& separation,
                                  std::uint64_t seed) {
  const std::size_t k = group_fractions.size();
  if (k < 2) raise(Errc::InvalidFractions, "need at least 2 groups");
  if (base_rates.size() != k || separation.size() != k)
    raise(Errc::InvalidFractions, "group_fractions, base_rates and separation must have equal length");
  double sum = 0.0;
  for (double f : group_fractions) {
    if (!(f > 0.0 && f < 1.0)) raise(Errc::InvalidFractions, "group fractions must lie in (0, 1)");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) raise(Errc::InvalidFractions, "group fractions must sum to 1");
  for (double b : base_rates)
    if (!(b > 0.0 && b < 1.0)) raise(Errc::InvalidFractions, "base rates must lie in (0, 1)");
  if (n_rows < 20) raise(Errc::SchemaError, "n_rows must be at least 20");

  // largest-remainder allocation of rows to groups
  std::vector<std::size_t> counts(k);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < k; ++g) {
    const double exact = static_cast<double>(n_rows) * group_fractions[g];
    counts[g] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[g];
    remainders.push_back({-(exact - std::floor(exact)), g});
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t i = 0; assigned < n_rows; ++i, ++assigned)
    counts[remainders[i % k].second]++;

  Xoshiro256 rng(seed);
  ColumnData x1, x2, grp, lbl;
  for (std::size_t g = 0; g < k; ++g) {
    grp.levels.push_back("g" + std::to_string(g));
    for (std::size_t i = 0; i < counts[g]; ++i) {
      const int y = rng.next_double() < base_rates[g] ? 1 : 0;
      const double shift = (y - 0.5) * separation[g];
      x1.numeric.push_back(shift + rng.gaussian());
      x2.numeric.push_back(0.5 * shift + rng.gaussian());
      grp.codes.push_back(static_cast<std::int32_t>(g));
      lbl.codes.push_back(y);
    }
  }

  std::vector<ColumnSpec> schema = {{"x1", ColumnKind::Numeric},
                                    {"x2", ColumnKind::Numeric},
                                    {"group", ColumnKind::SensitiveGroup},
                                    {"y", ColumnKind::BinaryLabel}};
  return Dataset(std::move(schema), {std::move(x1), std::move(x2), std::move(grp), std::move(lbl)});
}

// ---------------------------------------------------------------------------
// Feature encoding at the estimator boundary

/// Maps dataset rows to a dense feature matrix: numeric columns pass through,
/// categorical columns are one-hot encoded with levels ordered by first
/// appearance in the fit rows. Unseen levels encode to all zeros. The
/// sensitive column is excluded unless `include_group` is set.
class FeatureEncoder {
 public:
  void fit(const Dataset& data, const std::vector<std::size_t>& rows,
           bool include_group = false) {
    slots_.clear();
    width_ = 0;
    for (std::size_t c = 0; c < data.schema().size(); ++c) {
      const auto kind = data.schema()[c].kind;
      if (kind == ColumnKind::BinaryLabel) continue;
      if (kind == ColumnKind::SensitiveGroup && !include_group) continue;
      Slot slot;
      slot.column = c;
      if (kind == ColumnKind::Numeric) {
        slot.offset = width_;
        width_ += 1;
      } else {
        const auto& codes = data.column(c).codes;
        slot.offset = width_;
        for (std::size_t r : rows) {
          const auto code = codes[r];
          if (slot.level_slot.find(code) == slot.level_slot.end()) {
            const std::size_t next = slot.level_slot.size();
            slot.level_slot.emplace(code, next);
          }
        }
        width_ += slot.level_slot.size();
      }
      slots_.push_back(std::move(slot));
    }
    fitted_ = true;
  }

  Matrix encode(const Dataset& data, const std::vector<std::size_t>& rows) const {
    if (!fitted_) raise(Errc::NotFitted, "FeatureEncoder::encode before fit");
    Matrix m(rows.size(), width_);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t r = rows[i];
      for (const auto& slot : slots_) {
        const auto& spec = data.schema()[slot.column];
        if (spec.kind == ColumnKind::Numeric) {
          m.at(i, slot.offset) = data.column(slot.column).numeric[r];
        } else {
          const auto code = data.column(slot.column).codes[r];
          auto it = slot.level_slot.find(code);
          if (it != slot.level_slot.end())
            m.at(i, slot.offset + it->second) = 1.0;
        }
      }
    }
    return m;
  }

  std::size_t width() const { return width_; }

 private:
  struct Slot {
    std::size_t column = 0;
    std::size_t offset = 0;
    std::map<std::int32_t, std::size_t> level_slot;  // insertion = first appearance
  };

  std::vector<Slot> slots_;
  std::size_t width_ = 0;
  bool fitted_ = false;
};

}  // namespace fairflow
