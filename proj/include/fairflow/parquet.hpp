#pragma once

// Minimal Parquet reader: flat schemas, uncompressed pages, PLAIN and
// dictionary encodings (v1 and v2 data pages). Covers files produced by the
// mainstream writers when compression is disabled; anything outside that
// subset raises Unsupported with a pointed message rather than misreading.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fairflow/errors.hpp"
#include "fairflow/tabular.hpp"

namespace fairflow {
namespace parquet_detail {

// --- bounds-checked byte cursor ---------------------------------------------

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : p_(data), end_(data + size) {}

  std::uint8_t u8() {
    need(1);
    return *p_++;
  }
  std::uint32_t u32le() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p_[i]) << (8 * i);
    p_ += 4;
    return v;
  }
  std::uint64_t u64le() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p_[i]) << (8 * i);
    p_ += 8;
    return v;
  }
  const std::uint8_t* bytes(std::size_t n) {
    need(n);
    const std::uint8_t* at = p_;
    p_ += n;
    return at;
  }
  std::size_t remaining() const { return static_cast<std::size_t>(end_ - p_); }
  const std::uint8_t* pos() const { return p_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) raise(Errc::ParseError, "parquet data truncated");
  }
  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

// --- thrift compact protocol -------------------------------------------------

enum : std::uint8_t {
  kStop = 0,
  kBoolTrue = 1,
  kBoolFalse = 2,
  kByte = 3,
  kI16 = 4,
  kI32 = 5,
  kI64 = 6,
  kDouble = 7,
  kBinary = 8,
  kList = 9,
  kSet = 10,
  kMap = 11,
  kStruct = 12,
};

class CompactReader {
 public:
  explicit CompactReader(ByteReader& in) : in_(in) {}

  std::uint64_t varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      const std::uint8_t b = in_.u8();
      v |= static_cast<std::uint64_t>(b & 0x7F) << shift;
      if (!(b & 0x80)) return v;
    }
    raise(Errc::ParseError, "parquet metadata: varint too long");
  }

  std::int64_t zigzag() {
    const std::uint64_t n = varint();
    return static_cast<std::int64_t>((n >> 1) ^ (~(n & 1) + 1));
  }

  /// Returns wire type (kStop at end of struct) and resolves the field id.
  std::uint8_t field_begin(std::int16_t& last_id, std::int16_t& id) {
    const std::uint8_t b = in_.u8();
    if (b == kStop) return kStop;
    const std::uint8_t type = b & 0x0F;
    const std::uint8_t delta = b >> 4;
    id = delta != 0 ? static_cast<std::int16_t>(last_id + delta)
                    : static_cast<std::int16_t>(zigzag());
    last_id = id;
    return type;
  }

  std::string binary() {
    const auto len = varint();
    const auto* at = in_.bytes(static_cast<std::size_t>(len));
    return std::string(reinterpret_cast<const char*>(at), static_cast<std::size_t>(len));
  }

  void list_begin(std::uint8_t& elem_type, std::uint64_t& size) {
    const std::uint8_t b = in_.u8();
    elem_type = b & 0x0F;
    size = b >> 4;
    if (size == 15) size = varint();
  }

  void skip(std::uint8_t type) {
    switch (type) {
      case kBoolTrue:
      case kBoolFalse:
        return;  // value lives in the field header
      case kByte:
        in_.u8();
        return;
      case kI16:
      case kI32:
      case kI64:
        varint();
        return;
      case kDouble:
        in_.bytes(8);
        return;
      case kBinary:
        in_.bytes(static_cast<std::size_t>(varint()));
        return;
      case kList:
      case kSet: {
        std::uint8_t et;
        std::uint64_t n;
        list_begin(et, n);
        for (std::uint64_t i = 0; i < n; ++i) skip_element(et);
        return;
      }
      case kMap: {
        const auto n = varint();
        if (n == 0) return;
        const std::uint8_t kv = in_.u8();
        for (std::uint64_t i = 0; i < n; ++i) {
          skip_element(kv >> 4);
          skip_element(kv & 0x0F);
        }
        return;
      }
      case kStruct:
        skip_struct();
        return;
      default:
        raise(Errc::ParseError, "parquet metadata: unknown thrift type " + std::to_string(type));
    }
  }

  void skip_struct() {
    std::int16_t last = 0, id = 0;
    while (true) {
      const std::uint8_t t = field_begin(last, id);
      if (t == kStop) return;
      skip(t);
    }
  }

 private:
  void skip_element(std::uint8_t type) {
    // bool list elements occupy one byte, unlike bool fields
    if (type == kBoolTrue || type == kBoolFalse) {
      in_.u8();
      return;
    }
    skip(type);
  }

  ByteReader& in_;
};

// --- parquet metadata structs (the fields this reader needs) ----------------

enum class Physical : std::int32_t {
  Boolean = 0,
  Int32 = 1,
  Int64 = 2,
  Int96 = 3,
  Float = 4,
  Double = 5,
  ByteArray = 6,
  FixedLenByteArray = 7,
};

struct SchemaNode {
  std::string name;
  std::optional<Physical> type;
  std::int32_t repetition = 0;  // 0 required, 1 optional, 2 repeated
  std::int32_t num_children = 0;
};

struct ColumnMeta {
  Physical type = Physical::Boolean;
  std::vector<std::string> path;
  std::int32_t codec = 0;  // 0 = uncompressed
  std::int64_t num_values = 0;
  std::int64_t data_page_offset = 0;
  std::optional<std::int64_t> dictionary_page_offset;
};

struct RowGroupMeta {
  std::vector<ColumnMeta> columns;
  std::int64_t num_rows = 0;
};

struct FileMeta {
  std::vector<SchemaNode> schema;
  std::int64_t num_rows = 0;
  std::vector<RowGroupMeta> row_groups;
};

inline SchemaNode read_schema_element(CompactReader& tr) {
  SchemaNode node;
  std::int16_t last = 0, id = 0;
  while (true) {
    const std::uint8_t t = tr.field_begin(last, id);
    if (t == kStop) break;
    switch (id) {
      case 1: node.type = static_cast<Physical>(tr.zigzag()); break;
      case 3: node.repetition = static_cast<std::int32_t>(tr.zigzag()); break;
      case 4: node.name = tr.binary(); break;
      case 5: node.num_children = static_cast<std::int32_t>(tr.zigzag()); break;
      default: tr.skip(t); break;
    }
  }
  return node;
}

inline ColumnMeta read_column_meta(CompactReader& tr) {
  ColumnMeta meta;
  std::int16_t last = 0, id = 0;
  while (true) {
    const std::uint8_t t = tr.field_begin(last, id);
    if (t == kStop) break;
    switch (id) {
      case 1: meta.type = static_cast<Physical>(tr.zigzag()); break;
      case 3: {
        std::uint8_t et;
        std::uint64_t n;
        tr.list_begin(et, n);
        for (std::uint64_t i = 0; i < n; ++i) meta.path.push_back(tr.binary());
        break;
      }
      case 4: meta.codec = static_cast<std::int32_t>(tr.zigzag()); break;
      case 5: meta.num_values = tr.zigzag(); break;
      case 9: meta.data_page_offset = tr.zigzag(); break;
      case 11: meta.dictionary_page_offset = tr.zigzag(); break;
      default: tr.skip(t); break;
    }
  }
  return meta;
}

inline ColumnMeta read_column_chunk(CompactReader& tr) {
  ColumnMeta meta;
  std::int16_t last = 0, id = 0;
  bool have_meta = false;
  while (true) {
    const std::uint8_t t = tr.field_begin(last, id);
    if (t == kStop) break;
    if (id == 3 && t == kStruct) {
      meta = read_column_meta(tr);
      have_meta = true;
    } else {
      tr.skip(t);
    }
  }
  if (!have_meta) raise(Errc::ParseError, "parquet column chunk lacks metadata");
  return meta;
}

inline RowGroupMeta read_row_group(CompactReader& tr) {
  RowGroupMeta rg;
  std::int16_t last = 0, id = 0;
  while (true) {
    const std::uint8_t t = tr.field_begin(last, id);
    if (t == kStop) break;
    switch (id) {
      case 1: {
        std::uint8_t et;
        std::uint64_t n;
        tr.list_begin(et, n);
        for (std::uint64_t i = 0; i < n; ++i) rg.columns.push_back(read_column_chunk(tr));
        break;
      }
      case 3: rg.num_rows = tr.zigzag(); break;
      default: tr.skip(t); break;
    }
  }
  return rg;
}

inline FileMeta read_file_meta(CompactReader& tr) {
  FileMeta fm;
  std::int16_t last = 0, id = 0;
  while (true) {
    const std::uint8_t t = tr.field_begin(last, id);
    if (t == kStop) break;
    switch (id) {
      case 2: {
        std::uint8_t et;
        std::uint64_t n;
        tr.list_begin(et, n);
        for (std::uint64_t i = 0; i < n; ++i) fm.schema.push_back(read_schema_element(tr));
        break;
      }
      case 3: fm.num_rows = tr.zigzag(); break;
      case 4: {
        std::uint8_t et;
        std::uint64_t n;
        tr.list_begin(et, n);
        for (std::uint64_t i = 0; i < n; ++i) fm.row_groups.push_back(read_row_group(tr));
        break;
      }
      default: tr.skip(t); break;
    }
  }
  return fm;
}

struct PageHeader {
  std::int32_t type = 0;  // 0 data, 2 dictionary, 3 data v2
  std::int32_t compressed_size = 0;
  // data page v1
  std::int32_t num_values = 0;
  std::int32_t encoding = 0;
  // data page v2 extras
  std::int32_t num_nulls = 0;
  std::int32_t def_levels_bytes = 0;
  std::int32_t rep_levels_bytes = 0;
};

inline PageHeader read_page_header(CompactReader& tr) {
  PageHeader ph;
  std::int16_t last = 0, id = 0;
  while (true) {
    const std::uint8_t t = tr.field_begin(last, id);
    if (t == kStop) break;
    switch (id) {
      case 1: ph.type = static_cast<std::int32_t>(tr.zigzag()); break;
      case 3: ph.compressed_size = static_cast<std::int32_t>(tr.zigzag()); break;
      case 5: {  // DataPageHeader
        std::int16_t plast = 0, pid = 0;
        while (true) {
          const std::uint8_t pt = tr.field_begin(plast, pid);
          if (pt == kStop) break;
          if (pid == 1) ph.num_values = static_cast<std::int32_t>(tr.zigzag());
          else if (pid == 2) ph.encoding = static_cast<std::int32_t>(tr.zigzag());
          else tr.skip(pt);
        }
        break;
      }
      case 7: {  // DictionaryPageHeader
        std::int16_t plast = 0, pid = 0;
        while (true) {
          const std::uint8_t pt = tr.field_begin(plast, pid);
          if (pt == kStop) break;
          if (pid == 1) ph.num_values = static_cast<std::int32_t>(tr.zigzag());
          else if (pid == 2) ph.encoding = static_cast<std::int32_t>(tr.zigzag());
          else tr.skip(pt);
        }
        break;
      }
      case 8: {  // DataPageHeaderV2
        std::int16_t plast = 0, pid = 0;
        while (true) {
          const std::uint8_t pt = tr.field_begin(plast, pid);
          if (pt == kStop) break;
          if (pid == 1) ph.num_values = static_cast<std::int32_t>(tr.zigzag());
          else if (pid == 2) ph.num_nulls = static_cast<std::int32_t>(tr.zigzag());
          else if (pid == 4) ph.encoding = static_cast<std::int32_t>(tr.zigzag());
          else if (pid == 5) ph.def_levels_bytes = static_cast<std::int32_t>(tr.zigzag());
          else if (pid == 6) ph.rep_levels_bytes = static_cast<std::int32_t>(tr.zigzag());
          else tr.skip(pt);
        }
        break;
      }
      default: tr.skip(t); break;
    }
  }
  return ph;
}

// --- value decoding ----------------------------------------------------------

/// Decoded column chunk values: exactly one of the payload vectors is used,
/// chosen by physical type.
struct ColumnValues {
  Physical type = Physical::Boolean;
  std::vector<std::int64_t> ints;     // BOOLEAN / INT32 / INT64
  std::vector<double> reals;          // FLOAT / DOUBLE
  std::vector<std::string> strings;   // BYTE_ARRAY
  std::size_t size() const {
    return std::max(ints.size(), std::max(reals.size(), strings.size()));
  }
};

/// RLE / bit-packed hybrid decoder used for definition levels and dictionary
/// indices.
inline void decode_rle_hybrid(ByteReader& in, std::uint32_t bit_width, std::size_t count,
                              std::vector<std::uint32_t>& out) {
  if (bit_width == 0) {
    out.insert(out.end(), count, 0u);
    return;
  }
  const std::size_t value_bytes = (bit_width + 7) / 8;
  while (out.size() < count) {
    CompactReader tr(in);
    const std::uint64_t header = tr.varint();
    if (header & 1) {
      const std::uint64_t groups = header >> 1;
      std::uint64_t n = groups * 8;
      const std::uint8_t* bits = in.bytes(static_cast<std::size_t>(groups * bit_width));
      for (std::uint64_t i = 0; i < n && out.size() < count; ++i) {
        std::uint32_t v = 0;
        const std::uint64_t bit0 = i * bit_width;
        for (std::uint32_t b = 0; b < bit_width; ++b) {
          const std::uint64_t bit = bit0 + b;
          v |= static_cast<std::uint32_t>((bits[bit >> 3] >> (bit & 7)) & 1u) << b;
        }
        out.push_back(v);
      }
    } else {
      const std::uint64_t run = header >> 1;
      std::uint32_t v = 0;
      const std::uint8_t* raw = in.bytes(value_bytes);
      for (std::size_t b = 0; b < value_bytes; ++b)
        v |= static_cast<std::uint32_t>(raw[b]) << (8 * b);
      for (std::uint64_t i = 0; i < run && out.size() < count; ++i) out.push_back(v);
    }
  }
}

inline double f32le(const std::uint8_t* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  float f;
  std::memcpy(&f, &bits, 4);
  return static_cast<double>(f);
}

inline double f64le(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

inline void decode_plain(ByteReader& in, Physical type, std::size_t count,
                         ColumnValues& out) {
  switch (type) {
    case Physical::Boolean: {
      const std::size_t nbytes = (count + 7) / 8;
      const std::uint8_t* bits = in.bytes(nbytes);
      for (std::size_t i = 0; i < count; ++i)
        out.ints.push_back((bits[i >> 3] >> (i & 7)) & 1);
      break;
    }
    case Physical::Int32:
      for (std::size_t i = 0; i < count; ++i)
        out.ints.push_back(static_cast<std::int32_t>(in.u32le()));
      break;
    case Physical::Int64:
      for (std::size_t i = 0; i < count; ++i)
        out.ints.push_back(static_cast<std::int64_t>(in.u64le()));
      break;
    case Physical::Float:
      for (std::size_t i = 0; i < count; ++i) out.reals.push_back(f32le(in.bytes(4)));
      break;
    case Physical::Double:
      for (std::size_t i = 0; i < count; ++i) out.reals.push_back(f64le(in.bytes(8)));
      break;
    case Physical::ByteArray:
      for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t len = in.u32le();
        const std::uint8_t* at = in.bytes(len);
        out.strings.emplace_back(reinterpret_cast<const char*>(at), len);
      }
      break;
    default:
      raise(Errc::Unsupported, "parquet physical type INT96/FIXED_LEN_BYTE_ARRAY is not supported");
  }
}

inline void append_by_index(const ColumnValues& dict, std::uint32_t idx,
                            const std::string& column, std::size_t row,
                            ColumnValues& out) {
  if (idx >= dict.size())
    raise(Errc::ParseError, "parquet column '" + column + "': dictionary index " +
                                std::to_string(idx) + " out of range at row " +
                                std::to_string(row + 1));
  if (!dict.ints.empty()) out.ints.push_back(dict.ints[idx]);
  else if (!dict.reals.empty()) out.reals.push_back(dict.reals[idx]);
  else out.strings.push_back(dict.strings[idx]);
}

/// Decodes one column chunk (all of its pages) into raw typed values.
/// Optional fields are accepted but nulls are rejected with the row named,
/// matching the CSV loader's blank-cell behaviour.
inline ColumnValues decode_chunk(const std::uint8_t* file, std::size_t file_size,
                                 const ColumnMeta& meta, bool optional,
                                 const std::string& path_label) {
  if (meta.codec != 0)
    raise(Errc::Unsupported, "parquet column '" + path_label +
                                 "' uses a compression codec; only uncompressed files are supported");

  std::int64_t start = meta.data_page_offset;
  if (meta.dictionary_page_offset && *meta.dictionary_page_offset > 0 &&
      *meta.dictionary_page_offset < start)
    start = *meta.dictionary_page_offset;
  if (start < 0 || static_cast<std::size_t>(start) >= file_size)
    raise(Errc::ParseError, "parquet column '" + path_label + "': page offset out of range");

  ColumnValues values;
  values.type = meta.type;
  ColumnValues dict;
  dict.type = meta.type;
  bool have_dict = false;

  ByteReader cursor(file + start, file_size - static_cast<std::size_t>(start));
  while (values.size() < static_cast<std::size_t>(meta.num_values)) {
    CompactReader tr(cursor);
    const PageHeader ph = read_page_header(tr);
    if (ph.compressed_size < 0)
      raise(Errc::ParseError, "parquet column '" + path_label + "': negative page size");
    ByteReader body(cursor.bytes(static_cast<std::size_t>(ph.compressed_size)),
                    static_cast<std::size_t>(ph.compressed_size));

    if (ph.type == 2) {  // dictionary page
      decode_plain(body, meta.type, static_cast<std::size_t>(ph.num_values), dict);
      have_dict = true;
      continue;
    }
    if (ph.type != 0 && ph.type != 3) continue;  // index pages etc.

    const auto n = static_cast<std::size_t>(ph.num_values);
    const std::size_t row_base = values.size();
    if (ph.type == 0) {  // data page v1: [def levels w/ length prefix][values]
      if (optional) {
        const std::uint32_t levels_len = body.u32le();
        ByteReader levels(body.bytes(levels_len), levels_len);
        std::vector<std::uint32_t> defs;
        decode_rle_hybrid(levels, 1, n, defs);
        for (std::size_t i = 0; i < n; ++i)
          if (defs[i] == 0)
            raise(Errc::TypeViolation, "parquet column '" + path_label + "': null at row " +
                                           std::to_string(row_base + i + 1));
      }
    } else {  // data page v2: rep/def level bytes sized by the header
      if (ph.num_nulls > 0) {
        ByteReader levels(body.bytes(static_cast<std::size_t>(ph.rep_levels_bytes +
                                                              ph.def_levels_bytes)),
                          static_cast<std::size_t>(ph.rep_levels_bytes + ph.def_levels_bytes));
        levels.bytes(static_cast<std::size_t>(ph.rep_levels_bytes));
        std::vector<std::uint32_t> defs;
        decode_rle_hybrid(levels, 1, n, defs);
        for (std::size_t i = 0; i < n; ++i)
          if (defs[i] == 0)
            raise(Errc::TypeViolation, "parquet column '" + path_label + "': null at row " +
                                           std::to_string(row_base + i + 1));
        raise(Errc::ParseError, "parquet column '" + path_label + "': null accounting mismatch");
      }
      body.bytes(static_cast<std::size_t>(ph.rep_levels_bytes + ph.def_levels_bytes));
    }

    if (ph.encoding == 0) {  // PLAIN
      decode_plain(body, meta.type, n, values);
    } else if (ph.encoding == 2 || ph.encoding == 8) {  // PLAIN_DICTIONARY / RLE_DICTIONARY
      if (!have_dict)
        raise(Errc::ParseError, "parquet column '" + path_label +
                                    "': dictionary-encoded page without a dictionary page");
      const std::uint8_t bit_width = body.u8();
      std::vector<std::uint32_t> indices;
      decode_rle_hybrid(body, bit_width, n, indices);
      for (std::size_t i = 0; i < n; ++i)
        append_by_index(dict, indices[i], path_label, row_base + i, values);
    } else {
      raise(Errc::Unsupported, "parquet column '" + path_label + "': encoding " +
                                   std::to_string(ph.encoding) + " is not supported");
    }
  }
  if (values.size() != static_cast<std::size_t>(meta.num_values))
    raise(Errc::ParseError, "parquet column '" + path_label + "': value count mismatch");
  return values;
}

}  // namespace parquet_detail

/// Loads a Parquet file under the same schema contract as load_csv. Physical
/// types must convert losslessly: integers and exact 0.0/1.0 floats satisfy a
/// label column, strings/integers/booleans satisfy categorical columns, and
/// any numeric physical type satisfies a numeric column.
inline Dataset load_parquet(const std::string& path, const std::vector<ColumnSpec>& schema) {
  using namespace parquet_detail;
  detail::validate_schema(schema);

  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string blob = buf.str();
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(blob.data());
  const std::size_t size = blob.size();

  if (size < 12 || blob.compare(0, 4, "PAR1") != 0 || blob.compare(size - 4, 4, "PAR1") != 0)
    raise(Errc::ParseError, path + ": not a parquet file (magic bytes missing)");
  std::uint32_t footer_len = 0;
  for (int i = 0; i < 4; ++i)
    footer_len |= static_cast<std::uint32_t>(bytes[size - 8 + i]) << (8 * i);
  if (footer_len + 8 > size)
    raise(Errc::ParseError, path + ": footer length exceeds file size");

  ByteReader footer(bytes + size - 8 - footer_len, footer_len);
  CompactReader tr(footer);
  const FileMeta fm = read_file_meta(tr);

  if (fm.schema.empty()) raise(Errc::ParseError, path + ": empty parquet schema");
  const std::int32_t n_leaves = fm.schema.front().num_children;
  if (static_cast<std::size_t>(n_leaves) + 1 != fm.schema.size())
    raise(Errc::Unsupported, path + ": nested parquet schemas are not supported (flat columns only)");
  std::map<std::string, std::size_t> leaf_index;
  for (std::size_t i = 1; i < fm.schema.size(); ++i) {
    const auto& node = fm.schema[i];
    if (node.num_children > 0)
      raise(Errc::Unsupported, path + ": nested parquet schemas are not supported (flat columns only)");
    if (node.repetition == 2)
      raise(Errc::Unsupported, path + ": repeated parquet fields are not supported");
    leaf_index[node.name] = i;
  }

  if (fm.num_rows == 0) raise(Errc::EmptyDataset, path + ": no data rows");

  std::vector<detail::ColumnAccumulator> acc;
  acc.reserve(schema.size());
  for (const auto& spec : schema) acc.emplace_back(spec, path);

  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& spec = schema[c];
    auto it = leaf_index.find(spec.name);
    if (it == leaf_index.end())
      raise(Errc::MissingColumn, path + ": parquet schema lacks column '" + spec.name + "'");
    const SchemaNode& leaf = fm.schema[it->second];
    if (!leaf.type)
      raise(Errc::ParseError, path + ": column '" + spec.name + "' lacks a physical type");

    std::size_t row = 0;
    for (const auto& rg : fm.row_groups) {
      const ColumnMeta* meta = nullptr;
      for (const auto& cm : rg.columns)
        if (cm.path.size() == 1 && cm.path[0] == spec.name) {
          meta = &cm;
          break;
        }
      if (!meta)
        raise(Errc::ParseError, path + ": row group lacks a chunk for column '" + spec.name + "'");
      const ColumnValues vals =
          decode_chunk(bytes, size, *meta, leaf.repetition == 1, spec.name);

      for (std::size_t i = 0; i < vals.size(); ++i, ++row) {
        switch (*leaf.type) {
          case Physical::Boolean:
            if (spec.kind == ColumnKind::Categorical || spec.kind == ColumnKind::SensitiveGroup)
              acc[c].add_text(row, vals.ints[i] ? "true" : "false");
            else
              acc[c].add_number(row, static_cast<double>(vals.ints[i]));
            break;
          case Physical::Int32:
          case Physical::Int64:
            if (spec.kind == ColumnKind::Categorical || spec.kind == ColumnKind::SensitiveGroup)
              acc[c].add_text(row, std::to_string(vals.ints[i]));
            else
              acc[c].add_number(row, static_cast<double>(vals.ints[i]));
            break;
          case Physical::Float:
          case Physical::Double:
            if (spec.kind == ColumnKind::Categorical || spec.kind == ColumnKind::SensitiveGroup)
              raise(Errc::TypeViolation,
                    path + ": row " + std::to_string(row + 1) + ", column '" + spec.name +
                        "': floating-point values cannot feed a categorical column");
            acc[c].add_number(row, vals.reals[i]);
            break;
          case Physical::ByteArray:
            acc[c].add_text(row, vals.strings[i]);
            break;
          default:
            raise(Errc::Unsupported, path + ": column '" + spec.name +
                                         "' has an unsupported physical type");
        }
      }
    }
    if (row != static_cast<std::size_t>(fm.num_rows))
      raise(Errc::ParseError, path + ": column '" + spec.name + "' has " + std::to_string(row) +
                                  " values for " + std::to_string(fm.num_rows) + " rows");
  }

  std::vector<ColumnData> cols;
  cols.reserve(acc.size());
  for (auto& a : acc) cols.push_back(a.take());
  return Dataset(schema, std::move(cols));
}

}  // namespace fairflow
