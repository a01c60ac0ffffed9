#include "fairflow/yaml.hpp"

#include <gtest/gtest.h>

#include <cstdint>
#include <string>

#include <json.hpp>

#include "fairflow/errors.hpp"

namespace fairflow {
namespace {

using nlohmann::json;

TEST(YamlParse, Scalars) {
  const json doc = yaml::parse(
      "a: 1\n"
      "b: -17\n"
      "c: 2.5\n"
      "d: hello\n"
      "e: true\n"
      "f: false\n"
      "g: null\n"
      "h: ~\n"
      "i: 1.0e-5\n");
  EXPECT_EQ(doc["a"], 1);
  EXPECT_EQ(doc["b"], -17);
  EXPECT_DOUBLE_EQ(doc["c"].get<double>(), 2.5);
  EXPECT_EQ(doc["d"], "hello");
  EXPECT_EQ(doc["e"], true);
  EXPECT_EQ(doc["f"], false);
  EXPECT_TRUE(doc["g"].is_null());
  EXPECT_TRUE(doc["h"].is_null());
  EXPECT_DOUBLE_EQ(doc["i"].get<double>(), 1.0e-5);
}

TEST(YamlParse, FullUnsignedRange) {
  // seeds occupy the whole uint64 range; values past int64 max must survive
  const json doc = yaml::parse("seed: 11356774285442036148\n");
  EXPECT_EQ(doc["seed"].get<std::uint64_t>(), 11356774285442036148ULL);
}

TEST(YamlParse, NestedMappingsAndSequences) {
  const json doc = yaml::parse(
      "outer:\n"
      "  inner:\n"
      "    k: v\n"
      "  items:\n"
      "    - 1\n"
      "    - 2\n"
      "list:\n"
      "- name: first\n"
      "  value: 1\n"
      "- name: second\n"
      "  value: 2\n");
  EXPECT_EQ(doc["outer"]["inner"]["k"], "v");
  EXPECT_EQ(doc["outer"]["items"], json({1, 2}));
  ASSERT_EQ(doc["list"].size(), 2u);
  EXPECT_EQ(doc["list"][1]["name"], "second");
  EXPECT_EQ(doc["list"][1]["value"], 2);
}

TEST(YamlParse, FlowSequences) {
  const json doc = yaml::parse("xs: [1, 2.5, hello, 'q u']\nempty: []\n");
  EXPECT_EQ(doc["xs"], json({1, 2.5, "hello", "q u"}));
  EXPECT_EQ(doc["empty"], json::array());
}

TEST(YamlParse, QuotedStrings) {
  const json doc = yaml::parse(
      "a: \"x\\ny\"\n"
      "b: 'it''s'\n"
      "c: \"123\"\n");
  EXPECT_EQ(doc["a"], "x\ny");
  EXPECT_EQ(doc["b"], "it's");
  EXPECT_EQ(doc["c"], "123");  // quoting suppresses numeric interpretation
}

TEST(YamlParse, CommentsAndBlankLines) {
  const json doc = yaml::parse(
      "# leading comment\n"
      "\n"
      "a: 1  # trailing comment\n"
      "\n"
      "b: 2\n");
  EXPECT_EQ(doc, json({{"a", 1}, {"b", 2}}));
}

TEST(YamlParse, EmptyValueIsNull) {
  const json doc = yaml::parse("a:\nb: 1\n");
  EXPECT_TRUE(doc["a"].is_null());
}

TEST(YamlParse, TopLevelSequence) {
  EXPECT_EQ(yaml::parse("- 1\n- 2\n"), json({1, 2}));
}

TEST(YamlParse, EmptyDocumentIsEmptyMapping) {
  EXPECT_EQ(yaml::parse(""), json::object());
}

TEST(YamlParse, DuplicateKeyRejected) {
  try {
    yaml::parse("a: 1\na: 2\n");
    FAIL() << "expected ParseError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ParseError);
    EXPECT_NE(std::string(e.what()).find("duplicate key 'a'"), std::string::npos);
  }
}

TEST(YamlParse, TabsRejectedWithLineNumber) {
  try {
    yaml::parse("a:\n\tb: 1\n");
    FAIL() << "expected ParseError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(YamlParse, BareScalarDocumentRejected) {
  EXPECT_THROW(yaml::parse("42\n"), Error);
}

TEST(YamlParse, UnterminatedQuoteRejected) {
  EXPECT_THROW(yaml::parse("a: 'oops\n"), Error);
}

TEST(YamlEmit, RoundTripsStructuredDocuments) {
  const json doc = {
      {"version", "fairflow-config/1"},
      {"seed", 11356774285442036148ULL},
      {"alpha", 0.5},
      {"flag", true},
      {"name", "x-1_b"},
      {"sizes", {0.7, 0.15, 0.15}},
      {"nested", {{"list", {json({{"k", 1}}), json({{"k", 2}})}}, {"s", "two words"}}},
  };
  EXPECT_EQ(yaml::parse(yaml::emit(doc)), doc);
}

TEST(YamlEmit, EmitParseEmitIsStable) {
  const json doc = {
      {"a", {{"b", {1, 2, 3}}, {"c", "v"}}},
      {"d", 1.25},
  };
  const std::string once = yaml::emit(doc);
  EXPECT_EQ(yaml::emit(yaml::parse(once)), once);
}

}  // namespace
}  // namespace fairflow
