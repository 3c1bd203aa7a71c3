#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "dodbench/report.hpp"
#include "dodbench/translate.hpp"
#include "support/golden.hpp"

using namespace dodbench;
namespace fs = std::filesystem;

namespace {

QuerySpec q(const std::string& text, const std::vector<TermParam>& terms = default_terms()) {
  return parse_query(text, terms);
}

}  // namespace

class Golden : public ::testing::TestWithParam<Dialect> {};

// Set UPDATE_GOLDEN=1 to rewrite the files after reviewing a change.
TEST_P(Golden, StandardWorkloadMatchesFiles) {
  const Dialect d = GetParam();
  const bool update = std::getenv("UPDATE_GOLDEN") != nullptr;
  for (const auto& spec : standard_workload()) {
    fs::path p = testkit::golden_path(DODBENCH_GOLDEN_DIR, spec, d);
    std::string got = testkit::render_golden(translate(spec, d));
    if (update) {
      fs::create_directories(p.parent_path());
      std::ofstream(p, std::ios::binary) << got;
      continue;
    }
    ASSERT_TRUE(fs::exists(p)) << p;
    EXPECT_EQ(got, testkit::read_file(p)) << to_text(spec) << " in " << to_string(d);
  }
}

INSTANTIATE_TEST_SUITE_P(AllDialects, Golden, ::testing::ValuesIn(kAllDialects),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Translate, DialectAliases) {
  EXPECT_EQ(parse_dialect("xquery31"), Dialect::XQuery31);
  EXPECT_EQ(parse_dialect("mongo"), Dialect::MongoPipeline);
  EXPECT_EQ(parse_dialect("couch"), Dialect::CouchMangoView);
  EXPECT_EQ(parse_dialect("couchbase"), Dialect::N1QL);
  EXPECT_THROW(parse_dialect("sql"), ConfigError);
}

TEST(Translate, Extensions) {
  EXPECT_EQ(file_extension(Dialect::XQuery10), "xq");
  EXPECT_EQ(file_extension(Dialect::MongoPipeline), "js");
  EXPECT_EQ(file_extension(Dialect::CouchMangoView), "http");
  EXPECT_EQ(file_extension(Dialect::N1QL), "n1ql");
}

TEST(Translate, EscapesTermsPerDialect) {
  std::vector<TermParam> terms = {TermParam(1, "a\"b&c"), TermParam(2, "x.y(z)"), TermParam(3, "it`s")};
  auto q1 = q("Q1(i=1)", terms);
  EXPECT_NE(translate(q1, Dialect::XQuery31).main_text.find("\"a\"\"b&amp;c\""), std::string::npos);
  EXPECT_NE(translate(q1, Dialect::N1QL).main_text.find("\"a\\\"b&c\""), std::string::npos);
  auto q2 = q("Q1(i=2)", terms);
  EXPECT_NE(translate(q2, Dialect::MongoPipeline).main_text.find("x\\\\.y\\\\(z\\\\)"), std::string::npos);
  EXPECT_NE(translate(q2, Dialect::CouchMangoView).main_text.find("(?i)x\\\\.y\\\\(z\\\\)"), std::string::npos);
  TranslateOptions o;
  o.collection = "my`coll";
  EXPECT_NE(translate(q1, Dialect::N1QL, o).main_text.find("`my``coll`"), std::string::npos);
}

TEST(Translate, CaseSensitiveModeKeepsTermCase) {
  std::vector<TermParam> terms = {TermParam(1, "DataBase"), TermParam(2, "t"), TermParam(3, "m")};
  TranslateOptions o;
  o.match.case_sensitive = true;
  auto s = translate(q("Q1(i=1)", terms), Dialect::N1QL, o).main_text;
  EXPECT_NE(s.find("CONTAINS(d.title, \"DataBase\")"), std::string::npos);
  auto m = translate(q("Q1(i=1)", terms), Dialect::MongoPipeline, o).main_text;
  EXPECT_EQ(m.find("$options"), std::string::npos);
  auto x = translate(q("Q1(i=1)", terms), Dialect::XQuery31).main_text;
  EXPECT_NE(x.find("\"database\""), std::string::npos);
}

TEST(Translate, CouchAggregationInstallsViewFirst) {
  auto tq = translate(q("Q7"), Dialect::CouchMangoView);
  ASSERT_EQ(tq.setup_texts.size(), 1u);
  EXPECT_EQ(tq.setup_texts[0].rfind("PUT /dblp/_design/dodbench_", 0), 0u);
  EXPECT_NE(tq.main_text.find("_view/q?group=true"), std::string::npos);
  // The design name is a function of the query only.
  EXPECT_EQ(translate(q("Q7"), Dialect::CouchMangoView).setup_texts, tq.setup_texts);
  EXPECT_NE(translate(q("Q6"), Dialect::CouchMangoView).setup_texts, tq.setup_texts);
}

TEST(Translate, NoSetupOutsideCouchViews) {
  for (auto d : kAllDialects)
    for (const auto& spec : standard_workload())
      if (!(d == Dialect::CouchMangoView && !spec.is_selection()))
        EXPECT_TRUE(translate(spec, d).setup_texts.empty()) << to_text(spec);
}

TEST(Translate, SelectionWithoutFilterIsUnsupported) {
  QuerySpec bad;
  bad.id = QueryId::Q1;
  EXPECT_THROW(translate(bad, Dialect::N1QL), UnsupportedCombination);
}

TEST(Explain, MentionsStrategy) {
  EXPECT_NE(explain(q("Q2(i=1,j=2)"), Dialect::N1QL).find("no grouping needed"), std::string::npos);
  EXPECT_NE(explain(q("Q2(i=1,j=2)"), Dialect::N1QL).find("constraint folding"), std::string::npos);
  EXPECT_NE(explain(q("Q8(i=1,j=2,k=3)"), Dialect::CouchMangoView).find("reduce-side count"), std::string::npos);
  EXPECT_NE(explain(q("Q7"), Dialect::MongoPipeline).find("$unwind"), std::string::npos);
}
