#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "dodbench/dblp_ingest.hpp"
#include "dodbench/oracle.hpp"
#include "support/brute_force.hpp"
#include "support/fixtures.hpp"

using namespace dodbench;

namespace {

Dataset ten_entries() {
  std::ifstream in(DODBENCH_TEST_DATA_DIR "/ten_entries.xml", std::ios::binary);
  std::vector<CanonicalRecord> recs;
  ingest_stream(in, [&](CanonicalRecord&& r) { recs.push_back(std::move(r)); });
  return Dataset(std::move(recs));
}

std::size_t count(const Dataset& ds, const std::string& q) {
  return evaluate(ds, parse_query(q, default_terms())).row_count();
}

}  // namespace

// Titles (lowercased) of the six accepted fixture records:
//   a database for text mining. | text retrieval systems. | mining the web
//   database mining techniques. | café databases & text.   | frequent pattern mining in text streams.
TEST(Oracle, TenEntryHandCounts) {
  auto ds = ten_entries();
  EXPECT_EQ(ds.size(), 6u);
  EXPECT_EQ(ds.pair_count(), 8u);
  EXPECT_EQ(count(ds, "Q1(i=1)"), 3u);
  EXPECT_EQ(count(ds, "Q1(i=2)"), 4u);
  EXPECT_EQ(count(ds, "Q1(i=3)"), 4u);
  EXPECT_EQ(count(ds, "Q2(i=1,j=2)"), 2u);
  EXPECT_EQ(count(ds, "Q2(i=1,j=3)"), 2u);
  EXPECT_EQ(count(ds, "Q2(i=2,j=3)"), 2u);
  EXPECT_EQ(count(ds, "Q3(i=1,j=2)"), 5u);
  EXPECT_EQ(count(ds, "Q3(i=1,j=3)"), 5u);
  EXPECT_EQ(count(ds, "Q3(i=2,j=3)"), 6u);
  EXPECT_EQ(count(ds, "Q4(i=1,j=2,k=3)"), 1u);
  EXPECT_EQ(count(ds, "Q5(i=1,j=2,k=3)"), 6u);
  EXPECT_EQ(count(ds, "Q6"), 5u);
  EXPECT_EQ(count(ds, "Q7"), 8u);
  EXPECT_EQ(count(ds, "Q8(i=1,j=2,k=3)"), 2u);
  EXPECT_EQ(count(ds, "Q9(i=1,j=2,k=3)"), 8u);
}

TEST(Oracle, Q6GroupsCountDuplicatePairs) {
  auto ds = ten_entries();
  auto rs = evaluate(ds, parse_query("Q6", default_terms()));
  ASSERT_EQ(rs.groups.size(), 5u);
  EXPECT_EQ(rs.groups[0], (GroupRow{"Alice Smith", std::nullopt, 3}));
  EXPECT_EQ(rs.groups[1], (GroupRow{"Bob Jones", std::nullopt, 2}));
  EXPECT_EQ(rs.groups[4].author, "José Pérez");
}

TEST(Oracle, Q8GroupsByAuthorAndYear) {
  auto ds = ten_entries();
  auto rs = evaluate(ds, parse_query("Q8(i=1,j=2,k=3)", default_terms()));
  ASSERT_EQ(rs.groups.size(), 2u);
  EXPECT_EQ(rs.groups[0], (GroupRow{"Alice Smith", 2001, 1}));
  EXPECT_EQ(rs.groups[1], (GroupRow{"Bob Jones", 2001, 1}));
}

TEST(Oracle, SelectionKeepsRecordOrder) {
  auto ds = ten_entries();
  auto rs = evaluate(ds, parse_query("Q1(i=2)", default_terms()));
  std::vector<std::size_t> idx;
  for (const auto& r : rs.rows) idx.push_back(r.record_index);
  EXPECT_EQ(idx, (std::vector<std::size_t>{0, 1, 4, 5}));
}

TEST(Oracle, SelectivityValues) {
  auto ds = ten_entries();
  auto sel = [&](const std::string& t) {
    auto q = parse_query(t, default_terms());
    return selectivity(ds, q, evaluate(ds, q));
  };
  EXPECT_EQ(sel("Q1(i=1)").s, 1.0 - 3.0 / 6.0);
  EXPECT_EQ(sel("Q1(i=1)").N, 6u);
  EXPECT_EQ(sel("Q6").N, 8u);
  EXPECT_EQ(sel("Q6").s, 1.0 - 5.0 / 8.0);
  EXPECT_EQ(sel("Q8(i=1,j=2,k=3)").s, 0.75);
  EXPECT_EQ(sel("Q9(i=1,j=2,k=3)").s, 0.0);
}

TEST(Oracle, EmptyPopulationThrows) {
  Dataset empty;
  auto q = parse_query("Q1(i=1)", default_terms());
  EXPECT_THROW(selectivity(empty, q, evaluate(empty, q)), EmptyPopulation);
  CanonicalRecord r;
  r.record_id = "x";
  r.title = "database";
  r.year = 1;
  Dataset no_authors({r});
  auto q6 = parse_query("Q6", default_terms());
  EXPECT_THROW(selectivity(no_authors, q6, evaluate(no_authors, q6)), EmptyPopulation);
}

TEST(Oracle, DuplicateIdRejectedWithLine) {
  CanonicalRecord r;
  r.record_id = "x";
  r.title = "t";
  r.year = 1;
  std::stringstream ss;
  ss << to_canonical_line(r) << "\n" << to_canonical_line(r) << "\n";
  try {
    load_dataset(ss);
    FAIL();
  } catch (const CorruptRecord& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Oracle, IndexAndScanAgree) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Dataset with(testkit::random_dataset(seed), {.build_text_index = true});
    for (const auto& q : standard_workload()) {
      for (bool cs : {false, true}) {
        EvalOptions a{{cs}, true}, b{{cs}, false};
        EXPECT_EQ(evaluate(with, q, a), evaluate(with, q, b)) << to_text(q);
      }
    }
  }
}

TEST(Oracle, ShortTermsFallBackToScan) {
  std::vector<TermParam> table = {TermParam(1, "db"), TermParam(2, "x"), TermParam(3, "mining")};
  Dataset ds(testkit::hand_built_fixture());
  for (const auto& q : standard_workload(table))
    EXPECT_EQ(evaluate(ds, q), testkit::brute_force(ds.records(), q)) << to_text(q);
}

TEST(Oracle, MatchesBruteForceCaseSensitive) {
  Dataset ds(testkit::hand_built_fixture());
  for (const auto& q : standard_workload())
    EXPECT_EQ(evaluate(ds, q, {{true}, true}), testkit::brute_force(ds.records(), q, true)) << to_text(q);
}

TEST(Oracle, VocabularyCollectsTokens) {
  auto ds = ten_entries();
  EXPECT_TRUE(ds.vocabulary().count("database"));
  EXPECT_TRUE(ds.vocabulary().count("databases"));
  EXPECT_FALSE(ds.vocabulary().count("Database"));
}
