#include <gtest/gtest.h>

#include "dodbench/query_model.hpp"

using namespace dodbench;

TEST(Tokenize, SplitsOnNonWordBytesAndLowercases) {
  EXPECT_EQ(tokenize("Text-Mining: A DB's view."), (std::vector<std::string>{"text", "mining", "a", "db", "s", "view"}));
  EXPECT_EQ(tokenize("Über naïve"), (std::vector<std::string>{"Über", "naïve"}));
  EXPECT_TRUE(tokenize("  ...  ").empty());
}

TEST(Contains, CaseInsensitiveByDefault) {
  EXPECT_TRUE(contains("Relational DATABASES", "database"));
  EXPECT_TRUE(contains("datamining", "mining"));
  EXPECT_FALSE(contains("data base", "database"));
  EXPECT_FALSE(contains("Relational DATABASES", "database", {.case_sensitive = true}));
  EXPECT_TRUE(contains("x", ""));
}

TEST(Contains, NonAsciiIsComparedExactly) {
  EXPECT_TRUE(contains("Überblick", "Über"));
  EXPECT_FALSE(contains("überblick", "Über"));
}

TEST(BuildQuery, EnforcesArity) {
  auto t = default_terms();
  EXPECT_THROW(build_query(QueryId::Q1, {}), ArityMismatch);
  EXPECT_THROW(build_query(QueryId::Q2, {t[0]}), ArityMismatch);
  EXPECT_THROW(build_query(QueryId::Q4, {t[0], t[1]}), ArityMismatch);
  EXPECT_THROW(build_query(QueryId::Q6, {t[0]}), ArityMismatch);
  EXPECT_NO_THROW(build_query(QueryId::Q7, {}));
  EXPECT_NO_THROW(build_query(QueryId::Q9, t));
}

TEST(BuildQuery, RepeatedTermsRejectedUnlessAllowed) {
  auto t = default_terms();
  EXPECT_THROW(build_query(QueryId::Q2, {t[0], t[0]}), InvalidQuery);
  EXPECT_NO_THROW(build_query(QueryId::Q2, {t[0], t[0]}, {.allow_repeated_terms = true}));
}

TEST(BuildQuery, OperatorsAndGrouping) {
  auto t = default_terms();
  EXPECT_TRUE(build_query(QueryId::Q1, {t[0]}).filter->is_leaf());
  EXPECT_EQ(build_query(QueryId::Q2, {t[0], t[1]}).filter->op(), BoolOp::And);
  EXPECT_EQ(build_query(QueryId::Q3, {t[0], t[1]}).filter->op(), BoolOp::Or);
  EXPECT_EQ(build_query(QueryId::Q4, t).filter->op(), BoolOp::And);
  EXPECT_EQ(build_query(QueryId::Q5, t).filter->op(), BoolOp::Or);
  auto q6 = build_query(QueryId::Q6, {});
  EXPECT_FALSE(q6.filter);
  EXPECT_EQ(q6.aggregation->group_by, GroupBy::Author);
  EXPECT_EQ(build_query(QueryId::Q7, {}).aggregation->group_by, GroupBy::AuthorYear);
  EXPECT_EQ(build_query(QueryId::Q8, t).filter->op(), BoolOp::And);
  EXPECT_EQ(build_query(QueryId::Q9, t).filter->op(), BoolOp::Or);
  EXPECT_EQ(build_query(QueryId::Q9, t).aggregation->group_by, GroupBy::AuthorYear);
}

TEST(BuildQuery, LeavesSortedByIndex) {
  auto t = default_terms();
  auto q = build_query(QueryId::Q2, {t[2], t[0]});
  EXPECT_EQ(to_text(q), "Q2(i=1,j=3)");
}

TEST(ConstraintExpr, EvaluatesAndOr) {
  auto t = default_terms();
  auto q2 = build_query(QueryId::Q2, {t[0], t[1]});
  auto q3 = build_query(QueryId::Q3, {t[0], t[1]});
  EXPECT_TRUE(q2.filter->matches("database text", {}));
  EXPECT_FALSE(q2.filter->matches("database", {}));
  EXPECT_TRUE(q3.filter->matches("database", {}));
  EXPECT_FALSE(q3.filter->matches("mining", {}));
}

TEST(QueryText, RoundTripsStandardWorkload) {
  auto w = standard_workload();
  ASSERT_EQ(w.size(), 15u);
  for (const auto& q : w) EXPECT_EQ(parse_query(to_text(q), default_terms()), q) << to_text(q);
  EXPECT_EQ(to_text(w.front()), "Q1(i=1)");
  EXPECT_EQ(to_text(w[11]), "Q6");
}

TEST(QueryText, RejectsMalformedText) {
  EXPECT_THROW(parse_query_text("Q0"), InvalidQuery);
  EXPECT_THROW(parse_query_text("Q2(i=1)"), ArityMismatch);
  EXPECT_THROW(parse_query_text("Q2(j=1,i=2)"), InvalidQuery);
  EXPECT_THROW(parse_query_text("Q1(i=4)"), InvalidQuery);
  EXPECT_THROW(parse_query_text("Q1"), InvalidQuery);
  EXPECT_THROW(parse_query_text("X1(i=1)"), InvalidQuery);
}

TEST(QueryText, ResolvesAgainstCustomTerms) {
  std::vector<TermParam> table = {TermParam(1, "graph"), TermParam(2, "query")};
  auto q = parse_query("Q2(i=1,j=2)", table);
  EXPECT_EQ(q.terms()[0].term, "graph");
  EXPECT_THROW(parse_query("Q1(i=3)", table), InvalidQuery);
}

TEST(Selector, ExpandsRangesListsAndForms) {
  EXPECT_EQ(expand_query_selector("Q1..Q9").size(), 15u);
  EXPECT_EQ(expand_query_selector("Q2..Q3").size(), 6u);
  EXPECT_EQ(expand_query_selector("Q1,Q6").size(), 4u);
  auto one = expand_query_selector("Q2(i=1,j=3), Q7");
  ASSERT_EQ(one.size(), 2u);
  EXPECT_EQ(to_text(one[0]), "Q2(i=1,j=3)");
  EXPECT_THROW(expand_query_selector("Q5..Q2"), InvalidQuery);
}
