#include <sstream>

#include <gtest/gtest.h>

#include "dodbench/core_model.hpp"
#include "support/fixtures.hpp"

using namespace dodbench;

namespace {

CanonicalRecord article() {
  CanonicalRecord r;
  r.record_id = "journals/x/1";
  r.title = "A title";
  r.year = 2001;
  r.kind = RecordKind::JournalArticle;
  r.authors = {"A", "B"};
  return r;
}

}  // namespace

TEST(ScaleFactor, AcceptsOnlyTheFourValues) {
  for (double v : {0.125, 0.25, 0.5, 1.0}) EXPECT_NO_THROW(ScaleFactor{v});
  for (double v : {0.0, 0.3, 2.0, -1.0}) EXPECT_THROW(ScaleFactor{v}, InvalidScaleFactor);
  EXPECT_THROW(ScaleFactor::parse("0.3"), InvalidScaleFactor);
  EXPECT_EQ(ScaleFactor::parse("1.0"), ScaleFactor(1.0));
  EXPECT_EQ(ScaleFactor::parse("1").label(), "1");
}

TEST(ScaleFactor, PositionsAreOneToFour) {
  EXPECT_EQ(ScaleFactor(0.125).position(), 1);
  EXPECT_EQ(ScaleFactor(0.25).position(), 2);
  EXPECT_EQ(ScaleFactor(0.5).position(), 3);
  EXPECT_EQ(ScaleFactor(1.0).position(), 4);
}

TEST(TermParam, DefaultTermsAreDatabaseTextMining) {
  auto t = default_terms();
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[0].term, "database");
  EXPECT_EQ(t[1].term, "text");
  EXPECT_EQ(t[2].term, "mining");
  EXPECT_THROW(TermParam(4, "x"), InvalidQuery);
  EXPECT_THROW(TermParam(1, ""), InvalidQuery);
}

TEST(Validate, ValidArticleHasNoViolations) { EXPECT_TRUE(validate_record(article()).empty()); }

TEST(Validate, ReportsEachViolation) {
  auto r = article();
  r.record_id.clear();
  r.title.clear();
  r.isbn = "1";
  r.editors = {"E"};
  r.authors.push_back("");
  auto v = validate_record(r);
  auto has = [&](const std::string& s) { return std::find(v.begin(), v.end(), s) != v.end(); };
  EXPECT_TRUE(has("empty record_id"));
  EXPECT_TRUE(has("empty title"));
  EXPECT_TRUE(has("article carries isbn"));
  EXPECT_TRUE(has("article carries editors"));
  EXPECT_TRUE(has("empty author name"));
}

TEST(Validate, BookMayNotCarryVenue) {
  auto r = article();
  r.kind = RecordKind::Book;
  r.venue = VenueRef{std::nullopt, "V", VenueType::Journal, std::nullopt, std::nullopt};
  auto v = validate_record(r);
  EXPECT_NE(std::find(v.begin(), v.end(), "book carries venue"), v.end());
}

TEST(Validate, EmptyAuthorListIsValid) {
  auto r = article();
  r.authors.clear();
  EXPECT_TRUE(validate_record(r).empty());
}

TEST(CanonicalJson, OmitsAbsentOptionals) {
  auto j = to_canonical_json(article());
  EXPECT_FALSE(j.contains("url"));
  EXPECT_FALSE(j.contains("isbn"));
  EXPECT_FALSE(j.contains("editors"));
  EXPECT_FALSE(j.contains("venue"));
  EXPECT_EQ(j.at("kind"), "JournalArticle");
}

TEST(CanonicalJson, RoundTripsRandomRecords) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (const auto& r : testkit::random_dataset(seed, {.max_records = 50})) {
      ASSERT_TRUE(validate_record(r).empty()) << r.record_id;
      EXPECT_EQ(from_canonical_json(nlohmann::json::parse(to_canonical_line(r))), r);
    }
  }
}

TEST(CanonicalJson, RejectsBadKind) {
  auto j = to_canonical_json(article());
  j["kind"] = "Thesis";
  EXPECT_THROW(from_canonical_json(j), std::invalid_argument);
}

TEST(ReadCanonical, ReportsLineOfCorruptRecord) {
  std::stringstream ss;
  ss << to_canonical_line(article()) << "\n\n{not json}\n";
  std::vector<CanonicalRecord> got;
  try {
    read_canonical(ss, [&](CanonicalRecord&& r) { got.push_back(std::move(r)); });
    FAIL() << "expected CorruptRecord";
  } catch (const CorruptRecord& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_EQ(got.size(), 1u);
}

TEST(ReadCanonical, RejectsInvalidRecord) {
  auto r = article();
  r.isbn = "x";
  std::stringstream ss;
  ss << to_canonical_line(r) << "\n";
  EXPECT_THROW(read_canonical(ss, [](CanonicalRecord&&) {}), CorruptRecord);
}
