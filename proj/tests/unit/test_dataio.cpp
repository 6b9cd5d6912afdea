#include <gtest/gtest.h>

#include "crossrec/dataio/dataset.hpp"
#include "fixtures.hpp"

using namespace crossrec;
using namespace crossrec::dataio;

namespace {

const std::string kCatalog = "item_id,base_item_id\nA,\nB,\nC,A\n";
const std::string kProfiles =
    "user_id,age,employment,income,residence,marital,children,education,portfolio_A,portfolio_B,portfolio_C\n"
    "u1,30,1,5,0,1,0,2,1,0,0\n";
const std::string kEvents =
    "user_id,session_id,timestamp,section,object,type\n"
    "u1,s1,2021-01-01T10:00:00Z,shop,item:A,start\n"
    "u1,s1,2021-01-01T10:01:00Z,shop,item:B,act\n"
    "u1,s2,2021-01-05T10:00:00Z,claims,,complete\n"
    "u2,s3,2021-02-01T10:00:00Z,shop,item:Z,start\n"
    "u2,s3,2021-02-01T10:00:05Z,help,service:S1,start\n";
const std::string kPurchases =
    "user_id,timestamp,item_id\n"
    "u1,2021-01-06T00:00:00Z,B\n"
    "u1,2021-01-06T00:00:00Z,C\n"
    "u1,2021-02-01T00:00:00Z,Q\n";

Dataset sample() { return fixtures::ingest_strings(kEvents, kPurchases, kProfiles, kCatalog); }

}  // namespace

TEST(Timestamp, ParsesOffsetsAndFormats) {
  const auto t = parse_timestamp("2021-03-04T05:06:07Z");
  EXPECT_EQ(format_timestamp(t), "2021-03-04T05:06:07Z");
  EXPECT_EQ(parse_timestamp("2021-03-04 07:06:07+02:00"), t);
  EXPECT_EQ(parse_timestamp("2021-03-04T00:06:07-05:00"), t);
  EXPECT_EQ(parse_timestamp("2021-03-04T05:06:07"), t);
  EXPECT_THROW(parse_timestamp("2021-13-04T05:06:07"), DataError);
  EXPECT_THROW(parse_timestamp("yesterday"), DataError);
}

TEST(Timestamp, WholeDaysFloors) {
  const auto a = parse_timestamp("2021-01-01T12:00:00Z");
  EXPECT_EQ(whole_days(a, parse_timestamp("2021-01-02T11:59:59Z")), 0);
  EXPECT_EQ(whole_days(a, parse_timestamp("2021-01-03T12:00:00Z")), 2);
  EXPECT_EQ(whole_days(a, parse_timestamp("2021-01-01T11:00:00Z")), -1);
}

TEST(Ingest, BuildsUsersSessionsAndPurchases) {
  const auto d = sample();
  ASSERT_EQ(d.users.size(), 2u);
  const auto& u1 = d.users[0];
  EXPECT_EQ(u1.id, "u1");
  ASSERT_EQ(u1.sessions.size(), 2u);
  EXPECT_EQ(u1.sessions[0].actions.size(), 2u);
  ASSERT_EQ(u1.purchases.size(), 1u);
  EXPECT_EQ(u1.purchases[0].items, (std::vector<std::uint32_t>{1, 2}));
  EXPECT_TRUE(u1.has_profile);
  EXPECT_FALSE(d.users[1].has_profile);
  EXPECT_EQ(d.users[1].sessions[0].actions.size(), 1u);
  EXPECT_EQ(d.vocab.objects()[u1.sessions[1].actions[0].object], "none");
}

TEST(Ingest, CountsRejects) {
  const auto d = sample();
  EXPECT_EQ(d.report.event_rows, 5u);
  EXPECT_EQ(d.report.rejected_events, 1u);
  EXPECT_EQ(d.report.rejected_purchases, 1u);
  EXPECT_EQ(d.report.rejected_profiles, 0u);
  EXPECT_FALSE(d.report.messages.empty());
}

TEST(Ingest, FatalErrors) {
  EXPECT_THROW(fixtures::ingest_strings("user_id,session_id,timestamp,section,object,type\n", kPurchases, kProfiles,
                                       kCatalog),
               DataError);
  EXPECT_THROW(fixtures::ingest_strings("user_id,timestamp\n", kPurchases, kProfiles, kCatalog), DataError);
  EXPECT_THROW(fixtures::ingest_strings(kEvents, kPurchases, kProfiles, "item_id,base_item_id\nA,B\nB,A\n"), DataError);
}

TEST(Vocabulary, FrequencyThenIdOrder) {
  const auto v = ActionVocabulary::from_counts({{"b", 2}, {"a", 2}, {"c", 5}}, {{"none", 1}}, {{"start", 1}}, {});
  EXPECT_EQ(v.sections(), (std::vector<std::string>{"c", "a", "b"}));
  EXPECT_THROW(v.encode("zzz", "none", "start"), DataError);
}

TEST(Vocabulary, BinarizeHasThreeOnes) {
  const auto d = sample();
  for (const auto& s : d.users[0].sessions)
    for (const auto& a : s.actions) {
      const auto b = binarize_action(a, d.vocab);
      EXPECT_EQ(b.size(), d.vocab.width());
      EXPECT_EQ(std::count(b.begin(), b.end(), 1.0), 3);
    }
}

TEST(Vocabulary, ItemObjectLinks) {
  const auto d = sample();
  const auto a = d.vocab.object_index("item:A");
  ASSERT_TRUE(a);
  EXPECT_EQ(d.vocab.object_item(*a), std::optional<std::uint32_t>(0));
  EXPECT_EQ(d.vocab.item_object(0), a);
  EXPECT_FALSE(d.vocab.item_object(2).has_value());
}

TEST(Portfolio, CountsPurchasesStrictlyBefore) {
  const auto d = sample();
  const auto& u = d.users[0];
  EXPECT_EQ(portfolio_at(u, u.purchases[0].time, 3), (std::vector<int>{1, 0, 0}));
  EXPECT_EQ(portfolio_at(u, u.purchases[0].time + Seconds(1), 3), (std::vector<int>{1, 1, 1}));
}

TEST(Portfolio, EligibilityNeedsBaseProduct) {
  const auto d = sample();
  EXPECT_EQ(eligibility_mask({0, 1, 0}, d.catalog), (std::vector<bool>{true, true, false}));
  EXPECT_EQ(eligibility_mask({2, 0, 0}, d.catalog), (std::vector<bool>{true, true, true}));
}

TEST(Portfolio, DemographicFeaturesNeedProfile) {
  const auto d = sample();
  const auto f = demographic_features(d.users[0], d.users[0].purchases[0].time, 3);
  EXPECT_EQ(f.size(), 10u);
  EXPECT_EQ(f[0], 30.0);
  EXPECT_THROW(demographic_features(d.users[1], {}, 3), DataError);
}

TEST(CensoredLabels, ObservedAndCensored) {
  const auto t0 = parse_timestamp("2021-01-01T00:00:00Z");
  std::vector<PurchaseEvent> purchases{{t0 + Seconds(3 * 86400 + 5), {1}}, {t0 + Seconds(40 * 86400), {0}}};
  const auto end = t0 + Seconds(10 * 86400);
  const auto l = build_censored_labels({t0, t0 + Seconds(86400)}, purchases, end, 3);
  EXPECT_EQ(l.u[0], (std::vector<double>{0, 1, 0}));
  EXPECT_EQ(l.y[0], (std::vector<double>{10, 3, 10}));
  EXPECT_EQ(l.y[1], (std::vector<double>{9, 2, 9}));
  EXPECT_THROW(build_censored_labels({end + Seconds(1)}, purchases, end, 3), DataError);
}
