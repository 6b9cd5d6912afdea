#include <gtest/gtest.h>

#include <set>

#include "crossrec/prep/prep.hpp"
#include "fixtures.hpp"

using namespace crossrec;
using namespace crossrec::prep;

namespace {

const std::string kCatalog = "item_id,base_item_id\nA,\nB,\n";
const std::string kProfiles = "user_id,age,employment,income,residence,marital,children,education\n";

struct EventLog {
  std::string text = "user_id,session_id,timestamp,section,object,type\n";
  int second = 0;
  void add(const std::string& user, const std::string& session, const std::string& section,
           const std::string& object = "none", const std::string& type = "act") {
    text += user + "," + session + "," + dataio::format_timestamp(dataio::TimePoint{} + dataio::Seconds(second++)) +
            "," + section + "," + object + "," + type + "\n";
  }
};

dataio::Dataset with_events(const EventLog& log, const std::string& purchases = "user_id,timestamp,item_id\n") {
  return fixtures::ingest_strings(log.text, purchases, kProfiles, kCatalog);
}

dataio::TimePoint day(double d) { return dataio::TimePoint{} + dataio::Seconds(static_cast<std::int64_t>(d * 86400)); }

}  // namespace

TEST(PrepConfig, Validation) {
  EXPECT_NO_THROW(PrepConfig{}.validate());
  PrepConfig bad;
  bad.test_fraction = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.min_session_len = 40;
  EXPECT_THROW(bad.validate(), ConfigError);
  const auto round = nlohmann::json(PrepConfig{}).get<PrepConfig>();
  EXPECT_EQ(round.max_sessions, 7u);
}

TEST(Clean, RemovesRareCategories) {
  EventLog log;
  for (int i = 0; i < 9; ++i) log.add("u1", "s1", i % 2 ? "home" : "shop", "none", i % 2 ? "act" : "start");
  log.add("u1", "s1", "rare");
  PrepConfig cfg;
  cfg.min_category_freq = 0.2;
  CleanReport r;
  const auto out = clean_actions(with_events(log), cfg, &r);
  EXPECT_EQ(r.removed_sections, 1u);
  EXPECT_EQ(out.action_count(), 9u);
  EXPECT_FALSE(out.vocab.section_index("rare").has_value());
}

TEST(Clean, CollapsesConsecutiveDuplicates) {
  EventLog log;
  log.add("u1", "s1", "shop");
  log.add("u1", "s1", "shop");
  log.add("u1", "s1", "home");
  log.add("u1", "s1", "shop");
  log.add("u1", "s1", "shop");
  PrepConfig cfg;
  cfg.min_category_freq = 0.0;
  CleanReport r;
  const auto out = clean_actions(with_events(log), cfg, &r);
  EXPECT_EQ(out.action_count(), 3u);
  EXPECT_EQ(r.removed_duplicate_actions, 2u);
}

TEST(Bound, DropsShortAndTruncatesLong) {
  EventLog log;
  log.add("u1", "short", "a");
  log.add("u1", "short", "b");
  for (int i = 0; i < 40; ++i) log.add("u1", "long", i % 2 ? "a" : "b");
  BoundReport r;
  const auto out = bound_sessions(with_events(log), PrepConfig{}, &r);
  ASSERT_EQ(out.users[0].sessions.size(), 1u);
  EXPECT_EQ(out.users[0].sessions[0].actions.size(), 30u);
  EXPECT_EQ(out.users[0].sessions[0].id, "long");
  EXPECT_EQ(r.dropped_short_sessions, 1u);
  EXPECT_EQ(r.truncated_actions, 10u);
}

TEST(CapRecency, StopsAtLongGapAndCapsCount) {
  dataio::User u;
  for (double d : {0.0, 1.0, 20.0, 21.0, 22.0}) u.sessions.push_back({"s", day(d), {}});
  segmentation::Task t{0, {0, 1, 2, 3, 4}, 0, day(23)};
  PrepConfig cfg;
  EXPECT_EQ(cap_recency(t, u, cfg).sessions, (std::vector<std::uint32_t>{2, 3, 4}));
  cfg.max_sessions = 2;
  EXPECT_EQ(cap_recency(t, u, cfg).sessions, (std::vector<std::uint32_t>{3, 4}));
}

TEST(Split, IsTemporalAndLeakFree) {
  synth::SynthConfig sc;
  sc.n_users = 400;
  const auto p = fixtures::synth_prepared(sc);
  const auto& s = p.split;
  EXPECT_EQ(s.train.size() + s.validation.size() + s.test.size() + s.leaky_removed, p.tasks.size());
  EXPECT_NEAR(static_cast<double>(s.test.size()) / p.tasks.size(), 0.1, 0.01);
  auto latest = [&](const std::vector<std::size_t>& idx) {
    dataio::TimePoint t{};
    for (auto i : idx) t = std::max(t, p.tasks[i].purchase_time);
    return t;
  };
  auto earliest = [&](const std::vector<std::size_t>& idx) {
    auto t = dataio::TimePoint::max();
    for (auto i : idx) t = std::min(t, p.tasks[i].purchase_time);
    return t;
  };
  EXPECT_LE(latest(s.train), earliest(s.validation));
  EXPECT_LE(latest(s.validation), earliest(s.test));
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> mine;
    for (auto i : *part)
      for (auto sess : p.tasks[i].sessions) mine.insert({p.tasks[i].user, sess});
    for (const auto& key : mine) EXPECT_FALSE(seen.count(key));
    seen.insert(mine.begin(), mine.end());
  }
  EXPECT_EQ(p.period_end(s.test), latest(s.test));
}

TEST(Split, TooSmallThrows) {
  synth::SynthConfig sc;
  sc.n_users = 4;
  sc.repeat_purchase_prob = 0.0;
  EXPECT_THROW(fixtures::synth_prepared(sc), DataError);
}

TEST(Prepare, TasksRespectBounds) {
  synth::SynthConfig sc;
  sc.n_users = 300;
  const auto p = fixtures::synth_prepared(sc);
  for (const auto& t : p.tasks) {
    const auto& u = p.data.users[t.user];
    EXPECT_GE(t.sessions.size(), 1u);
    EXPECT_LE(t.sessions.size(), 7u);
    for (auto s : t.sessions) {
      EXPECT_LT(u.sessions[s].start, t.purchase_time);
      EXPECT_GE(u.sessions[s].actions.size(), 3u);
      EXPECT_LE(u.sessions[s].actions.size(), 30u);
    }
  }
  std::set<std::uint32_t> users;
  for (const auto& t : p.tasks) users.insert(t.user);
  EXPECT_EQ(p.report.stats.users, users.size());
  EXPECT_EQ(p.report.stats.purchase_events, p.tasks.size());
}
