#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "crossrec/segmentation/segmentation.hpp"
#include "fixtures.hpp"

using namespace crossrec;

namespace {

synth::SynthConfig small(std::size_t users = 1500) {
  synth::SynthConfig c;
  c.n_users = users;
  c.seed = 5;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Synth, FixedSeedIsByteIdentical) {
  const auto a = synth::generate(small(300)), b = synth::generate(small(300));
  EXPECT_EQ(a.events, b.events);
  EXPECT_EQ(a.purchases, b.purchases);
  EXPECT_EQ(a.profiles, b.profiles);
  EXPECT_EQ(a.catalog, b.catalog);
  auto other = small(300);
  other.seed = 6;
  EXPECT_NE(synth::generate(other).events, a.events);
}

TEST(Synth, IngestsWithoutRejects) {
  const auto s = synth::generate(small());
  const auto raw = fixtures::ingest_synth(s);
  EXPECT_EQ(raw.report.rejected_events, 0u);
  EXPECT_EQ(raw.report.rejected_purchases, 0u);
  EXPECT_EQ(raw.report.rejected_profiles, 0u);
  EXPECT_EQ(raw.users.size(), 1500u);
  EXPECT_EQ(raw.purchase_count(), s.planted.size());
  EXPECT_EQ(raw.catalog.size(), 16u);
  std::size_t coverage = 0;
  for (std::uint32_t k = 0; k < raw.catalog.size(); ++k) coverage += raw.catalog.is_coverage(k);
  EXPECT_EQ(coverage, 4u);
}

TEST(Synth, FilesRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "crossrec_synth_test";
  std::filesystem::remove_all(dir);
  const auto s = synth::generate(small(200));
  const auto files = synth::write_files(s, dir);
  EXPECT_EQ(slurp(files.events), s.events);
  EXPECT_EQ(slurp(synth::files_in(dir).catalog), s.catalog);
  EXPECT_EQ(dataio::ingest(files).purchase_count(), s.planted.size());
  std::filesystem::remove_all(dir);
}

TEST(Synth, FullSignalPlantsEveryPurchase) {
  auto cfg = small(600);
  cfg.rho = 1.0;
  const auto s = synth::generate(cfg);
  const auto raw = fixtures::ingest_synth(s);
  const auto planted = fixtures::planted_items(s, raw);
  for (bool b : s.planted_purchase) EXPECT_TRUE(b);
  for (const auto& u : raw.users)
    for (const auto& p : u.purchases) {
      const auto target = planted.at({u.id, p.time});
      EXPECT_TRUE(std::binary_search(p.items.begin(), p.items.end(), target));
    }
  const auto prepared = prep::prepare(raw, {});
  ASSERT_FALSE(prepared.tasks.empty());
  for (const auto& t : prepared.tasks) {
    const auto& u = prepared.data.users[t.user];
    const auto target = planted.at({u.id, t.purchase_time});
    bool seen = false;
    for (auto si : t.sessions)
      for (const auto& a : u.sessions[si].actions) seen = seen || prepared.data.vocab.object_item(a.object) == target;
    EXPECT_TRUE(seen) << u.id;
  }
}

TEST(Synth, MarginalsNearTargets) {
  const auto cfg = small(3000);
  const auto raw = fixtures::ingest_synth(synth::generate(cfg));
  const double sessions = static_cast<double>(raw.session_count()) / raw.purchase_count();
  const double actions = static_cast<double>(raw.action_count()) / raw.session_count();
  EXPECT_NEAR(sessions, cfg.mean_sessions, 0.1 * cfg.mean_sessions);
  EXPECT_NEAR(actions, cfg.mean_session_length, 0.1 * cfg.mean_session_length);
}

TEST(Synth, GapsAreBimodal) {
  const auto raw = fixtures::ingest_synth(synth::generate(small()));
  const auto gaps = segmentation::pooled_log_gaps(raw);
  const auto fit = segmentation::fit_gmm_em(gaps);
  EXPECT_NEAR(fit.model.mu1, std::log(3600.0), 1.0);
  EXPECT_NEAR(fit.model.mu2, std::log(30.0 * 86400.0), 1.0);
  const auto t = segmentation::intersection_threshold(fit.model);
  EXPECT_GT(t.days, 1.0 / 24);
  EXPECT_LT(t.days, 30.0);
}

TEST(Synth, InvalidConfigThrows) {
  auto c = small();
  c.rho = 1.5;
  EXPECT_THROW(synth::generate(c), ConfigError);
  c = small();
  c.n_users = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small();
  c.n_coverage = c.n_items;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(nlohmann::json({{"rho", "high"}}).get<synth::SynthConfig>(), std::exception);
}

TEST(Synth, ConfigJsonRoundTrip) {
  auto c = small();
  c.last_session_only = true;
  const auto back = nlohmann::json(c).get<synth::SynthConfig>();
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(c));
}
