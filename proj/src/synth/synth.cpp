#include "crossrec/synth/synth.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "crossrec/error.hpp"
#include "crossrec/numcore/matrix.hpp"

namespace crossrec::synth {

using nlohmann::json;

namespace {

constexpr std::array<const char*, 8> kSections = {"products", "shop",    "claims", "account",
                                                  "contact",  "news",    "help",   "quotes"};
constexpr std::array<const char*, 3> kTypes = {"start", "act", "complete"};

// Inclusive ranges of the demographic fields, in kDemographicFields order.
constexpr std::array<std::pair<int, int>, 7> kDemoRange = {
    {{18, 85}, {0, 4}, {1, 10}, {0, 3}, {0, 3}, {0, 4}, {0, 5}}};

void check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("synth: " + what);
}

std::string item_id(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%02zu", k + 1);
  return buf;
}

std::string user_id(std::size_t u) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "u%06zu", u + 1);
  return buf;
}

std::int64_t lognormal_seconds(numcore::Rng& rng, double median_seconds, double sd) {
  std::lognormal_distribution<double> d(std::log(median_seconds), sd);
  return std::max<std::int64_t>(1, std::llround(d(rng)));
}

}  // namespace

void SynthConfig::validate() const {
  check(n_users > 0, "n_users must be positive");
  check(n_items >= 2, "n_items must be at least 2");
  check(2 * n_coverage <= n_items, "n_coverage must be at most n_items / 2");
  check(n_sections >= 2 && n_sections <= kSections.size(), "n_sections must be in [2, 8]");
  check(n_service_objects > 0, "n_service_objects must be positive");
  check(max_sessions > 0, "max_sessions must be positive");
  check(mean_sessions >= 1.0, "mean_sessions must be >= 1");
  check(max_session_length >= 3, "max_session_length must be >= 3");
  check(mean_session_length > 3.0, "mean_session_length must be > 3");
  for (auto [p, name] : {std::pair{rho, "rho"}, {demographic_strength, "demographic_strength"},
                         {item_action_prob, "item_action_prob"}, {repeat_purchase_prob, "repeat_purchase_prob"}}) {
    check(p >= 0.0 && p <= 1.0, std::string(name) + " must be in [0, 1]");
  }
  check(short_gap_hours > 0.0 && long_gap_days > 0.0, "gaps must be positive");
  check(short_gap_hours * 3600.0 < long_gap_days * 86400.0, "short gap must be shorter than long gap");
}

void to_json(json& j, const SynthConfig& c) {
  j = {{"n_users", c.n_users},
       {"n_items", c.n_items},
       {"n_coverage", c.n_coverage},
       {"n_sections", c.n_sections},
       {"n_service_objects", c.n_service_objects},
       {"mean_sessions", c.mean_sessions},
       {"max_sessions", c.max_sessions},
       {"mean_session_length", c.mean_session_length},
       {"max_session_length", c.max_session_length},
       {"rho", c.rho},
       {"demographic_strength", c.demographic_strength},
       {"item_action_prob", c.item_action_prob},
       {"repeat_purchase_prob", c.repeat_purchase_prob},
       {"last_session_only", c.last_session_only},
       {"short_gap_hours", c.short_gap_hours},
       {"long_gap_days", c.long_gap_days},
       {"seed", c.seed}};
}

void from_json(const json& j, SynthConfig& c) {
  static const SynthConfig d;
  c.n_users = j.value("n_users", d.n_users);
  c.n_items = j.value("n_items", d.n_items);
  c.n_coverage = j.value("n_coverage", d.n_coverage);
  c.n_sections = j.value("n_sections", d.n_sections);
  c.n_service_objects = j.value("n_service_objects", d.n_service_objects);
  c.mean_sessions = j.value("mean_sessions", d.mean_sessions);
  c.max_sessions = j.value("max_sessions", d.max_sessions);
  c.mean_session_length = j.value("mean_session_length", d.mean_session_length);
  c.max_session_length = j.value("max_session_length", d.max_session_length);
  c.rho = j.value("rho", d.rho);
  c.demographic_strength = j.value("demographic_strength", d.demographic_strength);
  c.item_action_prob = j.value("item_action_prob", d.item_action_prob);
  c.repeat_purchase_prob = j.value("repeat_purchase_prob", d.repeat_purchase_prob);
  c.last_session_only = j.value("last_session_only", d.last_session_only);
  c.short_gap_hours = j.value("short_gap_hours", d.short_gap_hours);
  c.long_gap_days = j.value("long_gap_days", d.long_gap_days);
  c.seed = j.value("seed", d.seed);
}

SynthData generate(const SynthConfig& cfg) {
  cfg.validate();
  numcore::Rng rng(numcore::mix_seed(cfg.seed, 0x5717));
  const std::size_t K = cfg.n_items;
  const std::size_t first_coverage = K - cfg.n_coverage;

  std::vector<double> weights(K);
  for (std::size_t k = 0; k < K; ++k) weights[k] = 1.0 / std::pow(static_cast<double>(k + 1), 0.7);
  std::discrete_distribution<std::size_t> draw_item(weights.begin(), weights.end());
  std::uniform_int_distribution<std::size_t> any_item(0, K - 1);
  std::uniform_int_distribution<std::size_t> any_section(0, cfg.n_sections - 1);
  std::uniform_int_distribution<std::size_t> any_service(1, cfg.n_service_objects);
  std::discrete_distribution<std::size_t> draw_type({0.3, 0.5, 0.2});
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::geometric_distribution<int> extra_sessions(1.0 / cfg.mean_sessions);
  std::geometric_distribution<int> extra_actions(1.0 / (cfg.mean_session_length - 2.0));

  std::vector<std::array<double, 7>> centroid(K);
  for (auto& c : centroid)
    for (std::size_t f = 0; f < 7; ++f) {
      std::uniform_int_distribution<int> d(kDemoRange[f].first, kDemoRange[f].second);
      c[f] = d(rng);
    }

  const auto origin = std::chrono::sys_days{std::chrono::year{2021} / 1 / 1};
  const std::int64_t year_seconds = 365 * dataio::kSecondsPerDay;

  std::ostringstream events, purchases, profiles, catalog;
  events << "user_id,session_id,timestamp,section,object,type\n";
  purchases << "user_id,timestamp,item_id\n";
  profiles << "user_id";
  for (auto f : dataio::kDemographicFields) profiles << ',' << f;
  profiles << ",gender";
  for (std::size_t k = 0; k < K; ++k) profiles << ",portfolio_" << item_id(k);
  profiles << '\n';
  catalog << "item_id,base_item_id\n";
  for (std::size_t k = 0; k < K; ++k) {
    catalog << item_id(k) << ',';
    if (k >= first_coverage) catalog << item_id(k - first_coverage);
    catalog << '\n';
  }

  SynthData out;
  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    const std::string uid = user_id(u);
    const std::size_t tasks = 1 + (unit(rng) < cfg.repeat_purchase_prob ? 1 : 0);
    std::vector<int> portfolio(K, 0);
    for (std::size_t k = 0; k < first_coverage; ++k) portfolio[k] = unit(rng) < 0.25 ? 1 : 0;

    std::int64_t cursor = std::uniform_int_distribution<std::int64_t>(0, year_seconds)(rng);
    std::size_t session_no = 0;
    std::size_t demo_item = 0;
    for (std::size_t p = 0; p < tasks; ++p) {
      const std::size_t target = draw_item(rng);
      if (p == 0) demo_item = target;
      const bool planted = unit(rng) < cfg.rho;
      const std::size_t bought = planted ? target : any_item(rng);
      if (bought >= first_coverage) portfolio[bought - first_coverage] = std::max(portfolio[bought - first_coverage], 1);

      const std::size_t n_sessions = std::min<std::size_t>(1 + extra_sessions(rng), cfg.max_sessions);
      std::int64_t last_action = cursor;
      for (std::size_t s = 0; s < n_sessions; ++s) {
        const bool signal = planted && (!cfg.last_session_only || s + 1 == n_sessions);
        const std::size_t length = std::min<std::size_t>(3 + extra_actions(rng), cfg.max_session_length);
        const std::size_t forced = std::uniform_int_distribution<std::size_t>(0, length - 1)(rng);
        const std::string sid = uid + "_s" + std::to_string(++session_no);
        std::int64_t t = cursor;
        for (std::size_t a = 0; a < length; ++a) {
          if (a > 0) t += lognormal_seconds(rng, 30.0, 1.0);
          std::string section, object;
          const bool item_action = (signal && a == forced) || unit(rng) < cfg.item_action_prob;
          if (item_action) {
            std::size_t item = any_item(rng);
            if (signal && (a == forced || unit(rng) < 0.8)) item = target;
            section = kSections[coin(rng) ? 1 : 0];
            object = std::string(dataio::kItemPrefix) + item_id(item);
          } else {
            section = kSections[any_section(rng)];
            object = unit(rng) < 0.6 ? std::string(dataio::kServicePrefix) + "S" + std::to_string(any_service(rng))
                                     : std::string(dataio::kNoObject);
          }
          events << uid << ',' << sid << ',' << dataio::format_timestamp(origin + dataio::Seconds(t)) << ','
                 << section << ',' << object << ',' << kTypes[draw_type(rng)] << '\n';
        }
        last_action = t;
        cursor = t + lognormal_seconds(rng, cfg.short_gap_hours * 3600.0, 1.0);
      }
      const std::int64_t purchase_time = last_action + lognormal_seconds(rng, 600.0, 0.5);
      purchases << uid << ',' << dataio::format_timestamp(origin + dataio::Seconds(purchase_time)) << ','
                << item_id(bought) << '\n';
      out.planted.push_back(static_cast<std::uint32_t>(target));
      out.planted_purchase.push_back(planted);
      cursor = purchase_time + lognormal_seconds(rng, cfg.long_gap_days * dataio::kSecondsPerDay, 0.5);
    }

    profiles << uid;
    for (std::size_t f = 0; f < 7; ++f) {
      const auto [lo, hi] = kDemoRange[f];
      double v;
      if (unit(rng) < cfg.demographic_strength) {
        v = centroid[demo_item][f];
        if (f == 0) v += std::normal_distribution<double>(0.0, 4.0)(rng);
      } else {
        v = std::uniform_int_distribution<int>(lo, hi)(rng);
      }
      profiles << ',' << std::clamp<long>(std::lround(v), lo, hi);
    }
    profiles << ',' << (coin(rng) ? 'F' : 'M');
    for (int n : portfolio) profiles << ',' << n;
    profiles << '\n';
  }

  out.events = events.str();
  out.purchases = purchases.str();
  out.profiles = profiles.str();
  out.catalog = catalog.str();
  return out;
}

dataio::DataFiles files_in(const std::filesystem::path& dir) {
  return {dir / "events.csv", dir / "purchases.csv", dir / "profiles.csv", dir / "catalog.csv"};
}

dataio::DataFiles write_files(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto files = files_in(dir);
  auto put = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write " + p.string());
    f << text;
    if (!f) throw Error("cannot write " + p.string());
  };
  put(files.events, data.events);
  put(files.purchases, data.purchases);
  put(files.profiles, data.profiles);
  put(files.catalog, data.catalog);
  return files;
}

}  // namespace crossrec::synth
