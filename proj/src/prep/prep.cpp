#include "crossrec/prep/prep.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

namespace crossrec::prep {

using dataio::Dataset;
using nlohmann::json;

void PrepConfig::validate() const {
  if (!(min_category_freq > 0.0 && min_category_freq < 1.0)) throw ConfigError("min_category_freq must lie in (0,1)");
  if (min_session_len == 0) throw ConfigError("min_session_len must be positive");
  if (max_session_len < min_session_len) throw ConfigError("max_session_len must be >= min_session_len");
  if (max_sessions == 0) throw ConfigError("max_sessions must be positive");
  if (!(threshold_days > 0.0)) throw ConfigError("threshold_days must be positive");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0,1)");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in (0,1)");
  }
}

void to_json(json& j, const PrepConfig& c) {
  j = json{{"min_category_freq", c.min_category_freq}, {"min_session_len", c.min_session_len},
           {"max_session_len", c.max_session_len},     {"max_sessions", c.max_sessions},
           {"threshold_days", c.threshold_days},       {"test_fraction", c.test_fraction},
           {"validation_fraction", c.validation_fraction}};
}

void from_json(const json& j, PrepConfig& c) {
  c.min_category_freq = j.value("min_category_freq", c.min_category_freq);
  c.min_session_len = j.value("min_session_len", c.min_session_len);
  c.max_session_len = j.value("max_session_len", c.max_session_len);
  c.max_sessions = j.value("max_sessions", c.max_sessions);
  c.threshold_days = j.value("threshold_days", c.threshold_days);
  c.test_fraction = j.value("test_fraction", c.test_fraction);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
}

Dataset clean_actions(const Dataset& data, const PrepConfig& cfg, CleanReport* report) {
  CleanReport r;
  const auto& vocab = data.vocab;
  std::vector<std::size_t> sec(vocab.sections().size()), obj(vocab.objects().size()), typ(vocab.types().size());
  std::size_t total = 0;
  for (const auto& u : data.users)
    for (const auto& s : u.sessions)
      for (const auto& a : s.actions) {
        ++sec[a.section];
        ++obj[a.object];
        ++typ[a.type];
        ++total;
      }
  auto keep_flags = [&](const std::vector<std::size_t>& counts, std::size_t denom, std::size_t& removed) {
    std::vector<bool> keep(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      keep[i] = denom > 0 && static_cast<double>(counts[i]) / static_cast<double>(denom) >= cfg.min_category_freq;
      if (!keep[i]) ++removed;
    }
    return keep;
  };
  const auto keep_sec = keep_flags(sec, total, r.removed_sections);
  const auto keep_obj = keep_flags(obj, total, r.removed_objects);
  const auto keep_typ = keep_flags(typ, total, r.removed_types);

  std::vector<std::size_t> item_counts(data.catalog.size());
  std::size_t item_total = 0;
  for (const auto& u : data.users)
    for (const auto& e : u.purchases)
      for (auto k : e.items) {
        ++item_counts[k];
        ++item_total;
      }
  std::vector<bool> keep_item = keep_flags(item_counts, item_total, r.removed_items);
  // A coverage whose base product is gone cannot be bought any more.
  for (std::size_t k = 0; k < keep_item.size(); ++k) {
    if (keep_item[k] && data.catalog.base_of[k] && !keep_item[*data.catalog.base_of[k]]) {
      keep_item[k] = false;
      ++r.removed_items;
    }
  }
  std::vector<std::optional<std::uint32_t>> remap(data.catalog.size());
  dataio::Catalog catalog;
  for (std::size_t k = 0; k < data.catalog.size(); ++k) {
    if (!keep_item[k]) continue;
    remap[k] = static_cast<std::uint32_t>(catalog.items.size());
    catalog.items.push_back(data.catalog.items[k]);
  }
  catalog.base_of.assign(catalog.size(), std::nullopt);
  for (std::size_t k = 0; k < data.catalog.size(); ++k) {
    if (remap[k] && data.catalog.base_of[k]) catalog.base_of[*remap[k]] = remap[*data.catalog.base_of[k]];
  }

  Dataset out;
  out.catalog = catalog;
  out.vocab = data.vocab;
  out.report = data.report;
  for (const auto& u : data.users) {
    dataio::User nu;
    nu.id = u.id;
    nu.has_profile = u.has_profile;
    nu.profile = u.profile;
    nu.profile.portfolio.assign(catalog.size(), 0);
    for (std::size_t k = 0; k < data.catalog.size(); ++k) {
      if (remap[k] && k < u.profile.portfolio.size()) nu.profile.portfolio[*remap[k]] = u.profile.portfolio[k];
    }
    for (const auto& s : u.sessions) {
      dataio::Session ns{s.id, s.start, {}};
      for (const auto& a : s.actions) {
        if (!keep_sec[a.section] || !keep_obj[a.object] || !keep_typ[a.type]) {
          ++r.removed_rare_actions;
          continue;
        }
        if (!ns.actions.empty() && ns.actions.back().same_category(a)) {
          ++r.removed_duplicate_actions;
          continue;
        }
        ns.actions.push_back(a);
      }
      nu.sessions.push_back(std::move(ns));
    }
    for (const auto& e : u.purchases) {
      dataio::PurchaseEvent ne{e.time, {}};
      for (auto k : e.items)
        if (remap[k]) ne.items.push_back(*remap[k]);
      if (ne.items.empty()) {
        ++r.removed_purchase_events;
        continue;
      }
      nu.purchases.push_back(std::move(ne));
    }
    out.users.push_back(std::move(nu));
  }
  // Remap objects against the reduced catalog while compacting the vocabulary.
  out.vocab = dataio::ActionVocabulary(data.vocab.sections(), data.vocab.objects(), data.vocab.types(), out.catalog);
  dataio::rebuild_vocabulary(out);
  if (report) *report = r;
  return out;
}

Dataset bound_sessions(const Dataset& data, const PrepConfig& cfg, BoundReport* report) {
  BoundReport r;
  Dataset out = data;
  for (auto& u : out.users) {
    std::vector<dataio::Session> kept;
    for (auto& s : u.sessions) {
      if (s.actions.size() < cfg.min_session_len) {
        ++r.dropped_short_sessions;
        continue;
      }
      if (s.actions.size() > cfg.max_session_len) {
        ++r.truncated_sessions;
        r.truncated_actions += s.actions.size() - cfg.max_session_len;
        s.actions.resize(cfg.max_session_len);
      }
      kept.push_back(std::move(s));
    }
    u.sessions = std::move(kept);
  }
  dataio::rebuild_vocabulary(out);
  if (report) *report = r;
  return out;
}

Task cap_recency(const Task& task, const dataio::User& user, const PrepConfig& cfg) {
  Task out = task;
  if (task.sessions.empty()) return out;
  const auto threshold = segmentation::threshold_seconds(cfg.threshold_days);
  std::size_t first = task.sessions.size() - 1;
  while (first > 0) {
    const auto gap = user.sessions[task.sessions[first]].start - user.sessions[task.sessions[first - 1]].start;
    if (gap > threshold) break;
    --first;
  }
  first = std::max(first, task.sessions.size() - std::min(task.sessions.size(), cfg.max_sessions));
  out.sessions.assign(task.sessions.begin() + static_cast<std::ptrdiff_t>(first), task.sessions.end());
  return out;
}

namespace {

using SessionKey = std::pair<std::uint32_t, std::uint32_t>;

std::set<SessionKey> session_keys(const std::vector<Task>& tasks, const std::vector<std::size_t>& idx) {
  std::set<SessionKey> keys;
  for (auto i : idx)
    for (auto s : tasks[i].sessions) keys.insert({tasks[i].user, s});
  return keys;
}

// Splits off the latest ceil(fraction * n) tasks of `pool` (which is sorted
// chronologically) and removes earlier tasks sharing a session with them.
std::vector<std::size_t> carve(std::vector<std::size_t>& pool, double fraction, const std::vector<Task>& tasks,
                               std::size_t& leaky) {
  const auto n_late = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pool.size()) - 1e-9));
  std::vector<std::size_t> late(pool.end() - static_cast<std::ptrdiff_t>(n_late), pool.end());
  pool.resize(pool.size() - n_late);
  const auto keys = session_keys(tasks, late);
  std::vector<std::size_t> kept;
  for (auto i : pool) {
    const bool shares = std::any_of(tasks[i].sessions.begin(), tasks[i].sessions.end(),
                                    [&](std::uint32_t s) { return keys.count({tasks[i].user, s}) != 0; });
    if (shares) {
      ++leaky;
    } else {
      kept.push_back(i);
    }
  }
  pool = std::move(kept);
  return late;
}

}  // namespace

Split temporal_split(const std::vector<Task>& tasks, const Dataset& data, const PrepConfig& cfg) {
  if (tasks.size() < 10) throw DataError("split too small");
  std::vector<std::size_t> order(tasks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ta = tasks[a];
    const auto& tb = tasks[b];
    return std::tie(ta.purchase_time, data.users[ta.user].id, ta.purchase) <
           std::tie(tb.purchase_time, data.users[tb.user].id, tb.purchase);
  });
  Split split;
  split.test = carve(order, cfg.test_fraction, tasks, split.leaky_removed);
  split.validation = carve(order, cfg.validation_fraction, tasks, split.leaky_removed);
  split.train = std::move(order);
  if (split.train.empty()) throw DataError("split too small");
  return split;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size()))};
}

}  // namespace

DatasetStats task_stats(const Dataset& data, const std::vector<Task>& tasks) {
  DatasetStats s;
  s.items = data.catalog.size();
  s.purchase_events = tasks.size();
  std::map<std::uint32_t, std::size_t> per_user;
  std::set<SessionKey> sessions;
  std::vector<double> sessions_per_task;
  for (const auto& t : tasks) {
    ++per_user[t.user];
    sessions_per_task.push_back(static_cast<double>(t.sessions.size()));
    for (auto si : t.sessions) sessions.insert({t.user, si});
  }
  s.users = per_user.size();
  s.sessions = sessions.size();
  std::vector<double> actions_per_session;
  for (const auto& [u, si] : sessions) {
    const auto n = data.users[u].sessions[si].actions.size();
    s.actions += n;
    actions_per_session.push_back(static_cast<double>(n));
  }
  std::vector<double> ppu;
  for (const auto& [_, n] : per_user) ppu.push_back(static_cast<double>(n));
  std::tie(s.purchases_per_user_mean, s.purchases_per_user_std) = mean_std(ppu);
  std::tie(s.sessions_per_task_mean, s.sessions_per_task_std) = mean_std(sessions_per_task);
  std::tie(s.actions_per_session_mean, s.actions_per_session_std) = mean_std(actions_per_session);
  return s;
}

void to_json(json& j, const DatasetStats& s) {
  j = json{{"users", s.users},
           {"items", s.items},
           {"purchase_events", s.purchase_events},
           {"sessions", s.sessions},
           {"actions", s.actions},
           {"purchase_events_per_user", {s.purchases_per_user_mean, s.purchases_per_user_std}},
           {"sessions_before_purchase", {s.sessions_per_task_mean, s.sessions_per_task_std}},
           {"actions_per_session", {s.actions_per_session_mean, s.actions_per_session_std}}};
}

json report_to_json(const PrepReport& r) {
  return json{{"clean",
               {{"removed_sections", r.clean.removed_sections},
                {"removed_objects", r.clean.removed_objects},
                {"removed_types", r.clean.removed_types},
                {"removed_items", r.clean.removed_items},
                {"removed_rare_actions", r.clean.removed_rare_actions},
                {"removed_duplicate_actions", r.clean.removed_duplicate_actions},
                {"removed_purchase_events", r.clean.removed_purchase_events}}},
              {"bound",
               {{"dropped_short_sessions", r.bound.dropped_short_sessions},
                {"truncated_sessions", r.bound.truncated_sessions},
                {"truncated_actions", r.bound.truncated_actions}}},
              {"dropped_purchases", r.dropped_purchases},
              {"capped_sessions", r.capped_sessions},
              {"leaky_removed", r.leaky_removed},
              {"stats", r.stats}};
}

std::vector<Task> PreparedData::tasks_of(const std::vector<std::size_t>& idx) const {
  std::vector<Task> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(tasks[i]);
  return out;
}

dataio::TimePoint PreparedData::period_end(const std::vector<std::size_t>& idx) const {
  dataio::TimePoint end{};
  for (auto i : idx) end = std::max(end, tasks[i].purchase_time);
  return end;
}

std::vector<Task> build_tasks(const Dataset& data, const PrepConfig& cfg, std::size_t* dropped, std::size_t* capped) {
  const auto threshold = segmentation::threshold_seconds(cfg.threshold_days);
  std::vector<Task> tasks;
  std::size_t n_dropped = 0, n_capped = 0;
  std::vector<dataio::TimePoint> starts;
  for (std::uint32_t u = 0; u < data.users.size(); ++u) {
    const auto& user = data.users[u];
    starts.clear();
    for (const auto& s : user.sessions) starts.push_back(s.start);
    auto seg = segmentation::segment_tasks(u, starts, user.purchases, threshold);
    n_dropped += seg.dropped_purchases;
    for (auto& t : seg.tasks) {
      Task c = cap_recency(t, user, cfg);
      n_capped += t.sessions.size() - c.sessions.size();
      tasks.push_back(std::move(c));
    }
  }
  if (dropped) *dropped = n_dropped;
  if (capped) *capped = n_capped;
  return tasks;
}

PreparedData prepare(const Dataset& raw, const PrepConfig& cfg) {
  cfg.validate();
  PreparedData out;
  out.config = cfg;
  out.data = bound_sessions(clean_actions(raw, cfg, &out.report.clean), cfg, &out.report.bound);
  out.tasks = build_tasks(out.data, cfg, &out.report.dropped_purchases, &out.report.capped_sessions);
  out.split = temporal_split(out.tasks, out.data, cfg);
  out.report.leaky_removed = out.split.leaky_removed;
  out.report.stats = task_stats(out.data, out.tasks);
  return out;
}

}  // namespace crossrec::prep
