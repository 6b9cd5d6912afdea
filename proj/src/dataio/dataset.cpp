#include "crossrec/dataio/dataset.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <ctime>
#include <fstream>
#include <set>
#include <tuple>

#include "csv.hpp"

namespace crossrec::dataio {

namespace {

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw DataError("bad " + std::string(what) + ": " + std::string(s));
  }
  return v;
}

double parse_double(std::string_view s, std::string_view what) {
  if (s.empty()) throw DataError("empty " + std::string(what));
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(s), &used);
    if (used != s.size()) throw DataError("bad " + std::string(what) + ": " + std::string(s));
    return v;
  } catch (const std::logic_error&) {
    throw DataError("bad " + std::string(what) + ": " + std::string(s));
  }
}

constexpr std::size_t kMaxMessages = 20;

void note_reject(IngestReport& report, std::string message) {
  if (report.messages.size() < kMaxMessages) report.messages.push_back(std::move(message));
}

}  // namespace

TimePoint parse_timestamp(std::string_view text) {
  // YYYY-MM-DD?HH:MM:SS[Z|+hh:mm|-hh:mm]
  if (text.size() < 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':') {
    throw DataError("bad timestamp: " + std::string(text));
  }
  std::tm tm{};
  tm.tm_year = parse_int(text.substr(0, 4), "year") - 1900;
  tm.tm_mon = parse_int(text.substr(5, 2), "month") - 1;
  tm.tm_mday = parse_int(text.substr(8, 2), "day");
  tm.tm_hour = parse_int(text.substr(11, 2), "hour");
  tm.tm_min = parse_int(text.substr(14, 2), "minute");
  tm.tm_sec = parse_int(text.substr(17, 2), "second");
  if (tm.tm_mon < 0 || tm.tm_mon > 11 || tm.tm_mday < 1 || tm.tm_mday > 31 || tm.tm_hour > 23 ||
      tm.tm_min > 59 || tm.tm_sec > 60) {
    throw DataError("bad timestamp: " + std::string(text));
  }
  std::int64_t offset = 0;
  std::string_view rest = text.substr(19);
  if (!rest.empty() && rest.front() == '.') {  // fractional seconds are truncated
    std::size_t i = 1;
    while (i < rest.size() && rest[i] >= '0' && rest[i] <= '9') ++i;
    rest.remove_prefix(i);
  }
  if (rest == "Z" || rest.empty()) {
  } else if (rest.size() == 6 && (rest[0] == '+' || rest[0] == '-') && rest[3] == ':') {
    const int sign = rest[0] == '+' ? 1 : -1;
    offset = sign * (parse_int(rest.substr(1, 2), "offset") * 3600 + parse_int(rest.substr(4, 2), "offset") * 60);
  } else {
    throw DataError("bad timestamp: " + std::string(text));
  }
  const std::time_t t = timegm(&tm);
  return TimePoint(Seconds(static_cast<std::int64_t>(t) - offset));
}

std::string format_timestamp(TimePoint t) {
  const std::time_t tt = static_cast<std::time_t>(t.time_since_epoch().count());
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::int64_t whole_days(TimePoint from, TimePoint to) {
  const std::int64_t s = (to - from).count();
  std::int64_t d = s / kSecondsPerDay;
  if (s % kSecondsPerDay != 0 && s < 0) --d;
  return d;
}

ObjectKind object_kind(std::string_view object) {
  if (object.starts_with(kItemPrefix)) return ObjectKind::item;
  if (object.starts_with(kServicePrefix)) return ObjectKind::service;
  return ObjectKind::none;
}

std::optional<std::uint32_t> Catalog::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i] == id) return static_cast<std::uint32_t>(i);
  }
  return std::nullopt;
}

ActionVocabulary::ActionVocabulary(std::vector<std::string> sections, std::vector<std::string> objects,
                                   std::vector<std::string> types, const Catalog& catalog)
    : sections_(std::move(sections)), objects_(std::move(objects)), types_(std::move(types)) {
  for (std::size_t i = 0; i < sections_.size(); ++i) section_idx_[sections_[i]] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i < objects_.size(); ++i) object_idx_[objects_[i]] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i < types_.size(); ++i) type_idx_[types_[i]] = static_cast<std::uint32_t>(i);
  object_to_item_.assign(objects_.size(), std::nullopt);
  item_to_object_.assign(catalog.size(), std::nullopt);
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    if (object_kind(objects_[i]) != ObjectKind::item) continue;
    if (auto item = catalog.index_of(std::string_view(objects_[i]).substr(kItemPrefix.size()))) {
      object_to_item_[i] = *item;
      item_to_object_[*item] = static_cast<std::uint32_t>(i);
    }
  }
}

namespace {

std::vector<std::string> order_by_frequency(const std::map<std::string, std::size_t>& counts) {
  std::vector<std::pair<std::string, std::size_t>> v(counts.begin(), counts.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> out;
  out.reserve(v.size());
  for (auto& [k, _] : v) out.push_back(k);
  return out;
}

}  // namespace

ActionVocabulary ActionVocabulary::from_counts(const std::map<std::string, std::size_t>& sections,
                                               const std::map<std::string, std::size_t>& objects,
                                               const std::map<std::string, std::size_t>& types,
                                               const Catalog& catalog) {
  return ActionVocabulary(order_by_frequency(sections), order_by_frequency(objects), order_by_frequency(types),
                          catalog);
}

std::optional<std::uint32_t> ActionVocabulary::section_index(std::string_view s) const {
  auto it = section_idx_.find(std::string(s));
  if (it == section_idx_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint32_t> ActionVocabulary::object_index(std::string_view s) const {
  auto it = object_idx_.find(std::string(s));
  if (it == object_idx_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint32_t> ActionVocabulary::type_index(std::string_view s) const {
  auto it = type_idx_.find(std::string(s));
  if (it == type_idx_.end()) return std::nullopt;
  return it->second;
}

Action ActionVocabulary::encode(std::string_view section, std::string_view object, std::string_view type,
                                TimePoint time) const {
  auto s = section_index(section);
  if (!s) throw DataError("unknown section: " + std::string(section));
  auto o = object_index(object);
  if (!o) throw DataError("unknown object: " + std::string(object));
  auto t = type_index(type);
  if (!t) throw DataError("unknown type: " + std::string(type));
  return Action{*s, *o, *t, time};
}

std::optional<std::uint32_t> ActionVocabulary::object_item(std::uint32_t object) const {
  return object < object_to_item_.size() ? object_to_item_[object] : std::nullopt;
}

std::optional<std::uint32_t> ActionVocabulary::item_object(std::uint32_t item) const {
  return item < item_to_object_.size() ? item_to_object_[item] : std::nullopt;
}

std::size_t Dataset::session_count() const {
  std::size_t n = 0;
  for (const auto& u : users) n += u.sessions.size();
  return n;
}

std::size_t Dataset::action_count() const {
  std::size_t n = 0;
  for (const auto& u : users)
    for (const auto& s : u.sessions) n += s.actions.size();
  return n;
}

std::size_t Dataset::purchase_count() const {
  std::size_t n = 0;
  for (const auto& u : users) n += u.purchases.size();
  return n;
}

Catalog read_catalog(std::istream& in) {
  detail::Header header(in, "catalog");
  const auto c_item = header.require("item_id");
  const auto c_base = header.require("base_item_id");
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = detail::split_row(line);
    if (f.size() != header.size()) throw DataError("catalog: malformed row: " + line);
    rows.emplace_back(f[c_item], f[c_base]);
  }
  Catalog cat;
  for (const auto& [item, _] : rows) {
    if (item.empty()) throw DataError("catalog: empty item id");
    if (cat.index_of(item)) throw DataError("catalog: duplicate item " + item);
    cat.items.push_back(item);
  }
  cat.base_of.assign(cat.items.size(), std::nullopt);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].second.empty()) continue;
    auto base = cat.index_of(rows[i].second);
    if (!base) throw DataError("catalog: unknown base item " + rows[i].second);
    cat.base_of[i] = *base;
  }
  for (std::size_t i = 0; i < cat.size(); ++i) {
    std::optional<std::uint32_t> cur = cat.base_of[i];
    for (std::size_t steps = 0; cur; ++steps) {
      if (steps > cat.size() || *cur == i) throw DataError("catalog: coverage cycle at " + cat.items[i]);
      cur = cat.base_of[*cur];
    }
  }
  if (cat.items.empty()) throw DataError("catalog: no items");
  return cat;
}

Dataset ingest(std::istream& events, std::istream& purchases, std::istream& profiles, std::istream& catalog_in) {
  Dataset data;
  data.catalog = read_catalog(catalog_in);
  const Catalog& catalog = data.catalog;
  IngestReport& report = data.report;

  struct RawAction {
    std::string section, object, type;
    TimePoint time;
    std::size_t row;
  };
  // user -> session id -> actions
  std::map<std::string, std::map<std::string, std::vector<RawAction>>> raw;
  std::map<std::string, std::size_t> section_counts, object_counts, type_counts;
  {
    detail::Header h(events, "events");
    const auto c_user = h.require("user_id"), c_sess = h.require("session_id"), c_ts = h.require("timestamp"),
               c_sec = h.require("section"), c_obj = h.require("object"), c_type = h.require("type");
    std::string line;
    std::size_t row = 0;
    while (std::getline(events, line)) {
      if (line.empty() || line == "\r") continue;
      ++row;
      ++report.event_rows;
      auto f = detail::split_row(line);
      try {
        if (f.size() != h.size()) throw DataError("wrong field count");
        if (f[c_user].empty() || f[c_sess].empty() || f[c_sec].empty() || f[c_type].empty()) {
          throw DataError("empty field");
        }
        std::string object = f[c_obj].empty() ? std::string(kNoObject) : f[c_obj];
        if (object_kind(object) == ObjectKind::item &&
            !catalog.index_of(std::string_view(object).substr(kItemPrefix.size()))) {
          throw DataError("unknown item id " + object);
        }
        RawAction a{f[c_sec], object, f[c_type], parse_timestamp(f[c_ts]), row};
        ++section_counts[a.section];
        ++object_counts[a.object];
        ++type_counts[a.type];
        raw[f[c_user]][f[c_sess]].push_back(std::move(a));
      } catch (const DataError& e) {
        ++report.rejected_events;
        note_reject(report, "events row " + std::to_string(row) + ": " + e.what());
      }
    }
  }
  data.vocab = ActionVocabulary::from_counts(section_counts, object_counts, type_counts, catalog);

  std::map<std::string, std::map<TimePoint, std::set<std::uint32_t>>> raw_purchases;
  {
    detail::Header h(purchases, "purchases");
    const auto c_user = h.require("user_id"), c_ts = h.require("timestamp"), c_item = h.require("item_id");
    std::string line;
    std::size_t row = 0;
    while (std::getline(purchases, line)) {
      if (line.empty() || line == "\r") continue;
      ++row;
      ++report.purchase_rows;
      auto f = detail::split_row(line);
      try {
        if (f.size() != h.size() || f[c_user].empty()) throw DataError("malformed row");
        auto item = catalog.index_of(f[c_item]);
        if (!item) throw DataError("unknown item id " + f[c_item]);
        raw_purchases[f[c_user]][parse_timestamp(f[c_ts])].insert(*item);
      } catch (const DataError& e) {
        ++report.rejected_purchases;
        note_reject(report, "purchases row " + std::to_string(row) + ": " + e.what());
      }
    }
  }

  std::map<std::string, UserProfile> raw_profiles;
  {
    detail::Header h(profiles, "profiles");
    const auto c_user = h.require("user_id");
    std::vector<std::size_t> demo_cols;
    for (auto name : kDemographicFields) demo_cols.push_back(h.require(std::string(name)));
    std::vector<std::pair<std::size_t, std::uint32_t>> portfolio_cols;
    for (std::size_t i = 0; i < h.names().size(); ++i) {
      const std::string& name = h.names()[i];
      if (!name.starts_with("portfolio_")) continue;
      auto item = catalog.index_of(std::string_view(name).substr(10));
      if (!item) throw DataError("profiles: portfolio column for unknown item " + name);
      portfolio_cols.emplace_back(i, *item);
    }
    const std::optional<std::size_t> c_gender =
        h.has("gender") ? std::optional<std::size_t>(h.require("gender")) : std::nullopt;
    std::string line;
    std::size_t row = 0;
    while (std::getline(profiles, line)) {
      if (line.empty() || line == "\r") continue;
      ++row;
      ++report.profile_rows;
      auto f = detail::split_row(line);
      try {
        if (f.size() != h.size() || f[c_user].empty()) throw DataError("malformed row");
        UserProfile p;
        for (std::size_t c : demo_cols) p.demographics.push_back(parse_double(f[c], h.names()[c]));
        p.portfolio.assign(catalog.size(), 0);
        for (auto [c, item] : portfolio_cols) {
          const int n = parse_int(f[c], h.names()[c]);
          if (n < 0) throw DataError("negative portfolio count");
          p.portfolio[item] = n;
        }
        if (c_gender) p.gender = f[*c_gender];
        raw_profiles[f[c_user]] = std::move(p);
      } catch (const DataError& e) {
        ++report.rejected_profiles;
        note_reject(report, "profiles row " + std::to_string(row) + ": " + e.what());
      }
    }
  }

  std::set<std::string> user_ids;
  for (const auto& [u, _] : raw) user_ids.insert(u);
  for (const auto& [u, _] : raw_purchases) user_ids.insert(u);

  for (const auto& id : user_ids) {
    User user;
    user.id = id;
    if (auto it = raw.find(id); it != raw.end()) {
      for (auto& [sid, actions] : it->second) {
        std::stable_sort(actions.begin(), actions.end(),
                         [](const RawAction& a, const RawAction& b) { return a.time < b.time; });
        Session s;
        s.id = sid;
        s.start = actions.front().time;
        for (const auto& a : actions) s.actions.push_back(data.vocab.encode(a.section, a.object, a.type, a.time));
        user.sessions.push_back(std::move(s));
      }
      std::stable_sort(user.sessions.begin(), user.sessions.end(), [](const Session& a, const Session& b) {
        return std::tie(a.start, a.id) < std::tie(b.start, b.id);
      });
    }
    if (auto it = raw_purchases.find(id); it != raw_purchases.end()) {
      for (const auto& [t, items] : it->second) {
        user.purchases.push_back({t, std::vector<std::uint32_t>(items.begin(), items.end())});
      }
    }
    if (auto it = raw_profiles.find(id); it != raw_profiles.end()) {
      user.profile = it->second;
      user.has_profile = true;
    } else {
      user.profile.demographics.assign(kDemographicFields.size(), 0.0);
      user.profile.portfolio.assign(catalog.size(), 0);
    }
    data.users.push_back(std::move(user));
  }

  if (data.session_count() == 0) throw DataError("empty dataset: no valid events");
  if (report.rejected_events + report.rejected_purchases + report.rejected_profiles > 0) {
    spdlog::warn("ingest rejected {} event, {} purchase and {} profile rows", report.rejected_events,
                 report.rejected_purchases, report.rejected_profiles);
  }
  return data;
}

Dataset ingest(const DataFiles& files) {
  auto open = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw DataError("cannot read " + p.string());
    return in;
  };
  auto events = open(files.events);
  auto purchases = open(files.purchases);
  auto profiles = open(files.profiles);
  auto catalog = open(files.catalog);
  return ingest(events, purchases, profiles, catalog);
}

void rebuild_vocabulary(Dataset& data) {
  const ActionVocabulary& old = data.vocab;
  std::map<std::string, std::size_t> sections, objects, types;
  for (const auto& u : data.users)
    for (const auto& s : u.sessions)
      for (const auto& a : s.actions) {
        ++sections[old.sections()[a.section]];
        ++objects[old.objects()[a.object]];
        ++types[old.types()[a.type]];
      }
  ActionVocabulary fresh = ActionVocabulary::from_counts(sections, objects, types, data.catalog);
  for (auto& u : data.users)
    for (auto& s : u.sessions)
      for (auto& a : s.actions) {
        a = fresh.encode(old.sections()[a.section], old.objects()[a.object], old.types()[a.type], a.time);
      }
  data.vocab = std::move(fresh);
}

std::vector<double> binarize_action(const Action& a, const ActionVocabulary& v) {
  if (a.section >= v.sections().size()) throw DataError("unknown section index " + std::to_string(a.section));
  if (a.object >= v.objects().size()) throw DataError("unknown object index " + std::to_string(a.object));
  if (a.type >= v.types().size()) throw DataError("unknown type index " + std::to_string(a.type));
  std::vector<double> out(v.width(), 0.0);
  out[a.section] = 1.0;
  out[v.object_offset() + a.object] = 1.0;
  out[v.type_offset() + a.type] = 1.0;
  return out;
}

std::vector<bool> eligibility_mask(const std::vector<int>& portfolio, const Catalog& catalog) {
  std::vector<bool> mask(catalog.size(), true);
  for (std::size_t k = 0; k < catalog.size(); ++k) {
    if (auto base = catalog.base_of[k]) {
      mask[k] = *base < portfolio.size() && portfolio[*base] >= 1;
    }
  }
  return mask;
}

std::vector<int> portfolio_at(const User& user, TimePoint time, std::size_t n_items) {
  std::vector<int> p = user.profile.portfolio;
  p.resize(n_items, 0);
  for (const auto& e : user.purchases) {
    if (e.time >= time) break;
    for (auto k : e.items) ++p[k];
  }
  return p;
}

std::vector<double> demographic_features(const User& user, TimePoint time, std::size_t n_items) {
  if (!user.has_profile) throw DataError("profile required");
  std::vector<double> out = user.profile.demographics;
  for (int c : portfolio_at(user, time, n_items)) out.push_back(static_cast<double>(c));
  return out;
}

CensoredLabels build_censored_labels(const std::vector<TimePoint>& step_times,
                                     const std::vector<PurchaseEvent>& purchases, TimePoint training_end,
                                     std::size_t n_items) {
  CensoredLabels labels;
  for (TimePoint start : step_times) {
    if (start > training_end) throw DataError("training end precedes a session start");
    std::vector<double> y(n_items, static_cast<double>(whole_days(start, training_end)));
    std::vector<double> u(n_items, 0.0);
    for (const auto& e : purchases) {
      if (e.time <= start || e.time > training_end) continue;
      for (auto k : e.items) {
        if (u[k] == 0.0) {
          u[k] = 1.0;
          y[k] = static_cast<double>(whole_days(start, e.time));
        }
      }
    }
    labels.y.push_back(std::move(y));
    labels.u.push_back(std::move(u));
  }
  return labels;
}

}  // namespace crossrec::dataio
