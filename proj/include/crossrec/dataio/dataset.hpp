#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "crossrec/error.hpp"

namespace crossrec::dataio {

using TimePoint = std::chrono::sys_seconds;
using Seconds = std::chrono::seconds;

inline constexpr std::int64_t kSecondsPerDay = 86400;

// Parses "YYYY-MM-DDTHH:MM:SS" with an optional "Z" or "+hh:mm"/"-hh:mm"
// suffix (a space is accepted in place of "T").
TimePoint parse_timestamp(std::string_view text);
std::string format_timestamp(TimePoint t);

// Whole days from `from` to `to`, floored.
std::int64_t whole_days(TimePoint from, TimePoint to);

// Object strings are "item:<catalog id>", "service:<id>" or "none".
enum class ObjectKind { item, service, none };
ObjectKind object_kind(std::string_view object);
inline constexpr std::string_view kItemPrefix = "item:";
inline constexpr std::string_view kServicePrefix = "service:";
inline constexpr std::string_view kNoObject = "none";

// Category indices refer to the dataset's ActionVocabulary.
struct Action {
  std::uint32_t section = 0;
  std::uint32_t object = 0;
  std::uint32_t type = 0;
  TimePoint time{};

  bool same_category(const Action& o) const {
    return section == o.section && object == o.object && type == o.type;
  }
};

struct Session {
  std::string id;
  TimePoint start{};
  std::vector<Action> actions;
};

struct PurchaseEvent {
  TimePoint time{};
  std::vector<std::uint32_t> items;  // sorted, unique catalog indices
};

struct UserProfile {
  std::vector<double> demographics;  // kDemographicFields order
  std::vector<int> portfolio;        // owned count per catalog item
  std::string gender;                // optional column, empty when absent
};

inline constexpr std::array<std::string_view, 7> kDemographicFields = {
    "age", "employment", "income", "residence", "marital", "children", "education"};

struct Catalog {
  std::vector<std::string> items;
  // Base product index of each coverage item; nullopt for base products.
  std::vector<std::optional<std::uint32_t>> base_of;

  std::size_t size() const { return items.size(); }
  std::optional<std::uint32_t> index_of(std::string_view id) const;
  bool is_coverage(std::uint32_t item) const { return base_of[item].has_value(); }
};

class ActionVocabulary {
 public:
  ActionVocabulary() = default;
  ActionVocabulary(std::vector<std::string> sections, std::vector<std::string> objects,
                   std::vector<std::string> types, const Catalog& catalog);

  // Orders each component by frequency (descending) then id (ascending).
  static ActionVocabulary from_counts(const std::map<std::string, std::size_t>& sections,
                                      const std::map<std::string, std::size_t>& objects,
                                      const std::map<std::string, std::size_t>& types,
                                      const Catalog& catalog);

  const std::vector<std::string>& sections() const { return sections_; }
  const std::vector<std::string>& objects() const { return objects_; }
  const std::vector<std::string>& types() const { return types_; }
  std::size_t width() const { return sections_.size() + objects_.size() + types_.size(); }

  // Throws DataError("unknown section|object|type: <value>").
  Action encode(std::string_view section, std::string_view object, std::string_view type,
                TimePoint time = {}) const;

  std::optional<std::uint32_t> section_index(std::string_view s) const;
  std::optional<std::uint32_t> object_index(std::string_view s) const;
  std::optional<std::uint32_t> type_index(std::string_view s) const;

  // Catalog item referenced by an object, if it is an item object.
  std::optional<std::uint32_t> object_item(std::uint32_t object) const;
  // Object index that refers to a catalog item, if seen in the logs.
  std::optional<std::uint32_t> item_object(std::uint32_t item) const;

  // Offsets of the three one-hot blocks inside a binarised action.
  std::size_t object_offset() const { return sections_.size(); }
  std::size_t type_offset() const { return sections_.size() + objects_.size(); }

 private:
  std::vector<std::string> sections_, objects_, types_;
  std::unordered_map<std::string, std::uint32_t> section_idx_, object_idx_, type_idx_;
  std::vector<std::optional<std::uint32_t>> object_to_item_;
  std::vector<std::optional<std::uint32_t>> item_to_object_;
};

struct User {
  std::string id;
  std::vector<Session> sessions;         // sorted by start
  std::vector<PurchaseEvent> purchases;  // sorted by time
  UserProfile profile;
  bool has_profile = false;
};

struct IngestReport {
  std::size_t event_rows = 0;
  std::size_t purchase_rows = 0;
  std::size_t profile_rows = 0;
  std::size_t rejected_events = 0;
  std::size_t rejected_purchases = 0;
  std::size_t rejected_profiles = 0;
  std::vector<std::string> messages;  // first few rejection reasons
};

struct Dataset {
  Catalog catalog;
  ActionVocabulary vocab;
  std::vector<User> users;  // sorted by id
  IngestReport report;

  std::size_t session_count() const;
  std::size_t action_count() const;
  std::size_t purchase_count() const;
};

struct DataFiles {
  std::filesystem::path events;
  std::filesystem::path purchases;
  std::filesystem::path profiles;
  std::filesystem::path catalog;
};

Catalog read_catalog(std::istream& in);

// Builds a Dataset from the four delimited files. Rows referring to unknown
// items or malformed rows are rejected and counted; an unreadable file or
// an empty result is fatal (DataError).
Dataset ingest(std::istream& events, std::istream& purchases, std::istream& profiles,
               std::istream& catalog);
Dataset ingest(const DataFiles& files);

// Rebuilds the vocabulary from the actions currently present and remaps
// every action; keeps the frequency-desc / id-asc order.
void rebuild_vocabulary(Dataset& data);

// One-hot concatenation [section | object | type]; exactly three ones.
std::vector<double> binarize_action(const Action& a, const ActionVocabulary& v);

// Base products are always eligible; a coverage item is eligible iff the
// portfolio holds at least one of its base product.
std::vector<bool> eligibility_mask(const std::vector<int>& portfolio, const Catalog& catalog);

// Profile portfolio plus every purchase made strictly before `time`.
std::vector<int> portfolio_at(const User& user, TimePoint time, std::size_t n_items);

// Demographic fields followed by the portfolio held at `time`. Throws
// DataError("profile required") for users without a profile row.
std::vector<double> demographic_features(const User& user, TimePoint time, std::size_t n_items);

// Right-censored time-to-purchase labels, one row per step and one column
// per item. y is in whole days; u = 1 when observed.
struct CensoredLabels {
  std::vector<std::vector<double>> y;
  std::vector<std::vector<double>> u;
};

CensoredLabels build_censored_labels(const std::vector<TimePoint>& step_times,
                                     const std::vector<PurchaseEvent>& purchases,
                                     TimePoint training_end, std::size_t n_items);

}  // namespace crossrec::dataio
