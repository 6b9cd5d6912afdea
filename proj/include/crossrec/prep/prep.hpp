#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "crossrec/dataio/dataset.hpp"
#include "crossrec/segmentation/segmentation.hpp"

namespace crossrec::prep {

using segmentation::Task;

struct PrepConfig {
  double min_category_freq = 0.001;
  std::size_t min_session_len = 3;
  std::size_t max_session_len = 30;
  std::size_t max_sessions = 7;
  double threshold_days = 10.0;
  double test_fraction = 0.10;
  double validation_fraction = 0.10;

  void validate() const;
};

void to_json(nlohmann::json& j, const PrepConfig& c);
void from_json(const nlohmann::json& j, PrepConfig& c);

struct CleanReport {
  std::size_t removed_sections = 0, removed_objects = 0, removed_types = 0, removed_items = 0;
  std::size_t removed_rare_actions = 0;
  std::size_t removed_duplicate_actions = 0;
  std::size_t removed_purchase_events = 0;
};

struct BoundReport {
  std::size_t dropped_short_sessions = 0;
  std::size_t truncated_sessions = 0;
  std::size_t truncated_actions = 0;
};

// Drops sections, objects, types and items whose relative frequency (on
// the input data) is below min_category_freq, then collapses consecutive
// actions with an identical (section, object, type) triple.
dataio::Dataset clean_actions(const dataio::Dataset& data, const PrepConfig& cfg, CleanReport* report = nullptr);

// Drops sessions shorter than min_session_len and keeps the first
// max_session_len actions of longer ones.
dataio::Dataset bound_sessions(const dataio::Dataset& data, const PrepConfig& cfg, BoundReport* report = nullptr);

// Walks back from the last session, stops at the first gap above the
// threshold and keeps at most max_sessions of the remaining sessions.
Task cap_recency(const Task& task, const dataio::User& user, const PrepConfig& cfg);

struct Split {
  std::vector<std::size_t> train, validation, test;  // indices into the task list
  std::size_t leaky_removed = 0;
};

// Latest test_fraction of tasks (by purchase time, ties by user id) form the
// test set; the validation set is carved from the remainder the same way.
// Earlier tasks sharing a session with a later split are removed.
Split temporal_split(const std::vector<Task>& tasks, const dataio::Dataset& data, const PrepConfig& cfg);

struct DatasetStats {
  std::size_t users = 0, items = 0, purchase_events = 0, sessions = 0, actions = 0;
  double purchases_per_user_mean = 0, purchases_per_user_std = 0;
  double sessions_per_task_mean = 0, sessions_per_task_std = 0;
  double actions_per_session_mean = 0, actions_per_session_std = 0;
};

DatasetStats task_stats(const dataio::Dataset& data, const std::vector<Task>& tasks);
void to_json(nlohmann::json& j, const DatasetStats& s);

struct PrepReport {
  CleanReport clean;
  BoundReport bound;
  std::size_t dropped_purchases = 0;  // no preceding session after bounding
  std::size_t capped_sessions = 0;
  std::size_t leaky_removed = 0;
  DatasetStats stats;
};

nlohmann::json report_to_json(const PrepReport& r);

struct PreparedData {
  dataio::Dataset data;
  std::vector<Task> tasks;
  Split split;
  PrepReport report;
  PrepConfig config;

  std::vector<Task> tasks_of(const std::vector<std::size_t>& idx) const;
  // Latest purchase time among the given tasks.
  dataio::TimePoint period_end(const std::vector<std::size_t>& idx) const;
};

// Segments an already-cleaned dataset into capped tasks.
std::vector<Task> build_tasks(const dataio::Dataset& data, const PrepConfig& cfg, std::size_t* dropped = nullptr,
                              std::size_t* capped = nullptr);

// Full pipeline: clean, bound, segment, cap and split.
PreparedData prepare(const dataio::Dataset& raw, const PrepConfig& cfg);

}  // namespace crossrec::prep
