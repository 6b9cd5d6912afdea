#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossrec/baselines/baselines.hpp"
#include "crossrec/prep/prep.hpp"
#include "crossrec/recmodels/recmodels.hpp"
#include "crossrec/recommender.hpp"

namespace crossrec::eval {

// Item ids by descending score; ties by ascending item id.
std::vector<std::uint32_t> rank_items(const std::vector<double>& scores);

// Ineligible items get (min over all scores) - 1. When nothing is eligible
// a warning is logged and the scores are returned unchanged.
std::vector<double> apply_post_filter(std::vector<double> scores, const std::vector<bool>& eligible);

struct Metrics {
  double hr = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double mrr = 0.0;
  double ap = 0.0;
};

inline constexpr const char* kMetricNames[] = {"hr", "precision", "recall", "mrr", "map"};
double metric_value(const Metrics& m, std::size_t which);

// Throws when `purchased` is empty or k == 0. Ranks beyond k count as misses.
Metrics metrics_at_k(const std::vector<std::uint32_t>& ranked, const std::vector<std::uint32_t>& purchased,
                     std::size_t k);

struct TaskResult {
  std::string user_id;
  std::uint32_t user = 0;
  std::size_t sessions = 0;
  std::vector<Metrics> at;  // at[c - 1] holds the metrics at cutoff c
};

struct EvalReport {
  std::string model;
  std::size_t k = 3;
  std::size_t max_k = 5;
  std::vector<TaskResult> tasks;

  Metrics mean(std::size_t cutoff) const;
  Metrics mean() const { return mean(k); }
};

// Scores, post-filters and ranks every test task, recording metrics at
// cutoffs 1..max(k, max_k).
EvalReport evaluate(const Recommender& model, const dataio::Dataset& data, const std::vector<segmentation::Task>& test,
                    std::size_t k = 3, std::size_t max_k = 5);

nlohmann::json report_to_json(const EvalReport& r, bool per_task = false);

// CSV rows "metric,cutoff,model,group,value".
struct CsvRow {
  std::string metric;
  std::size_t cutoff;
  std::string model;
  std::string group;
  double value;
};
std::vector<CsvRow> report_rows(const EvalReport& r, const std::string& group = "all");
std::string to_csv(const std::vector<CsvRow>& rows);

struct StepPoint {
  std::size_t step = 0;   // number of sessions used
  std::size_t tasks = 0;  // tasks with at least `step` sessions
  Metrics metrics;
};

// Metrics when only the first j sessions of each task are visible.
std::vector<StepPoint> per_step_curve(const Recommender& model, const dataio::Dataset& data,
                                      const std::vector<segmentation::Task>& test, std::size_t k = 3);

// Model choice shared by training, analyses and the command line.
struct ModelSpec {
  bool baseline = false;
  recmodels::ModelConfig cross;
  baselines::BaselineConfig base;

  std::string label() const;
};

void to_json(nlohmann::json& j, const ModelSpec& s);
void from_json(const nlohmann::json& j, ModelSpec& s);

std::unique_ptr<Recommender> train_model(const prep::PreparedData& prepared, const ModelSpec& spec);
std::unique_ptr<Recommender> load_model(const nlohmann::json& checkpoint);

struct ShuffleResult {
  EvalReport original;
  std::vector<EvalReport> trials;
  Metrics shuffled_mean;
};

// Reorders the sessions of every task with a seeded permutation, retrains
// and evaluates; repeated `trials` times.
ShuffleResult shuffle_study(const prep::PreparedData& prepared, const ModelSpec& spec, std::size_t trials,
                            std::uint64_t seed, std::size_t k = 3);

// Facets: "section:<name>", "object:items", "object:services",
// "type:start", "type:act", "type:complete".
bool action_in_facet(const dataio::Dataset& data, const dataio::Action& a, const std::string& facet);
dataio::Dataset remove_facet(const dataio::Dataset& raw, const std::string& facet);
std::vector<std::string> default_facets(const dataio::Dataset& raw);

struct AblationEntry {
  std::string facet;
  EvalReport report;
  Metrics relative_change;  // (ablated - all) / all, 0 where all == 0
};

struct AblationResult {
  EvalReport all_actions;
  std::vector<AblationEntry> entries;
};

AblationResult ablate_actions(const dataio::Dataset& raw, const prep::PrepConfig& prep_cfg, const ModelSpec& spec,
                              const std::vector<std::string>& facets, std::size_t k = 3);

struct SweepEntry {
  double threshold_days = 0.0;
  double sessions_per_task = 0.0;
  EvalReport report;
};

std::vector<SweepEntry> threshold_sweep(const dataio::Dataset& raw, const prep::PrepConfig& prep_cfg,
                                        const ModelSpec& spec, const std::vector<double>& thresholds,
                                        std::size_t k = 3);

enum class GroupAttribute { age, gender, income };
GroupAttribute parse_group_attribute(std::string_view name);  // "age" | "gender" | "income"

struct GroupEntry {
  std::string group;
  std::size_t tasks = 0;
  double share = 0.0;
  std::vector<Metrics> at;  // per cutoff, as in TaskResult
};

// Age buckets are decades ("30-39"), income is bucketed into deciles 1..10.
std::vector<GroupEntry> group_breakdown(const EvalReport& report, const dataio::Dataset& data, GroupAttribute attribute);
std::string group_of(const dataio::User& user, GroupAttribute attribute);

nlohmann::json metrics_to_json(const Metrics& m);
Metrics relative_change(const Metrics& changed, const Metrics& base);

}  // namespace crossrec::eval
