#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossrec/dataio/dataset.hpp"

namespace crossrec::synth {

struct SynthConfig {
  std::size_t n_users = 5000;
  std::size_t n_items = 16;
  std::size_t n_coverage = 4;  // the last n_coverage items cover items 0..n_coverage-1
  std::size_t n_sections = 6;
  std::size_t n_service_objects = 8;
  double mean_sessions = 2.18;  // per purchase, 1 + geometric
  std::size_t max_sessions = 7;
  double mean_session_length = 10.72;  // 3 + geometric
  std::size_t max_session_length = 30;
  double rho = 0.9;
  double demographic_strength = 0.8;
  double item_action_prob = 0.3;
  double repeat_purchase_prob = 0.2;
  bool last_session_only = false;  // planted views only in the final session of each task
  double short_gap_hours = 1.0;
  double long_gap_days = 30.0;
  std::uint64_t seed = 42;

  void validate() const;
};

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

// File contents in the dataio schema plus the planted item of every
// purchase event, in output order (users by id, purchases by time).
struct SynthData {
  std::string events;
  std::string purchases;
  std::string profiles;
  std::string catalog;
  std::vector<std::uint32_t> planted;
  std::vector<bool> planted_purchase;  // whether the purchase followed the rule
};

SynthData generate(const SynthConfig& cfg);

// Writes events.csv, purchases.csv, profiles.csv and catalog.csv.
dataio::DataFiles write_files(const SynthData& data, const std::filesystem::path& dir);
dataio::DataFiles files_in(const std::filesystem::path& dir);

}  // namespace crossrec::synth
