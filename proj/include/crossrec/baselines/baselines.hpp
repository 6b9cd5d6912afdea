#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crossrec/encoders/encoders.hpp"
#include "crossrec/numcore/layers.hpp"
#include "crossrec/numcore/optim.hpp"
#include "crossrec/numcore/scaler.hpp"
#include "crossrec/prep/prep.hpp"
#include "crossrec/recommender.hpp"

namespace crossrec::baselines {

using numcore::Mat;

enum class StaticMode { random, popular };

// Popular: score = count. Random: a uniform random permutation of 0..K-1.
std::vector<double> static_rank(StaticMode mode, const std::vector<std::size_t>& counts, numcore::Rng& rng);

// Item purchase counts over the given tasks' purchase events.
std::vector<std::size_t> purchase_counts(const prep::PreparedData& p, const std::vector<std::size_t>& tasks);

// Popular ranks every task the same way; random draws a fresh permutation
// per task, seeded from the model seed and the task identity.
class StaticRanker : public Recommender {
 public:
  static StaticRanker popular(std::vector<std::size_t> counts);
  static StaticRanker random(std::size_t n_items, std::uint64_t seed);

  std::string name() const override { return mode_ == StaticMode::popular ? "popular" : "random"; }
  std::vector<double> score(const dataio::Dataset& data, const segmentation::Task& task) const override;
  nlohmann::json checkpoint() const override;
  static std::unique_ptr<StaticRanker> from_checkpoint(const nlohmann::json& j);

 private:
  StaticMode mode_ = StaticMode::popular;
  std::vector<std::size_t> counts_;
  std::size_t n_items_ = 0;
  std::uint64_t seed_ = 0;
};

// Column layout of the user x purchase-slot matrix: the n-th purchase of
// item k lives in column "k#n".
struct SlotLayout {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> columns;  // (item, occurrence), occurrence from 1
  std::vector<std::vector<std::size_t>> column_of;                 // [item][occurrence - 1]

  static SlotLayout from_counts(const std::vector<std::vector<int>>& portfolios, std::size_t n_items);
  std::string column_name(std::size_t c, const dataio::Catalog& catalog) const;
  Mat row(const std::vector<int>& portfolio) const;
  std::size_t width() const { return columns.size(); }
};

// Rank-f reconstruction of m; f is clamped to the numerical rank.
Mat truncated_svd_reconstruction(const Mat& m, std::size_t factors);
// Leading right singular vectors (columns) of m, f clamped to the rank.
Mat right_singular_vectors(const Mat& m, std::size_t factors);

// Pure truncated SVD of the binary user x slot matrix. A user row r is
// folded in as r V Vᵀ and each item is scored by its first unowned slot.
class SvdModel : public Recommender {
 public:
  static SvdModel fit(const std::vector<std::vector<int>>& portfolios, std::size_t n_items, std::size_t factors);

  std::vector<double> score_portfolio(const std::vector<int>& portfolio) const;
  std::size_t factors() const { return static_cast<std::size_t>(V_.cols()); }
  const SlotLayout& layout() const { return layout_; }

  std::string name() const override { return "svd"; }
  std::vector<double> score(const dataio::Dataset& data, const segmentation::Task& task) const override;
  nlohmann::json checkpoint() const override;
  static std::unique_ptr<SvdModel> from_checkpoint(const nlohmann::json& j);

 private:
  SlotLayout layout_;
  Mat V_;
  std::size_t n_items_ = 0;
};

// Feed-forward classifier on demographics and portfolio counts.
class DemographicModel : public Recommender {
 public:
  static DemographicModel create(std::size_t n_items, numcore::Standardizer scaler, const numcore::TrainConfig& cfg);

  numcore::Var forward(numcore::Tape& tape, const Mat& features, numcore::Rng* dropout_rng) const;
  std::vector<double> predict(const Mat& features) const;
  numcore::ParamSet& params() { return params_; }
  const numcore::Standardizer& scaler() const { return scaler_; }

  std::string name() const override { return "demo"; }
  std::vector<double> score(const dataio::Dataset& data, const segmentation::Task& task) const override;
  nlohmann::json checkpoint() const override;
  static std::unique_ptr<DemographicModel> from_checkpoint(const nlohmann::json& j);

 private:
  std::size_t n_items_ = 0;
  numcore::TrainConfig cfg_;
  numcore::Standardizer scaler_;
  numcore::ParamSet params_;
  numcore::DenseLayer hidden_, out_;
};

// Session-based next-action GRU with section, object and type softmax heads.
class Gru4Rec : public Recommender {
 public:
  static Gru4Rec create(bool concat, dataio::ActionVocabulary vocab, dataio::Catalog catalog,
                        const numcore::TrainConfig& cfg);

  // Mean over steps of the summed head cross-entropies for predicting
  // action j + 1 from the state after action j.
  numcore::Var loss(numcore::Tape& tape, const Mat& actions, numcore::Rng* dropout_rng) const;
  // Head distributions after the final action: section, object, type.
  std::array<std::vector<double>, 3> next_action(const Mat& actions) const;
  // The object-head probability of each catalog item (0 when the item has
  // no object in the vocabulary).
  std::vector<double> item_scores(const Mat& actions) const;
  Mat input_of(const encoders::ActionCoder& coder, const dataio::User& user, const segmentation::Task& task) const;

  bool concat() const { return concat_; }
  const dataio::ActionVocabulary& vocab() const { return vocab_; }
  numcore::ParamSet& params() { return params_; }

  std::string name() const override { return concat_ ? "gru4rec-concat" : "gru4rec"; }
  std::vector<double> score(const dataio::Dataset& data, const segmentation::Task& task) const override;
  nlohmann::json checkpoint() const override;
  static std::unique_ptr<Gru4Rec> from_checkpoint(const nlohmann::json& j);

 private:
  bool concat_ = false;
  dataio::ActionVocabulary vocab_;
  dataio::Catalog catalog_;
  numcore::TrainConfig cfg_;
  numcore::ParamSet params_;
  numcore::GruLayer gru_;
  std::array<numcore::DenseLayer, 3> heads_;
};

// Cosine similarity between binary vectors given as sorted index sets.
double cosine_binary(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b);

struct NeighborEntry {
  std::vector<std::uint32_t> pooled;  // active dimensions of the max-pooled action vector
  std::vector<std::uint32_t> items;   // purchased items
};

// Session-based kNN over pooled action sets of whole tasks.
class SknnModel : public Recommender {
 public:
  SknnModel(std::vector<NeighborEntry> index, dataio::ActionVocabulary vocab, dataio::Catalog catalog,
            std::size_t neighbors, double boost, bool additive);

  // Scores for a pooled query; `interacted` lists the items whose object
  // appears in the query sessions.
  std::vector<double> recommend(const std::vector<std::uint32_t>& pooled, const std::vector<std::uint32_t>& interacted) const;

  std::string name() const override { return boost_ > 0.0 ? "sknn-b" : "sknn"; }
  std::vector<double> score(const dataio::Dataset& data, const segmentation::Task& task) const override;
  nlohmann::json checkpoint() const override;
  static std::unique_ptr<SknnModel> from_checkpoint(const nlohmann::json& j);

 private:
  std::vector<NeighborEntry> index_;
  dataio::ActionVocabulary vocab_;
  dataio::Catalog catalog_;
  std::size_t n_items_;
  std::size_t neighbors_;
  double boost_;
  bool additive_;
};

// Active dimensions of the pooled vector and the interacted items of a task.
std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> pool_task(const encoders::ActionCoder& coder,
                                                                             const dataio::ActionVocabulary& vocab,
                                                                             const dataio::User& user,
                                                                             const segmentation::Task& task);

struct BaselineConfig {
  std::string model = "popular";  // popular|random|svd|demo|gru4rec|gru4rec-concat|sknn|sknn-b
  std::size_t svd_factors = 1;
  std::size_t sknn_neighbors = 30;
  double sknn_boost = 0.5;
  bool sknn_additive = false;
  numcore::TrainConfig demo_train{.batch_size = 32, .hidden_units = 32, .dropout_rate = 0.3};
  numcore::TrainConfig gru4rec_train{.batch_size = 32, .hidden_units = 64, .dropout_rate = 0.0};
  std::uint64_t seed = 42;

  void validate() const;
};

void to_json(nlohmann::json& j, const BaselineConfig& c);
void from_json(const nlohmann::json& j, BaselineConfig& c);

std::unique_ptr<Recommender> train_baseline(const prep::PreparedData& prepared, const BaselineConfig& cfg);
std::unique_ptr<Recommender> load_baseline(const nlohmann::json& checkpoint);

}  // namespace crossrec::baselines
