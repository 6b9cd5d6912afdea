#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crossrec/encoders/encoders.hpp"
#include "crossrec/numcore/layers.hpp"
#include "crossrec/numcore/optim.hpp"
#include "crossrec/numcore/scaler.hpp"
#include "crossrec/prep/prep.hpp"
#include "crossrec/recommender.hpp"

namespace crossrec::recmodels {

using encoders::EncoderKind;
using encoders::TaskInput;
using numcore::Mat;
using numcore::Tape;
using numcore::Var;

enum class HeadKind { bce, weibull, attention };

std::string_view to_string(HeadKind kind);
HeadKind parse_head_kind(std::string_view name);

// Binary cross-entropy summed over items, predictions clamped to
// [1e-12, 1 - 1e-12].
double loss_bce(std::span<const double> p_hat, std::span<const double> p);

// alpha = exp(o1), beta = sigmoid(o2).
std::pair<double, double> weibull_activation(double o1, double o2);

// Discrete Weibull with 0^beta = 0. The tail accepts y = -1 (tail = 1).
double weibull_pmf(double y, double alpha, double beta);
double weibull_tail(double y, double alpha, double beta);

// -sum_k [u log pmf(y) + (1 - u) log tail(y)], log arguments >= 1e-12.
double loss_censored_weibull(std::span<const double> alpha, std::span<const double> beta,
                             std::span<const double> y, std::span<const double> u);

// Continuous Weibull median alpha * ln(2)^(1 / beta).
double weibull_median(double alpha, double beta);
// Negative medians.
std::vector<double> weibull_score(std::span<const double> alpha, std::span<const double> beta);

// Taped losses. bce_loss takes probabilities (1 x K); weibull_loss takes
// the raw outputs o1, o2 (T x K) and averages the per-step sums over T.
Var bce_loss(Tape& tape, Var probs, const Mat& target);
Var weibull_loss(Tape& tape, Var o1, Var o2, const Mat& y, const Mat& u);

struct ModelConfig {
  EncoderKind encoder = EncoderKind::encode;
  HeadKind head = HeadKind::bce;
  bool hybrid = false;
  std::size_t demographic_units = 32;
  numcore::TrainConfig train{};
  encoders::AutoencoderConfig autoencoder{};

  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Training/validation targets for one task.
struct Targets {
  Mat purchased;  // 1 x K, BCE and attention heads
  Mat y, u;       // T x K, Weibull head
};

// GRU over the encoded steps, then either the final state (bce), every
// state (weibull) or an additive-attention context (attention); dropout,
// a dense ReLU layer (merged with a demographic branch in the hybrid) and
// the output layer(s).
class CrossSessionsModel : public Recommender {
 public:
  struct Graph {
    Var probs{};    // 1 x K (bce, attention)
    Var o1{}, o2{}; // T x K (weibull)
    Var lambda{};   // 1 x T (attention)
  };

  static CrossSessionsModel create(const ModelConfig& cfg, encoders::TaskEncoder encoder, dataio::Catalog catalog,
                                   std::optional<numcore::Standardizer> scaler);

  const ModelConfig& config() const { return cfg_; }
  const encoders::TaskEncoder& task_encoder() const { return encoder_; }
  const dataio::Catalog& catalog() const { return catalog_; }
  numcore::ParamSet& params() { return params_; }
  const numcore::ParamSet& params() const { return params_; }
  std::size_t n_items() const { return catalog_.size(); }

  // Uses the first `steps` rows of the input (all when 0).
  Graph forward(Tape& tape, const TaskInput& in, const Mat* demographics, numcore::Rng* dropout_rng,
                std::size_t steps = 0) const;
  Var loss(Tape& tape, const TaskInput& in, const Targets& targets, const Mat* demographics,
           numcore::Rng* dropout_rng) const;

  // Item scores from the final step: probabilities or negative medians.
  std::vector<double> predict(const TaskInput& in, const Mat* demographics) const;
  // Scores after each session of the input.
  std::vector<std::vector<double>> predict_steps(const TaskInput& in, const Mat* demographics) const;
  // Attention weights over the input's steps.
  std::vector<double> attention(const TaskInput& in, const Mat* demographics) const;

  // Standardised demographic input for the hybrid model, empty otherwise.
  std::optional<Mat> demographics_for(const dataio::User& user, const segmentation::Task& task) const;

  std::string name() const override;
  std::vector<double> score(const dataio::Dataset& data, const segmentation::Task& task) const override;
  std::vector<std::vector<double>> score_steps(const dataio::Dataset& data,
                                               const segmentation::Task& task) const override;
  nlohmann::json checkpoint() const override;
  static std::unique_ptr<CrossSessionsModel> from_checkpoint(const nlohmann::json& j);

 private:
  CrossSessionsModel(ModelConfig cfg, encoders::TaskEncoder encoder, dataio::Catalog catalog)
      : cfg_(std::move(cfg)), encoder_(std::move(encoder)), catalog_(std::move(catalog)) {}

  std::vector<double> scores_from(const Graph& g, const Tape& tape, std::size_t row) const;

  ModelConfig cfg_;
  encoders::TaskEncoder encoder_;
  dataio::Catalog catalog_;
  std::optional<numcore::Standardizer> scaler_;
  numcore::ParamSet params_;
  numcore::GruLayer gru_;
  std::size_t attn_W_ = 0, attn_v_ = 0;
  numcore::DenseLayer demographic_, hidden_, out_, out_beta_;
};

inline constexpr std::string_view kCrossSessionsKind = "cross-sessions";

struct CrossSessionsFit {
  std::unique_ptr<CrossSessionsModel> model;
  numcore::TrainHistory history;
  std::optional<numcore::TrainHistory> autoencoder_history;
};

// Trains the autoencoder first when the encoder is "auto". Weibull labels
// are censored at the latest purchase of the respective split.
CrossSessionsFit train_cross_sessions(const prep::PreparedData& prepared, const ModelConfig& cfg);

// Mean attention weight per session position, grouped by the number of
// sessions in the task. Rows sum to one.
std::map<std::size_t, std::vector<double>> extract_attention(const CrossSessionsModel& model,
                                                             const dataio::Dataset& data,
                                                             const std::vector<segmentation::Task>& tasks);

}  // namespace crossrec::recmodels
