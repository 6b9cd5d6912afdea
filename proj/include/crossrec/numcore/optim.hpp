#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "crossrec/numcore/tape.hpp"

namespace crossrec::numcore {

// TensorFlow/Keras default Adam settings.
struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

// Adam with the bias correction folded into the step size:
//   lr_t = lr * sqrt(1 - beta2^t) / (1 - beta1^t)
//   theta -= lr_t * m / (sqrt(v) + eps)
class Adam {
 public:
  Adam(const ParamSet& params, AdamConfig config = {});

  void step(ParamSet& params, const Gradients& grads);
  std::uint64_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t hidden_units = 64;
  double dropout_rate = 0.3;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
  std::uint64_t seed = 42;
  AdamConfig adam{};

  void validate() const;
};

// Tracks the best validation loss. With patience p, training stops once
// p + 1 consecutive epochs fail to improve on the best loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Records one epoch; returns true when it is a new best.
  bool update(double validation_loss);
  bool should_stop() const { return since_best_ > patience_; }
  // 1-based epoch of the best loss, 0 before any update.
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

enum class Split { train, validation };

// Builds the scalar loss of one sample on a fresh tape. dropout_rng is
// null for validation (inference mode).
using LossBuilder = std::function<Var(Tape& tape, Split split, std::size_t index, Rng* dropout_rng)>;

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::size_t best_epoch = 0;
  double initial_train_loss = 0.0;
};

// Mini-batch Adam training with early stopping on validation loss. The
// parameters are left at the snapshot of the best validation epoch. Batch
// loss is the mean of per-sample losses; sample order is shuffled per epoch
// from the seed so runs are bit-reproducible.
TrainHistory fit(ParamSet& params, const LossBuilder& loss, std::size_t n_train,
                 std::size_t n_validation, const TrainConfig& config);

// Mean loss over a split in inference mode.
double evaluate_loss(const ParamSet& params, const LossBuilder& loss, Split split, std::size_t n);

}  // namespace crossrec::numcore
