#include "crossrec/numcore/optim.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace crossrec::numcore {

Adam::Adam(const ParamSet& params, AdamConfig config) : config_(config) {
  m_ = params.zero_gradients();
  v_ = params.zero_gradients();
}

void Adam::step(ParamSet& params, const Gradients& grads) {
  if (grads.size() != params.size() || m_.size() != params.size()) {
    throw Error("adam: gradient count does not match parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params[i].value.rows() || grads[i].cols() != params[i].value.cols()) {
      throw Error("adam: shape mismatch for " + params[i].name);
    }
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double lr_t = config_.learning_rate * std::sqrt(1.0 - std::pow(config_.beta2, t)) /
                      (1.0 - std::pow(config_.beta1, t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i].cwiseAbs2();
    params[i].value.array() -= lr_t * m_[i].array() / (v_[i].array().sqrt() + config_.epsilon);
  }
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (hidden_units == 0) throw ConfigError("hidden_units must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout_rate must lie in [0, 1)");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
}

bool EarlyStopping::update(double validation_loss) {
  ++epoch_;
  if (validation_loss < best_) {
    best_ = validation_loss;
    best_epoch_ = epoch_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

double evaluate_loss(const ParamSet& params, const LossBuilder& loss, Split split, std::size_t n) {
  if (n == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Tape tape(&params);
    total += tape.value(loss(tape, split, i, nullptr))(0, 0);
  }
  return total / static_cast<double>(n);
}

TrainHistory fit(ParamSet& params, const LossBuilder& loss, std::size_t n_train,
                 std::size_t n_validation, const TrainConfig& config) {
  config.validate();
  if (n_train == 0 || n_validation == 0) throw Error("fit needs non-empty train and validation sets");

  TrainHistory history;
  history.initial_train_loss = evaluate_loss(params, loss, Split::train, n_train);

  Adam adam(params, config.adam);
  EarlyStopping stopper(config.patience);
  ParamSet best = params;
  Rng shuffle_rng(config.seed);
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < n_train; start += config.batch_size) {
      const std::size_t stop = std::min(n_train, start + config.batch_size);
      const double inv = 1.0 / static_cast<double>(stop - start);
      Gradients grads = params.zero_gradients();
      double batch_total = 0.0;
      for (std::size_t j = start; j < stop; ++j) {
        Rng dropout_rng(mix_seed(config.seed, (epoch << 32) ^ order[j]));
        Tape tape(&params);
        Var l = loss(tape, Split::train, order[j], &dropout_rng);
        const double value = tape.value(l)(0, 0);
        if (!std::isfinite(value)) {
          throw NumericError("non-finite training loss at epoch " + std::to_string(epoch + 1) +
                             ", sample " + std::to_string(order[j]));
        }
        batch_total += value;
        tape.backward(l, grads);
      }
      for (auto& g : grads) g *= inv;
      adam.step(params, grads);
      epoch_total += batch_total;
    }
    history.train_loss.push_back(epoch_total / static_cast<double>(n_train));
    const double val = evaluate_loss(params, loss, Split::validation, n_validation);
    if (!std::isfinite(val)) {
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch + 1));
    }
    history.validation_loss.push_back(val);
    spdlog::debug("epoch {}: train {:.6f} validation {:.6f}", epoch + 1, history.train_loss.back(), val);
    if (stopper.update(val)) best = params;
    if (stopper.should_stop()) break;
  }
  history.best_epoch = stopper.best_epoch();
  params = std::move(best);
  return history;
}

}  // namespace crossrec::numcore
