#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "crossrec/dataio/dataset.hpp"
#include "crossrec/numcore/tape.hpp"
#include "crossrec/prep/prep.hpp"
#include "crossrec/recmodels/recmodels.hpp"
#include "crossrec/synth/synth.hpp"

namespace crossrec::fixtures {

inline dataio::Dataset ingest_strings(const std::string& events, const std::string& purchases,
                                      const std::string& profiles, const std::string& catalog) {
  std::istringstream e(events), p(purchases), f(profiles), c(catalog);
  return dataio::ingest(e, p, f, c);
}

inline dataio::Dataset ingest_synth(const synth::SynthData& s) {
  return ingest_strings(s.events, s.purchases, s.profiles, s.catalog);
}

// Planted item of every purchase event keyed by (user id, purchase time).
inline std::map<std::pair<std::string, dataio::TimePoint>, std::uint32_t> planted_items(const synth::SynthData& s,
                                                                                        const dataio::Dataset& raw) {
  std::map<std::pair<std::string, dataio::TimePoint>, std::uint32_t> out;
  std::size_t i = 0;
  for (const auto& u : raw.users)
    for (const auto& p : u.purchases) out[{u.id, p.time}] = s.planted.at(i++);
  return out;
}

inline prep::PreparedData synth_prepared(const synth::SynthConfig& cfg, const prep::PrepConfig& p = {}) {
  return prep::prepare(ingest_synth(synth::generate(cfg)), p);
}

inline double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({1.0, std::abs(a), std::abs(n)});
}

// Largest relative error between the analytic gradients and central
// differences of `loss` over every scalar of every parameter.
inline double max_gradient_error(numcore::ParamSet& params, const numcore::Gradients& analytic,
                                 const std::function<double()>& loss, double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& value = params[i].value;
    for (Eigen::Index k = 0; k < value.size(); ++k) {
      const double keep = value.data()[k];
      value.data()[k] = keep + h;
      const double up = loss();
      value.data()[k] = keep - h;
      const double down = loss();
      value.data()[k] = keep;
      worst = std::max(worst, relative_error(analytic[i].data()[k], (up - down) / (2 * h)));
    }
  }
  return worst;
}

}  // namespace crossrec::fixtures

namespace crossrec::fixtures {

// A two-task micro-batch over a 3-item catalog for gradient checks.
struct Micro {
  dataio::Catalog catalog;
  dataio::ActionVocabulary vocab;
  std::vector<encoders::TaskInput> inputs;
  std::vector<recmodels::Targets> targets;
  std::vector<numcore::Mat> demographics;
  numcore::Standardizer scaler;
};

inline Micro micro_batch(std::uint64_t seed = 3) {
  Micro m;
  m.catalog.items = {"A", "B", "C"};
  m.catalog.base_of = {std::nullopt, std::nullopt, 0U};
  m.vocab = dataio::ActionVocabulary::from_counts({{"shop", 2}, {"home", 1}},
                                                  {{"item:A", 3}, {"item:B", 2}, {"none", 1}},
                                                  {{"start", 2}, {"act", 1}}, m.catalog);
  numcore::Rng rng(seed);
  std::bernoulli_distribution bit(0.4);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t steps[] = {2, 3};
  for (std::size_t t = 0; t < 2; ++t) {
    encoders::TaskInput in;
    in.steps = numcore::Mat(static_cast<Eigen::Index>(steps[t]), static_cast<Eigen::Index>(m.vocab.width()));
    for (Eigen::Index i = 0; i < in.steps.size(); ++i) in.steps.data()[i] = bit(rng) ? 1.0 : 0.0;
    for (std::size_t s = 0; s < steps[t]; ++s) in.session_end.push_back(s);
    m.inputs.push_back(in);

    recmodels::Targets tg;
    tg.purchased = numcore::Mat::Zero(1, 3);
    tg.purchased(0, t) = 1.0;
    tg.y = numcore::Mat(static_cast<Eigen::Index>(steps[t]), 3);
    tg.u = numcore::Mat(static_cast<Eigen::Index>(steps[t]), 3);
    for (Eigen::Index r = 0; r < tg.y.rows(); ++r)
      for (Eigen::Index k = 0; k < 3; ++k) {
        tg.u(r, k) = (k == static_cast<Eigen::Index>(t)) ? 1.0 : 0.0;
        tg.y(r, k) = static_cast<double>((r + 1) * (k + 2));
      }
    tg.y(0, 2) = 0.0;
    m.targets.push_back(tg);
  }
  std::vector<std::vector<double>> rows(4, std::vector<double>(10));
  for (auto& r : rows)
    for (auto& v : r) v = normal(rng);
  m.scaler = numcore::Standardizer::fit(rows);
  for (std::size_t t = 0; t < 2; ++t) m.demographics.push_back(m.scaler.transform(rows[t]));
  return m;
}

inline recmodels::CrossSessionsModel micro_model(const Micro& m, recmodels::HeadKind head, bool hybrid,
                                                 std::size_t hidden = 3) {
  recmodels::ModelConfig cfg;
  cfg.head = head;
  cfg.hybrid = hybrid;
  cfg.demographic_units = 3;
  cfg.train.hidden_units = hidden;
  cfg.train.dropout_rate = 0.3;
  cfg.train.seed = 17;
  return recmodels::CrossSessionsModel::create(cfg, encoders::TaskEncoder(encoders::EncoderKind::encode, m.vocab),
                                               m.catalog, hybrid ? std::optional(m.scaler) : std::nullopt);
}

// Max relative gradient error of the mean micro-batch loss. Dropout masks
// are redrawn from the same seed on every evaluation.
inline double micro_gradient_error(recmodels::CrossSessionsModel& model, const Micro& m) {
  const bool hybrid = model.config().hybrid;
  auto build = [&](numcore::Tape& tape) {
    std::vector<numcore::Var> losses;
    for (std::size_t t = 0; t < m.inputs.size(); ++t) {
      numcore::Rng drop(numcore::mix_seed(99, t));
      losses.push_back(model.loss(tape, m.inputs[t], m.targets[t], hybrid ? &m.demographics[t] : nullptr, &drop));
    }
    return tape.mean(losses);
  };
  auto value = [&] {
    numcore::Tape tape(&model.params());
    return tape.value(build(tape))(0, 0);
  };
  numcore::Tape tape(&model.params());
  auto grads = model.params().zero_gradients();
  tape.backward(build(tape), grads);
  return max_gradient_error(model.params(), grads, value);
}

}  // namespace crossrec::fixtures
