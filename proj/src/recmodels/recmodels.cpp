#include "crossrec/recmodels/recmodels.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "crossrec/numcore/checkpoint.hpp"

namespace crossrec::recmodels {

using numcore::kLogFloor;
using numcore::kPreActivationClamp;
using numcore::stable_sigmoid;

std::string_view to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::bce:
      return "bce";
    case HeadKind::weibull:
      return "weibull";
    case HeadKind::attention:
      return "attention";
  }
  return "bce";
}

HeadKind parse_head_kind(std::string_view name) {
  if (name == "bce") return HeadKind::bce;
  if (name == "weibull") return HeadKind::weibull;
  if (name == "attention") return HeadKind::attention;
  throw ConfigError("unknown head: " + std::string(name));
}

namespace {

constexpr double kProbHigh = 1.0 - 1e-12;

double clamp_prob(double p) { return std::clamp(p, kLogFloor, kProbHigh); }

// (x / alpha)^beta with 0^beta = 0.
double scaled_pow(double x, double alpha, double beta) { return x <= 0.0 ? 0.0 : std::pow(x / alpha, beta); }

}  // namespace

double loss_bce(std::span<const double> p_hat, std::span<const double> p) {
  if (p_hat.size() != p.size()) throw Error("loss_bce: length mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double q = clamp_prob(p_hat[k]);
    total -= p[k] * std::log(q) + (1.0 - p[k]) * std::log(1.0 - q);
  }
  return total;
}

std::pair<double, double> weibull_activation(double o1, double o2) {
  return {std::exp(std::clamp(o1, -kPreActivationClamp, kPreActivationClamp)), stable_sigmoid(o2)};
}

double weibull_pmf(double y, double alpha, double beta) {
  if (y < 0.0) throw Error("weibull_pmf: negative time");
  const double a = scaled_pow(y, alpha, beta);
  const double b = scaled_pow(y + 1.0, alpha, beta);
  return std::exp(-a) * -std::expm1(a - b);
}

double weibull_tail(double y, double alpha, double beta) {
  if (y < -1.0) throw Error("weibull_tail: time below -1");
  return std::exp(-scaled_pow(y + 1.0, alpha, beta));
}

double loss_censored_weibull(std::span<const double> alpha, std::span<const double> beta, std::span<const double> y,
                             std::span<const double> u) {
  const std::size_t n = alpha.size();
  if (beta.size() != n || y.size() != n || u.size() != n) throw Error("loss_censored_weibull: length mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double pmf = std::max(weibull_pmf(y[k], alpha[k], beta[k]), kLogFloor);
    const double tail = std::max(weibull_tail(y[k], alpha[k], beta[k]), kLogFloor);
    total -= u[k] * std::log(pmf) + (1.0 - u[k]) * std::log(tail);
  }
  return total;
}

double weibull_median(double alpha, double beta) { return alpha * std::pow(std::numbers::ln2, 1.0 / beta); }

std::vector<double> weibull_score(std::span<const double> alpha, std::span<const double> beta) {
  if (alpha.size() != beta.size()) throw Error("weibull_score: length mismatch");
  std::vector<double> out(alpha.size());
  for (std::size_t k = 0; k < alpha.size(); ++k) out[k] = -weibull_median(alpha[k], beta[k]);
  return out;
}

Var bce_loss(Tape& tape, Var probs, const Mat& target) {
  const Mat& q = tape.value(probs);
  if (q.rows() != target.rows() || q.cols() != target.cols()) throw Error("bce_loss: shape mismatch");
  Mat out(1, 1);
  out(0, 0) = loss_bce(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())),
                       std::span<const double>(target.data(), static_cast<std::size_t>(target.size())));
  Var parents[] = {probs};
  return tape.custom(parents, std::move(out), [probs, target](Tape& t, Var self) {
    const double g = t.grad(self)(0, 0);
    const Mat& q = t.value(probs);
    Mat& gq = t.grad(probs);
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      const double qi = q.data()[i];
      if (qi < kLogFloor || qi > kProbHigh) continue;
      const double p = target.data()[i];
      gq.data()[i] += g * (-p / qi + (1.0 - p) / (1.0 - qi));
    }
  });
}

Var weibull_loss(Tape& tape, Var o1, Var o2, const Mat& y, const Mat& u) {
  const Mat& O1 = tape.value(o1);
  const Mat& O2 = tape.value(o2);
  if (O1.rows() != O2.rows() || O1.cols() != O2.cols() || y.rows() != O1.rows() || y.cols() != O1.cols() ||
      u.rows() != y.rows() || u.cols() != y.cols()) {
    throw Error("weibull_loss: shape mismatch");
  }
  const Eigen::Index n = O1.size();
  const double inv_steps = 1.0 / static_cast<double>(O1.rows());
  // Per-element derivatives of the loss with respect to o1 and o2.
  Mat d1 = Mat::Zero(O1.rows(), O1.cols());
  Mat d2 = Mat::Zero(O1.rows(), O1.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x1 = O1.data()[i];
    const double x2 = O2.data()[i];
    const auto [alpha, beta] = weibull_activation(x1, x2);
    const double log_alpha = std::log(alpha);
    const double da_alpha = std::abs(x1) <= kPreActivationClamp ? 1.0 : 0.0;
    const double db_beta = std::abs(x2) <= kPreActivationClamp ? beta * (1.0 - beta) : 0.0;
    const double yi = y.data()[i];
    if (yi < 0.0) throw Error("weibull_loss: negative time");
    // a = (y/alpha)^beta, b = ((y+1)/alpha)^beta and their derivatives.
    const double a = scaled_pow(yi, alpha, beta);
    const double b = scaled_pow(yi + 1.0, alpha, beta);
    const double a_o1 = -beta * a * da_alpha;
    const double b_o1 = -beta * b * da_alpha;
    const double a_o2 = yi > 0.0 ? a * (std::log(yi) - log_alpha) * db_beta : 0.0;
    const double b_o2 = b * (std::log(yi + 1.0) - log_alpha) * db_beta;
    if (u.data()[i] > 0.5) {
      const double log_pmf = -a + std::log(-std::expm1(a - b));
      if (log_pmf < std::log(kLogFloor)) {
        total -= std::log(kLogFloor);
      } else {
        total -= log_pmf;
        const double em = std::expm1(b - a);
        d1.data()[i] = a_o1 - (b_o1 - a_o1) / em;
        d2.data()[i] = a_o2 - (b_o2 - a_o2) / em;
      }
    } else {
      if (-b < std::log(kLogFloor)) {
        total -= std::log(kLogFloor);
      } else {
        total += b;
        d1.data()[i] = b_o1;
        d2.data()[i] = b_o2;
      }
    }
  }
  Mat out(1, 1);
  out(0, 0) = total * inv_steps;
  d1 *= inv_steps;
  d2 *= inv_steps;
  Var parents[] = {o1, o2};
  return tape.custom(parents, std::move(out),
                     [o1, o2, d1 = std::move(d1), d2 = std::move(d2)](Tape& t, Var self) {
                       const double g = t.grad(self)(0, 0);
                       t.grad(o1) += g * d1;
                       t.grad(o2) += g * d2;
                     });
}

void ModelConfig::validate() const {
  train.validate();
  if (hybrid && demographic_units == 0) throw ConfigError("demographic_units must be positive");
  if (encoder == EncoderKind::autoenc && autoencoder.units == 0) throw ConfigError("autoencoder units must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"encoder", encoders::to_string(c.encoder)},
       {"head", to_string(c.head)},
       {"hybrid", c.hybrid},
       {"demographic_units", c.demographic_units},
       {"batch_size", c.train.batch_size},
       {"hidden_units", c.train.hidden_units},
       {"dropout", c.train.dropout_rate},
       {"max_epochs", c.train.max_epochs},
       {"patience", c.train.patience},
       {"learning_rate", c.train.adam.learning_rate},
       {"seed", c.train.seed},
       {"autoencoder", c.autoencoder}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.encoder = encoders::parse_encoder_kind(j.value("encoder", std::string(encoders::to_string(c.encoder))));
  c.head = parse_head_kind(j.value("head", std::string(to_string(c.head))));
  c.hybrid = j.value("hybrid", c.hybrid);
  c.demographic_units = j.value("demographic_units", c.demographic_units);
  c.train.batch_size = j.value("batch_size", c.train.batch_size);
  c.train.hidden_units = j.value("hidden_units", c.train.hidden_units);
  c.train.dropout_rate = j.value("dropout", c.train.dropout_rate);
  c.train.max_epochs = j.value("max_epochs", c.train.max_epochs);
  c.train.patience = j.value("patience", c.train.patience);
  c.train.adam.learning_rate = j.value("learning_rate", c.train.adam.learning_rate);
  c.train.seed = j.value("seed", c.train.seed);
  if (j.contains("autoencoder")) c.autoencoder = j.at("autoencoder").get<encoders::AutoencoderConfig>();
}

CrossSessionsModel CrossSessionsModel::create(const ModelConfig& cfg, encoders::TaskEncoder encoder,
                                              dataio::Catalog catalog, std::optional<numcore::Standardizer> scaler) {
  cfg.validate();
  if (catalog.size() == 0) throw Error("empty catalog");
  if (cfg.hybrid && !scaler) throw ConfigError("hybrid model needs a demographic scaler");
  CrossSessionsModel m(cfg, std::move(encoder), std::move(catalog));
  m.scaler_ = cfg.hybrid ? std::move(scaler) : std::nullopt;
  numcore::Rng rng(cfg.train.seed);
  const std::size_t H = cfg.train.hidden_units;
  const std::size_t K = m.catalog_.size();
  m.gru_ = numcore::GruLayer::create(m.params_, "gru", m.encoder_.width(), H, rng);
  if (cfg.head == HeadKind::attention) {
    m.attn_W_ = m.params_.add("attention/W_a", numcore::glorot_uniform(H, H, rng));
    m.attn_v_ = m.params_.add("attention/v", numcore::glorot_uniform(H, 1, rng));
  }
  std::size_t merged = H;
  if (cfg.hybrid) {
    m.demographic_ = numcore::DenseLayer::create(m.params_, "demographic", m.scaler_->width(), cfg.demographic_units,
                                                 numcore::Activation::relu, rng);
    merged += cfg.demographic_units;
  }
  m.hidden_ = numcore::DenseLayer::create(m.params_, "hidden", merged, H, numcore::Activation::relu, rng);
  m.out_ = numcore::DenseLayer::create(m.params_, "output", H, K, numcore::Activation::identity, rng);
  if (cfg.head == HeadKind::weibull) {
    m.out_beta_ = numcore::DenseLayer::create(m.params_, "output_beta", H, K, numcore::Activation::identity, rng);
  }
  return m;
}

CrossSessionsModel::Graph CrossSessionsModel::forward(Tape& tape, const TaskInput& in, const Mat* demographics,
                                                      numcore::Rng* dropout_rng, std::size_t steps) const {
  if (in.steps.rows() == 0) throw Error("empty input sequence");
  if (steps == 0) steps = static_cast<std::size_t>(in.steps.rows());
  if (steps > static_cast<std::size_t>(in.steps.rows())) throw Error("forward: too many steps requested");
  if (cfg_.hybrid && demographics == nullptr) throw DataError("profile required");

  Graph g;
  const auto states = gru_.run(tape, Mat(in.steps.topRows(static_cast<Eigen::Index>(steps))));
  Var rep{};
  switch (cfg_.head) {
    case HeadKind::bce:
      rep = states.back();
      break;
    case HeadKind::weibull:
      rep = tape.stack_rows(states);
      break;
    case HeadKind::attention: {
      Var hs = tape.stack_rows(states);
      Var e = tape.matmul(tape.tanh(tape.matmul(hs, tape.param(attn_W_))), tape.param(attn_v_));
      g.lambda = tape.softmax_rows(tape.transpose(e));
      rep = tape.matmul(g.lambda, hs);
      break;
    }
  }
  rep = numcore::dropout(tape, rep, cfg_.train.dropout_rate, dropout_rng);
  if (cfg_.hybrid) {
    Var d = demographic_.apply(tape, tape.input(*demographics));
    const Eigen::Index rows = tape.value(rep).rows();
    if (rows > 1) d = tape.matmul(tape.input(Mat::Ones(rows, 1)), d);
    rep = tape.concat_cols(rep, d);
  }
  Var z = hidden_.apply(tape, rep);
  if (cfg_.head == HeadKind::weibull) {
    g.o1 = out_.apply(tape, z);
    g.o2 = out_beta_.apply(tape, z);
  } else {
    g.probs = tape.sigmoid(out_.apply(tape, z));
  }
  return g;
}

Var CrossSessionsModel::loss(Tape& tape, const TaskInput& in, const Targets& targets, const Mat* demographics,
                             numcore::Rng* dropout_rng) const {
  const Graph g = forward(tape, in, demographics, dropout_rng);
  if (cfg_.head == HeadKind::weibull) return weibull_loss(tape, g.o1, g.o2, targets.y, targets.u);
  return bce_loss(tape, g.probs, targets.purchased);
}

std::vector<double> CrossSessionsModel::scores_from(const Graph& g, const Tape& tape, std::size_t row) const {
  if (cfg_.head != HeadKind::weibull) return numcore::to_vector(tape.value(g.probs));
  const auto r = static_cast<Eigen::Index>(row);
  const Mat& o1 = tape.value(g.o1);
  const Mat& o2 = tape.value(g.o2);
  std::vector<double> out(n_items());
  for (Eigen::Index k = 0; k < o1.cols(); ++k) {
    const auto [alpha, beta] = weibull_activation(o1(r, k), o2(r, k));
    out[static_cast<std::size_t>(k)] = -weibull_median(alpha, beta);
  }
  return out;
}

std::vector<double> CrossSessionsModel::predict(const TaskInput& in, const Mat* demographics) const {
  Tape tape(&params_);
  const Graph g = forward(tape, in, demographics, nullptr);
  return scores_from(g, tape, static_cast<std::size_t>(in.steps.rows()) - 1);
}

std::vector<std::vector<double>> CrossSessionsModel::predict_steps(const TaskInput& in,
                                                                   const Mat* demographics) const {
  std::vector<std::vector<double>> out;
  if (cfg_.head == HeadKind::weibull) {
    // The Weibull head emits a prediction at every step natively.
    Tape tape(&params_);
    const Graph g = forward(tape, in, demographics, nullptr);
    for (auto end : in.session_end) out.push_back(scores_from(g, tape, end));
    return out;
  }
  for (auto end : in.session_end) {
    Tape tape(&params_);
    const Graph g = forward(tape, in, demographics, nullptr, end + 1);
    out.push_back(scores_from(g, tape, end));
  }
  return out;
}

std::vector<double> CrossSessionsModel::attention(const TaskInput& in, const Mat* demographics) const {
  if (cfg_.head != HeadKind::attention) throw Error("model has no attention head");
  Tape tape(&params_);
  const Graph g = forward(tape, in, demographics, nullptr);
  return numcore::to_vector(tape.value(g.lambda));
}

std::optional<Mat> CrossSessionsModel::demographics_for(const dataio::User& user,
                                                        const segmentation::Task& task) const {
  if (!cfg_.hybrid) return std::nullopt;
  return scaler_->transform(dataio::demographic_features(user, task.purchase_time, n_items()));
}

std::string CrossSessionsModel::name() const {
  std::string n = std::string(encoders::to_string(cfg_.encoder)) + "-" + std::string(to_string(cfg_.head));
  if (cfg_.hybrid) n += "-hybrid";
  return n;
}

std::vector<double> CrossSessionsModel::score(const dataio::Dataset& data, const segmentation::Task& task) const {
  const auto& user = data.users.at(task.user);
  const auto in = encoder_.encode(encoder_.coder(data.vocab), user, task);
  const auto demo = demographics_for(user, task);
  return predict(in, demo ? &*demo : nullptr);
}

std::vector<std::vector<double>> CrossSessionsModel::score_steps(const dataio::Dataset& data,
                                                                 const segmentation::Task& task) const {
  const auto& user = data.users.at(task.user);
  const auto in = encoder_.encode(encoder_.coder(data.vocab), user, task);
  const auto demo = demographics_for(user, task);
  return predict_steps(in, demo ? &*demo : nullptr);
}

nlohmann::json CrossSessionsModel::checkpoint() const {
  nlohmann::json meta = {{"config", cfg_},
                         {"encoder", encoders::to_string(cfg_.encoder)},
                         {"head", to_string(cfg_.head)},
                         {"catalog", catalog_.items},
                         {"vocab", encoders::vocab_to_json(encoder_.vocab())}};
  nlohmann::json base = nlohmann::json::array();
  for (const auto& b : catalog_.base_of) base.push_back(b ? nlohmann::json(*b) : nlohmann::json(nullptr));
  meta["catalog_base"] = base;
  if (scaler_) meta["scaler"] = scaler_->to_json();
  if (encoder_.autoencoder()) meta["autoencoder"] = encoder_.autoencoder()->to_json();
  return numcore::make_checkpoint(std::string(kCrossSessionsKind), meta, params_);
}

std::unique_ptr<CrossSessionsModel> CrossSessionsModel::from_checkpoint(const nlohmann::json& j) {
  if (j.value("kind", "") != kCrossSessionsKind) throw DataError("not a cross-sessions checkpoint");
  const auto& meta = j.at("meta");
  ModelConfig cfg = meta.at("config").get<ModelConfig>();
  dataio::Catalog catalog;
  catalog.items = meta.at("catalog").get<std::vector<std::string>>();
  for (const auto& b : meta.at("catalog_base")) {
    catalog.base_of.push_back(b.is_null() ? std::nullopt : std::optional<std::uint32_t>(b.get<std::uint32_t>()));
  }
  std::optional<encoders::Autoencoder> ae;
  if (meta.contains("autoencoder")) ae = encoders::Autoencoder::from_json(meta.at("autoencoder"));
  encoders::TaskEncoder enc(cfg.encoder, encoders::vocab_from_json(meta.at("vocab"), catalog), std::move(ae));
  std::optional<numcore::Standardizer> scaler;
  if (meta.contains("scaler")) scaler = numcore::Standardizer::from_json(meta.at("scaler"));
  auto m = std::make_unique<CrossSessionsModel>(create(cfg, std::move(enc), std::move(catalog), std::move(scaler)));
  numcore::assign_params(m->params_, j.at("params"));
  return m;
}

namespace {

struct Sample {
  TaskInput input;
  Targets targets;
  std::optional<Mat> demographics;
};

std::vector<Mat> unique_session_matrices(const prep::PreparedData& p, const std::vector<std::size_t>& idx,
                                         const encoders::ActionCoder& coder) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  std::vector<Mat> out;
  for (auto i : idx) {
    const auto& t = p.tasks[i];
    for (auto s : t.sessions) {
      if (seen.insert({t.user, s}).second) out.push_back(coder.session_matrix(p.data.users[t.user].sessions[s]));
    }
  }
  return out;
}

}  // namespace

CrossSessionsFit train_cross_sessions(const prep::PreparedData& prepared, const ModelConfig& cfg) {
  cfg.validate();
  const auto& data = prepared.data;
  const std::size_t K = data.catalog.size();
  CrossSessionsFit out;

  std::optional<encoders::Autoencoder> ae;
  if (cfg.encoder == EncoderKind::autoenc) {
    const encoders::ActionCoder self_coder(data.vocab, data.vocab);
    auto fit = encoders::fit_autoencoder(unique_session_matrices(prepared, prepared.split.train, self_coder),
                                         unique_session_matrices(prepared, prepared.split.validation, self_coder),
                                         data.vocab, cfg.autoencoder);
    ae = std::move(fit.model);
    out.autoencoder_history = std::move(fit.history);
  }
  encoders::TaskEncoder enc(cfg.encoder, data.vocab, std::move(ae));
  const auto coder = enc.coder(data.vocab);

  std::optional<numcore::Standardizer> scaler;
  if (cfg.hybrid) {
    std::vector<std::vector<double>> rows;
    for (auto i : prepared.split.train) {
      const auto& t = prepared.tasks[i];
      rows.push_back(dataio::demographic_features(data.users[t.user], t.purchase_time, K));
    }
    scaler = numcore::Standardizer::fit(rows);
  }
  auto model = std::make_unique<CrossSessionsModel>(CrossSessionsModel::create(cfg, enc, data.catalog, scaler));

  auto build = [&](const std::vector<std::size_t>& idx) {
    const dataio::TimePoint end = prepared.period_end(idx);
    std::vector<Sample> samples;
    samples.reserve(idx.size());
    for (auto i : idx) {
      const auto& t = prepared.tasks[i];
      const auto& user = data.users[t.user];
      Sample s;
      s.input = enc.encode(coder, user, t);
      s.targets.purchased = Mat::Zero(1, static_cast<Eigen::Index>(K));
      for (auto k : user.purchases[t.purchase].items) s.targets.purchased(0, k) = 1.0;
      if (cfg.head == HeadKind::weibull) {
        // Steps after the purchase (possible for action-level steps) are
        // measured from just before it.
        std::vector<dataio::TimePoint> times = s.input.step_time;
        for (auto& tp : times) tp = std::min(tp, t.purchase_time - dataio::Seconds(1));
        const auto labels = dataio::build_censored_labels(times, user.purchases, end, K);
        s.targets.y.resize(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(K));
        s.targets.u.resize(s.targets.y.rows(), s.targets.y.cols());
        for (std::size_t r = 0; r < times.size(); ++r)
          for (std::size_t k = 0; k < K; ++k) {
            s.targets.y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = labels.y[r][k];
            s.targets.u(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = labels.u[r][k];
          }
      }
      s.demographics = model->demographics_for(user, t);
      samples.push_back(std::move(s));
    }
    return samples;
  };
  const auto train = build(prepared.split.train);
  const auto validation = build(prepared.split.validation);

  const CrossSessionsModel& m = *model;
  auto loss = [&](Tape& tape, numcore::Split split, std::size_t i, numcore::Rng* rng) {
    const Sample& s = split == numcore::Split::train ? train[i] : validation[i];
    return m.loss(tape, s.input, s.targets, s.demographics ? &*s.demographics : nullptr, rng);
  };
  out.history = numcore::fit(model->params(), loss, train.size(), validation.size(), cfg.train);
  spdlog::info("{}: best epoch {} of {}", model->name(), out.history.best_epoch, out.history.validation_loss.size());
  out.model = std::move(model);
  return out;
}

std::map<std::size_t, std::vector<double>> extract_attention(const CrossSessionsModel& model,
                                                             const dataio::Dataset& data,
                                                             const std::vector<segmentation::Task>& tasks) {
  const auto& enc = model.task_encoder();
  const auto coder = enc.coder(data.vocab);
  std::map<std::size_t, std::vector<double>> sums;
  std::map<std::size_t, std::size_t> counts;
  for (const auto& t : tasks) {
    const auto& user = data.users.at(t.user);
    const auto in = enc.encode(coder, user, t);
    const auto demo = model.demographics_for(user, t);
    const auto lambda = model.attention(in, demo ? &*demo : nullptr);
    const std::size_t n = in.session_end.size();
    auto& row = sums[n];
    row.resize(n, 0.0);
    // Action-level weights are summed per session.
    std::size_t step = 0;
    for (std::size_t s = 0; s < n; ++s) {
      for (; step <= in.session_end[s]; ++step) row[s] += lambda[step];
    }
    ++counts[n];
  }
  for (auto& [n, row] : sums) {
    for (auto& v : row) v /= static_cast<double>(counts[n]);
  }
  return sums;
}

}  // namespace crossrec::recmodels
