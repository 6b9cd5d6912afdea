#include "crossrec/baselines/baselines.hpp"

#include <Eigen/SVD>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "crossrec/numcore/checkpoint.hpp"
#include "crossrec/recmodels/recmodels.hpp"

namespace crossrec::baselines {

using nlohmann::json;
using numcore::Tape;
using numcore::Var;

namespace {

json catalog_to_json(const dataio::Catalog& c) {
  json base = json::array();
  for (const auto& b : c.base_of) base.push_back(b ? json(*b) : json(nullptr));
  return {{"items", c.items}, {"base", base}};
}

dataio::Catalog catalog_from_json(const json& j) {
  dataio::Catalog c;
  c.items = j.at("items").get<std::vector<std::string>>();
  for (const auto& b : j.at("base")) {
    c.base_of.push_back(b.is_null() ? std::nullopt : std::optional<std::uint32_t>(b.get<std::uint32_t>()));
  }
  return c;
}

void require_kind(const json& j, std::string_view kind) {
  if (j.value("kind", "") != kind) throw DataError("expected a " + std::string(kind) + " checkpoint");
}

json train_config_json(const numcore::TrainConfig& c) {
  return {{"batch_size", c.batch_size},   {"hidden_units", c.hidden_units}, {"dropout", c.dropout_rate},
          {"max_epochs", c.max_epochs},   {"patience", c.patience},         {"seed", c.seed},
          {"learning_rate", c.adam.learning_rate}};
}

numcore::TrainConfig train_config_from(const json& j, numcore::TrainConfig c) {
  c.batch_size = j.value("batch_size", c.batch_size);
  c.hidden_units = j.value("hidden_units", c.hidden_units);
  c.dropout_rate = j.value("dropout", c.dropout_rate);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
  return c;
}

}  // namespace

std::vector<double> static_rank(StaticMode mode, const std::vector<std::size_t>& counts, numcore::Rng& rng) {
  std::vector<double> scores(counts.size());
  if (mode == StaticMode::popular) {
    for (std::size_t k = 0; k < counts.size(); ++k) scores[k] = static_cast<double>(counts[k]);
    return scores;
  }
  std::iota(scores.begin(), scores.end(), 0.0);
  std::shuffle(scores.begin(), scores.end(), rng);
  return scores;
}

std::vector<std::size_t> purchase_counts(const prep::PreparedData& p, const std::vector<std::size_t>& tasks) {
  std::vector<std::size_t> counts(p.data.catalog.size(), 0);
  for (auto i : tasks) {
    const auto& t = p.tasks[i];
    for (auto k : p.data.users[t.user].purchases[t.purchase].items) ++counts[k];
  }
  return counts;
}

StaticRanker StaticRanker::popular(std::vector<std::size_t> counts) {
  StaticRanker r;
  r.mode_ = StaticMode::popular;
  r.n_items_ = counts.size();
  r.counts_ = std::move(counts);
  return r;
}

StaticRanker StaticRanker::random(std::size_t n_items, std::uint64_t seed) {
  StaticRanker r;
  r.mode_ = StaticMode::random;
  r.n_items_ = n_items;
  r.counts_.assign(n_items, 0);
  r.seed_ = seed;
  return r;
}

std::vector<double> StaticRanker::score(const dataio::Dataset&, const segmentation::Task& task) const {
  numcore::Rng rng(numcore::mix_seed(seed_, (static_cast<std::uint64_t>(task.user) << 32) ^ task.purchase));
  return static_rank(mode_, counts_, rng);
}

json StaticRanker::checkpoint() const {
  json meta = {{"mode", name()}, {"counts", counts_}, {"seed", seed_}};
  return numcore::make_checkpoint("static", meta, numcore::ParamSet{});
}

std::unique_ptr<StaticRanker> StaticRanker::from_checkpoint(const json& j) {
  require_kind(j, "static");
  const auto& meta = j.at("meta");
  auto counts = meta.at("counts").get<std::vector<std::size_t>>();
  if (meta.at("mode").get<std::string>() == "random") {
    return std::make_unique<StaticRanker>(random(counts.size(), meta.at("seed").get<std::uint64_t>()));
  }
  return std::make_unique<StaticRanker>(popular(std::move(counts)));
}

SlotLayout SlotLayout::from_counts(const std::vector<std::vector<int>>& portfolios, std::size_t n_items) {
  std::vector<int> max_count(n_items, 0);
  for (const auto& p : portfolios) {
    for (std::size_t k = 0; k < n_items && k < p.size(); ++k) max_count[k] = std::max(max_count[k], p[k]);
  }
  SlotLayout layout;
  layout.column_of.resize(n_items);
  for (std::uint32_t k = 0; k < n_items; ++k) {
    for (int n = 1; n <= max_count[k]; ++n) {
      layout.column_of[k].push_back(layout.columns.size());
      layout.columns.push_back({k, static_cast<std::uint32_t>(n)});
    }
  }
  return layout;
}

std::string SlotLayout::column_name(std::size_t c, const dataio::Catalog& catalog) const {
  return catalog.items.at(columns.at(c).first) + "#" + std::to_string(columns[c].second);
}

Mat SlotLayout::row(const std::vector<int>& portfolio) const {
  Mat r = Mat::Zero(1, static_cast<Eigen::Index>(width()));
  for (std::size_t k = 0; k < column_of.size() && k < portfolio.size(); ++k) {
    const auto owned = std::min<std::size_t>(static_cast<std::size_t>(std::max(portfolio[k], 0)), column_of[k].size());
    for (std::size_t n = 0; n < owned; ++n) r(0, static_cast<Eigen::Index>(column_of[k][n])) = 1.0;
  }
  return r;
}

namespace {

Eigen::BDCSVD<Eigen::MatrixXd> svd_of(const Mat& m) {
  return Eigen::BDCSVD<Eigen::MatrixXd>(Eigen::MatrixXd(m), Eigen::ComputeThinU | Eigen::ComputeThinV);
}

std::size_t clamp_rank(const Eigen::VectorXd& sigma, std::size_t factors) {
  if (factors == 0) throw ConfigError("svd factors must be >= 1");
  std::size_t rank = 0;
  const double tol = sigma.size() > 0 ? sigma(0) * 1e-10 : 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > tol) ++rank;
  return std::min(factors, rank);
}

}  // namespace

Mat truncated_svd_reconstruction(const Mat& m, std::size_t factors) {
  const auto svd = svd_of(m);
  const auto f = static_cast<Eigen::Index>(clamp_rank(svd.singularValues(), factors));
  Mat out = svd.matrixU().leftCols(f) * svd.singularValues().head(f).asDiagonal() * svd.matrixV().leftCols(f).transpose();
  return out;
}

Mat right_singular_vectors(const Mat& m, std::size_t factors) {
  const auto svd = svd_of(m);
  const auto f = static_cast<Eigen::Index>(clamp_rank(svd.singularValues(), factors));
  return svd.matrixV().leftCols(f);
}

SvdModel SvdModel::fit(const std::vector<std::vector<int>>& portfolios, std::size_t n_items, std::size_t factors) {
  if (portfolios.empty()) throw Error("svd: no users");
  SvdModel m;
  m.n_items_ = n_items;
  m.layout_ = SlotLayout::from_counts(portfolios, n_items);
  if (m.layout_.width() == 0) throw Error("svd: no purchases in the matrix");
  Mat M(static_cast<Eigen::Index>(portfolios.size()), static_cast<Eigen::Index>(m.layout_.width()));
  for (std::size_t u = 0; u < portfolios.size(); ++u) M.row(static_cast<Eigen::Index>(u)) = m.layout_.row(portfolios[u]);
  m.V_ = right_singular_vectors(M, factors);
  if (m.V_.cols() == 0) throw Error("svd: matrix has rank zero");
  return m;
}

std::vector<double> SvdModel::score_portfolio(const std::vector<int>& portfolio) const {
  const Mat r = layout_.row(portfolio);
  const Mat rec = (r * V_) * V_.transpose();
  std::vector<double> scores(n_items_, 0.0);
  for (std::size_t k = 0; k < n_items_; ++k) {
    const auto owned = static_cast<std::size_t>(k < portfolio.size() ? std::max(portfolio[k], 0) : 0);
    // Items owned more often than any training user have no free slot.
    if (owned < layout_.column_of[k].size()) scores[k] = rec(0, static_cast<Eigen::Index>(layout_.column_of[k][owned]));
  }
  return scores;
}

std::vector<double> SvdModel::score(const dataio::Dataset& data, const segmentation::Task& task) const {
  return score_portfolio(dataio::portfolio_at(data.users.at(task.user), task.purchase_time, n_items_));
}

json SvdModel::checkpoint() const {
  json cols = json::array();
  for (const auto& [k, n] : layout_.columns) cols.push_back({k, n});
  numcore::ParamSet p;
  p.add("V", V_);
  return numcore::make_checkpoint("svd", {{"n_items", n_items_}, {"columns", cols}}, p);
}

std::unique_ptr<SvdModel> SvdModel::from_checkpoint(const json& j) {
  require_kind(j, "svd");
  auto m = std::make_unique<SvdModel>();
  m->n_items_ = j.at("meta").at("n_items").get<std::size_t>();
  m->layout_.column_of.resize(m->n_items_);
  for (const auto& c : j.at("meta").at("columns")) {
    const auto k = c.at(0).get<std::uint32_t>();
    const auto n = c.at(1).get<std::uint32_t>();
    if (k >= m->n_items_ || n != m->layout_.column_of[k].size() + 1) throw DataError("svd checkpoint: bad slot layout");
    m->layout_.column_of[k].push_back(m->layout_.columns.size());
    m->layout_.columns.push_back({k, n});
  }
  const auto params = numcore::params_from_json(j.at("params"));
  const auto idx = params.find("V");
  if (!idx) throw DataError("svd checkpoint: missing V");
  m->V_ = params[*idx].value;
  if (static_cast<std::size_t>(m->V_.rows()) != m->layout_.width()) throw DataError("svd checkpoint: shape mismatch");
  return m;
}

DemographicModel DemographicModel::create(std::size_t n_items, numcore::Standardizer scaler,
                                          const numcore::TrainConfig& cfg) {
  cfg.validate();
  DemographicModel m;
  m.n_items_ = n_items;
  m.cfg_ = cfg;
  m.scaler_ = std::move(scaler);
  numcore::Rng rng(cfg.seed);
  m.hidden_ = numcore::DenseLayer::create(m.params_, "demo/hidden", m.scaler_.width(), cfg.hidden_units,
                                          numcore::Activation::relu, rng);
  m.out_ = numcore::DenseLayer::create(m.params_, "demo/output", cfg.hidden_units, n_items,
                                       numcore::Activation::sigmoid, rng);
  return m;
}

Var DemographicModel::forward(Tape& tape, const Mat& features, numcore::Rng* dropout_rng) const {
  Var h = numcore::dropout(tape, hidden_.apply(tape, tape.input(features)), cfg_.dropout_rate, dropout_rng);
  return out_.apply(tape, h);
}

std::vector<double> DemographicModel::predict(const Mat& features) const {
  Tape tape(&params_);
  return numcore::to_vector(tape.value(forward(tape, features, nullptr)));
}

std::vector<double> DemographicModel::score(const dataio::Dataset& data, const segmentation::Task& task) const {
  return predict(scaler_.transform(dataio::demographic_features(data.users.at(task.user), task.purchase_time, n_items_)));
}

json DemographicModel::checkpoint() const {
  json meta = {{"n_items", n_items_}, {"train", train_config_json(cfg_)}, {"scaler", scaler_.to_json()}};
  return numcore::make_checkpoint("demographic", meta, params_);
}

std::unique_ptr<DemographicModel> DemographicModel::from_checkpoint(const json& j) {
  require_kind(j, "demographic");
  const auto& meta = j.at("meta");
  auto m = std::make_unique<DemographicModel>(create(meta.at("n_items").get<std::size_t>(),
                                                     numcore::Standardizer::from_json(meta.at("scaler")),
                                                     train_config_from(meta.at("train"), {})));
  numcore::assign_params(m->params_, j.at("params"));
  return m;
}

Gru4Rec Gru4Rec::create(bool concat, dataio::ActionVocabulary vocab, dataio::Catalog catalog,
                        const numcore::TrainConfig& cfg) {
  cfg.validate();
  Gru4Rec m;
  m.concat_ = concat;
  m.cfg_ = cfg;
  m.catalog_ = std::move(catalog);
  m.vocab_ = dataio::ActionVocabulary(vocab.sections(), vocab.objects(), vocab.types(), m.catalog_);
  numcore::Rng rng(cfg.seed);
  m.gru_ = numcore::GruLayer::create(m.params_, "gru4rec/gru", m.vocab_.width(), cfg.hidden_units, rng);
  const std::size_t sizes[3] = {m.vocab_.sections().size(), m.vocab_.objects().size(), m.vocab_.types().size()};
  const char* names[3] = {"gru4rec/section", "gru4rec/object", "gru4rec/type"};
  for (std::size_t h = 0; h < 3; ++h) {
    m.heads_[h] = numcore::DenseLayer::create(m.params_, names[h], cfg.hidden_units, sizes[h],
                                              numcore::Activation::identity, rng);
  }
  return m;
}

Var Gru4Rec::loss(Tape& tape, const Mat& actions, numcore::Rng* dropout_rng) const {
  if (actions.rows() < 2) throw Error("gru4rec: need at least two actions");
  const auto states = gru_.run(tape, Mat(actions.topRows(actions.rows() - 1)));
  Var hs = numcore::dropout(tape, tape.stack_rows(states), cfg_.dropout_rate, dropout_rng);
  const Eigen::Index offsets[3] = {0, static_cast<Eigen::Index>(vocab_.object_offset()),
                                   static_cast<Eigen::Index>(vocab_.type_offset())};
  const Eigen::Index sizes[3] = {static_cast<Eigen::Index>(vocab_.sections().size()),
                                 static_cast<Eigen::Index>(vocab_.objects().size()),
                                 static_cast<Eigen::Index>(vocab_.types().size())};
  Var total{};
  for (std::size_t h = 0; h < 3; ++h) {
    std::vector<std::uint32_t> targets;
    for (Eigen::Index r = 1; r < actions.rows(); ++r) {
      Eigen::Index idx = 0;
      actions.row(r).segment(offsets[h], sizes[h]).maxCoeff(&idx);
      targets.push_back(static_cast<std::uint32_t>(idx));
    }
    Var ce = tape.softmax_cross_entropy_rows(heads_[h].apply(tape, hs), targets);
    total = h == 0 ? ce : tape.add(total, ce);
  }
  return tape.scale(total, 1.0 / static_cast<double>(actions.rows() - 1));
}

std::array<std::vector<double>, 3> Gru4Rec::next_action(const Mat& actions) const {
  if (actions.rows() == 0) throw Error("gru4rec: empty input");
  const auto w = gru_.weights(params_);
  Mat h = Mat::Zero(1, static_cast<Eigen::Index>(gru_.hidden));
  for (Eigen::Index r = 0; r < actions.rows(); ++r) h = numcore::gru_cell(actions.row(r), h, w);
  std::array<std::vector<double>, 3> out;
  for (std::size_t k = 0; k < 3; ++k) {
    out[k] = numcore::to_vector(numcore::dense(h, params_[heads_[k].weight].value, params_[heads_[k].bias].value,
                                               numcore::Activation::softmax));
  }
  return out;
}

std::vector<double> Gru4Rec::item_scores(const Mat& actions) const {
  const auto heads = next_action(actions);
  std::vector<double> scores(catalog_.size(), 0.0);
  for (std::uint32_t k = 0; k < catalog_.size(); ++k) {
    if (auto obj = vocab_.item_object(k)) scores[k] = heads[1][*obj];
  }
  return scores;
}

Mat Gru4Rec::input_of(const encoders::ActionCoder& coder, const dataio::User& user,
                      const segmentation::Task& task) const {
  if (task.sessions.empty()) throw Error("gru4rec: empty input");
  if (!concat_) return coder.session_matrix(user.sessions.at(task.sessions.back()));
  std::vector<Mat> parts;
  for (auto s : task.sessions) parts.push_back(coder.session_matrix(user.sessions.at(s)));
  return encoders::concat_sessions(parts);
}

std::vector<double> Gru4Rec::score(const dataio::Dataset& data, const segmentation::Task& task) const {
  const encoders::ActionCoder coder(vocab_, data.vocab);
  return item_scores(input_of(coder, data.users.at(task.user), task));
}

json Gru4Rec::checkpoint() const {
  json meta = {{"concat", concat_},
               {"train", train_config_json(cfg_)},
               {"vocab", encoders::vocab_to_json(vocab_)},
               {"catalog", catalog_to_json(catalog_)}};
  return numcore::make_checkpoint("gru4rec", meta, params_);
}

std::unique_ptr<Gru4Rec> Gru4Rec::from_checkpoint(const json& j) {
  require_kind(j, "gru4rec");
  const auto& meta = j.at("meta");
  auto catalog = catalog_from_json(meta.at("catalog"));
  auto vocab = encoders::vocab_from_json(meta.at("vocab"), catalog);
  auto m = std::make_unique<Gru4Rec>(create(meta.at("concat").get<bool>(), std::move(vocab), std::move(catalog),
                                            train_config_from(meta.at("train"), {})));
  numcore::assign_params(m->params_, j.at("params"));
  return m;
}

double cosine_binary(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  if (a.empty() || b.empty()) return 0.0;
  std::size_t common = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  return static_cast<double>(common) / std::sqrt(static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

SknnModel::SknnModel(std::vector<NeighborEntry> index, dataio::ActionVocabulary vocab, dataio::Catalog catalog,
                     std::size_t neighbors, double boost, bool additive)
    : index_(std::move(index)),
      vocab_(std::move(vocab)),
      catalog_(std::move(catalog)),
      n_items_(catalog_.size()),
      neighbors_(neighbors),
      boost_(boost),
      additive_(additive) {
  if (neighbors_ == 0) throw ConfigError("sknn neighbors must be >= 1");
  if (boost_ < 0.0) throw ConfigError("sknn boost must be >= 0");
}

std::vector<double> SknnModel::recommend(const std::vector<std::uint32_t>& pooled,
                                         const std::vector<std::uint32_t>& interacted) const {
  std::vector<std::pair<double, std::size_t>> sims;
  sims.reserve(index_.size());
  for (std::size_t i = 0; i < index_.size(); ++i) sims.push_back({cosine_binary(pooled, index_[i].pooled), i});
  const std::size_t k = std::min(neighbors_, sims.size());
  std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(k), sims.end(),
                    [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  std::vector<double> scores(n_items_, 0.0);
  for (std::size_t n = 0; n < k; ++n) {
    for (auto item : index_[sims[n].second].items) scores[item] += sims[n].first;
  }
  if (boost_ > 0.0) {
    for (auto item : interacted) {
      if (item >= n_items_) continue;
      scores[item] = additive_ ? scores[item] + boost_ : scores[item] * (1.0 + boost_);
    }
  }
  return scores;
}

std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> pool_task(const encoders::ActionCoder& coder,
                                                                             const dataio::ActionVocabulary& vocab,
                                                                             const dataio::User& user,
                                                                             const segmentation::Task& task) {
  std::set<std::uint32_t> dims;
  std::set<std::uint32_t> items;
  for (auto s : task.sessions) {
    for (const auto& a : user.sessions.at(s).actions) {
      const auto c = coder.components(a);
      dims.insert(c[0]);
      dims.insert(static_cast<std::uint32_t>(vocab.object_offset()) + c[1]);
      dims.insert(static_cast<std::uint32_t>(vocab.type_offset()) + c[2]);
      if (auto item = vocab.object_item(c[1])) items.insert(*item);
    }
  }
  return {{dims.begin(), dims.end()}, {items.begin(), items.end()}};
}

std::vector<double> SknnModel::score(const dataio::Dataset& data, const segmentation::Task& task) const {
  const encoders::ActionCoder coder(vocab_, data.vocab);
  const auto [pooled, interacted] = pool_task(coder, vocab_, data.users.at(task.user), task);
  return recommend(pooled, interacted);
}

json SknnModel::checkpoint() const {
  json entries = json::array();
  for (const auto& e : index_) entries.push_back({{"pooled", e.pooled}, {"items", e.items}});
  json meta = {{"neighbors", neighbors_},
               {"boost", boost_},
               {"additive", additive_},
               {"vocab", encoders::vocab_to_json(vocab_)},
               {"catalog", catalog_to_json(catalog_)},
               {"index", entries}};
  return numcore::make_checkpoint("sknn", meta, numcore::ParamSet{});
}

std::unique_ptr<SknnModel> SknnModel::from_checkpoint(const json& j) {
  require_kind(j, "sknn");
  const auto& meta = j.at("meta");
  std::vector<NeighborEntry> index;
  for (const auto& e : meta.at("index")) {
    index.push_back({e.at("pooled").get<std::vector<std::uint32_t>>(), e.at("items").get<std::vector<std::uint32_t>>()});
  }
  auto catalog = catalog_from_json(meta.at("catalog"));
  auto vocab = encoders::vocab_from_json(meta.at("vocab"), catalog);
  return std::make_unique<SknnModel>(std::move(index), std::move(vocab), std::move(catalog),
                                     meta.at("neighbors").get<std::size_t>(), meta.at("boost").get<double>(),
                                     meta.at("additive").get<bool>());
}

void BaselineConfig::validate() const {
  static const std::set<std::string> models = {"popular", "random", "svd", "demo", "gru4rec", "gru4rec-concat", "sknn", "sknn-b"};
  if (!models.count(model)) throw ConfigError("unknown baseline model: " + model);
  if (svd_factors == 0) throw ConfigError("svd_factors must be >= 1");
  if (sknn_neighbors == 0) throw ConfigError("sknn_neighbors must be >= 1");
  if (sknn_boost < 0.0) throw ConfigError("sknn_boost must be >= 0");
  demo_train.validate();
  gru4rec_train.validate();
}

void to_json(json& j, const BaselineConfig& c) {
  j = {{"model", c.model},
       {"svd_factors", c.svd_factors},
       {"sknn_neighbors", c.sknn_neighbors},
       {"sknn_boost", c.sknn_boost},
       {"sknn_additive", c.sknn_additive},
       {"demo", train_config_json(c.demo_train)},
       {"gru4rec", train_config_json(c.gru4rec_train)},
       {"seed", c.seed}};
}

void from_json(const json& j, BaselineConfig& c) {
  c.model = j.value("model", c.model);
  c.svd_factors = j.value("svd_factors", c.svd_factors);
  c.sknn_neighbors = j.value("sknn_neighbors", c.sknn_neighbors);
  c.sknn_boost = j.value("sknn_boost", c.sknn_boost);
  c.sknn_additive = j.value("sknn_additive", c.sknn_additive);
  c.seed = j.value("seed", c.seed);
  if (j.contains("demo")) c.demo_train = train_config_from(j.at("demo"), c.demo_train);
  if (j.contains("gru4rec")) c.gru4rec_train = train_config_from(j.at("gru4rec"), c.gru4rec_train);
}

namespace {

std::unique_ptr<Recommender> train_demo(const prep::PreparedData& p, const BaselineConfig& cfg) {
  const std::size_t K = p.data.catalog.size();
  auto features = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::vector<double>> rows;
    for (auto i : idx) {
      const auto& t = p.tasks[i];
      rows.push_back(dataio::demographic_features(p.data.users[t.user], t.purchase_time, K));
    }
    return rows;
  };
  auto targets = [&](const std::vector<std::size_t>& idx) {
    std::vector<Mat> out;
    for (auto i : idx) {
      const auto& t = p.tasks[i];
      Mat m = Mat::Zero(1, static_cast<Eigen::Index>(K));
      for (auto k : p.data.users[t.user].purchases[t.purchase].items) m(0, k) = 1.0;
      out.push_back(std::move(m));
    }
    return out;
  };
  const auto train_rows = features(p.split.train);
  auto model = std::make_unique<DemographicModel>(
      DemographicModel::create(K, numcore::Standardizer::fit(train_rows), cfg.demo_train));
  std::vector<Mat> x_train, x_val;
  for (const auto& r : train_rows) x_train.push_back(model->scaler().transform(r));
  for (const auto& r : features(p.split.validation)) x_val.push_back(model->scaler().transform(r));
  const auto y_train = targets(p.split.train);
  const auto y_val = targets(p.split.validation);
  const DemographicModel& m = *model;
  auto loss = [&](Tape& tape, numcore::Split split, std::size_t i, numcore::Rng* rng) {
    const bool tr = split == numcore::Split::train;
    return recmodels::bce_loss(tape, m.forward(tape, tr ? x_train[i] : x_val[i], rng), tr ? y_train[i] : y_val[i]);
  };
  const auto history = numcore::fit(model->params(), loss, x_train.size(), x_val.size(), cfg.demo_train);
  spdlog::info("demo: best epoch {}", history.best_epoch);
  return model;
}

std::unique_ptr<Recommender> train_gru4rec(const prep::PreparedData& p, const BaselineConfig& cfg, bool concat) {
  auto model = std::make_unique<Gru4Rec>(Gru4Rec::create(concat, p.data.vocab, p.data.catalog, cfg.gru4rec_train));
  const encoders::ActionCoder coder(model->vocab(), p.data.vocab);
  auto inputs = [&](const std::vector<std::size_t>& idx) {
    std::vector<Mat> out;
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (auto i : idx) {
      const auto& t = p.tasks[i];
      const auto& user = p.data.users[t.user];
      if (concat) {
        Mat m = model->input_of(coder, user, t);
        if (m.rows() >= 2) out.push_back(std::move(m));
        continue;
      }
      for (auto s : t.sessions) {
        if (!seen.insert({t.user, s}).second) continue;
        Mat m = coder.session_matrix(user.sessions[s]);
        if (m.rows() >= 2) out.push_back(std::move(m));
      }
    }
    return out;
  };
  const auto train = inputs(p.split.train);
  const auto validation = inputs(p.split.validation);
  if (train.empty() || validation.empty()) throw Error("gru4rec: no sessions with two or more actions");
  const Gru4Rec& m = *model;
  auto loss = [&](Tape& tape, numcore::Split split, std::size_t i, numcore::Rng* rng) {
    return m.loss(tape, split == numcore::Split::train ? train[i] : validation[i], rng);
  };
  const auto history = numcore::fit(model->params(), loss, train.size(), validation.size(), cfg.gru4rec_train);
  spdlog::info("{}: best epoch {}", model->name(), history.best_epoch);
  return model;
}

std::unique_ptr<Recommender> train_sknn(const prep::PreparedData& p, const BaselineConfig& cfg, bool boosted) {
  const encoders::ActionCoder coder(p.data.vocab, p.data.vocab);
  std::vector<NeighborEntry> index;
  for (auto i : p.split.train) {
    const auto& t = p.tasks[i];
    const auto& user = p.data.users[t.user];
    auto [pooled, interacted] = pool_task(coder, p.data.vocab, user, t);
    index.push_back({std::move(pooled), user.purchases[t.purchase].items});
  }
  return std::make_unique<SknnModel>(std::move(index), p.data.vocab, p.data.catalog, cfg.sknn_neighbors,
                                     boosted ? cfg.sknn_boost : 0.0, cfg.sknn_additive);
}

}  // namespace

std::unique_ptr<Recommender> train_baseline(const prep::PreparedData& p, const BaselineConfig& cfg) {
  cfg.validate();
  const std::size_t K = p.data.catalog.size();
  if (cfg.model == "popular") return std::make_unique<StaticRanker>(StaticRanker::popular(purchase_counts(p, p.split.train)));
  if (cfg.model == "random") return std::make_unique<StaticRanker>(StaticRanker::random(K, cfg.seed));
  if (cfg.model == "svd") {
    const auto end = p.period_end(p.split.train) + dataio::Seconds(1);
    std::set<std::uint32_t> users;
    for (auto i : p.split.train) users.insert(p.tasks[i].user);
    std::vector<std::vector<int>> portfolios;
    for (auto u : users) portfolios.push_back(dataio::portfolio_at(p.data.users[u], end, K));
    return std::make_unique<SvdModel>(SvdModel::fit(portfolios, K, cfg.svd_factors));
  }
  if (cfg.model == "demo") return train_demo(p, cfg);
  if (cfg.model == "gru4rec") return train_gru4rec(p, cfg, false);
  if (cfg.model == "gru4rec-concat") return train_gru4rec(p, cfg, true);
  if (cfg.model == "sknn") return train_sknn(p, cfg, false);
  return train_sknn(p, cfg, true);
}

std::unique_ptr<Recommender> load_baseline(const json& checkpoint) {
  const auto kind = checkpoint.value("kind", "");
  if (kind == "static") return StaticRanker::from_checkpoint(checkpoint);
  if (kind == "svd") return SvdModel::from_checkpoint(checkpoint);
  if (kind == "demographic") return DemographicModel::from_checkpoint(checkpoint);
  if (kind == "gru4rec") return Gru4Rec::from_checkpoint(checkpoint);
  if (kind == "sknn") return SknnModel::from_checkpoint(checkpoint);
  throw DataError("unknown baseline checkpoint kind: " + kind);
}

}  // namespace crossrec::baselines
