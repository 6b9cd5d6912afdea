#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <cmath>

#include "crossrec/baselines/baselines.hpp"
#include "crossrec/eval/eval.hpp"
#include "crossrec/numcore/optim.hpp"
#include "fixtures.hpp"

using namespace crossrec;
using namespace crossrec::baselines;
using numcore::Mat;

namespace {

const prep::PreparedData& shared_data() {
  static const prep::PreparedData p = [] {
    synth::SynthConfig sc;
    sc.n_users = 1500;
    sc.seed = 11;
    return fixtures::synth_prepared(sc);
  }();
  return p;
}

double hr_of(const Recommender& m) {
  const auto& p = shared_data();
  return eval::evaluate(m, p.data, p.tasks_of(p.split.test)).mean().hr;
}

}  // namespace

TEST(Static, PopularOrdersByCountWithIdTies) {
  numcore::Rng rng(1);
  const auto s = static_rank(StaticMode::popular, {5, 3, 1, 3}, rng);
  EXPECT_EQ(eval::rank_items(s), (std::vector<std::uint32_t>{0, 1, 3, 2}));
}

TEST(Static, RandomTopOneIsUniform) {
  numcore::Rng rng(2);
  const std::size_t K = 8, draws = 10000;
  std::vector<std::size_t> top(K, 0);
  for (std::size_t i = 0; i < draws; ++i) ++top[eval::rank_items(static_rank(StaticMode::random, std::vector<std::size_t>(K, 0), rng))[0]];
  const double p = 1.0 / K, sigma = std::sqrt(draws * p * (1 - p));
  for (auto n : top) EXPECT_NEAR(static_cast<double>(n), draws * p, 3 * sigma);
}

TEST(Svd, FullRankIdentityIsExact) {
  const Mat I = Mat::Identity(2, 2);
  EXPECT_LT((truncated_svd_reconstruction(I, 2) - I).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((truncated_svd_reconstruction(I, 5) - I).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Svd, RankOneMatchesEigenOracle) {
  Mat m(2, 2);
  m << 1, 1, 1, 0;
  // Symmetric: the top singular pair is the eigenpair of largest |lambda|.
  const double l = (1 + std::sqrt(5.0)) / 2;
  Mat v(2, 1);
  v << l, 1;
  v /= v.norm();
  const Mat oracle = l * v * v.transpose();
  EXPECT_LT((truncated_svd_reconstruction(m, 1) - oracle).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Svd, SlotLayoutAndRepeatScoring) {
  const std::vector<std::vector<int>> portfolios = {{2, 0, 1}, {1, 1, 0}, {0, 1, 1}, {2, 1, 0}, {1, 0, 0}};
  const auto layout = SlotLayout::from_counts(portfolios, 3);
  dataio::Catalog cat;
  cat.items = {"A", "B", "C"};
  cat.base_of.assign(3, std::nullopt);
  ASSERT_EQ(layout.width(), 4u);
  EXPECT_EQ(layout.column_name(layout.column_of[0][1], cat), "A#2");

  const auto model = SvdModel::fit(portfolios, 3, 2);
  Mat X(5, 4);
  for (std::size_t u = 0; u < 5; ++u) X.row(static_cast<Eigen::Index>(u)) = layout.row(portfolios[u]);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinV);
  const Eigen::MatrixXd V = svd.matrixV().leftCols(2);
  const std::vector<int> owner{1, 0, 0};
  const Eigen::RowVectorXd r = layout.row(owner);
  const Eigen::RowVectorXd proj = r * V * V.transpose();
  const auto s = model.score_portfolio(owner);
  EXPECT_NEAR(s[0], proj(static_cast<Eigen::Index>(layout.column_of[0][1])), 1e-10);
  EXPECT_NEAR(s[1], proj(static_cast<Eigen::Index>(layout.column_of[1][0])), 1e-10);
  EXPECT_EQ(model.score_portfolio({2, 0, 0})[0], 0.0);
}

TEST(Demographic, ZeroWeightsGiveHalf) {
  const auto scaler = numcore::Standardizer::fit({std::vector<double>(10, 1.0), std::vector<double>(10, 2.0)});
  auto m = DemographicModel::create(3, scaler, {.hidden_units = 4});
  for (auto& p : m.params()) p.value.setZero();
  for (double v : m.predict(scaler.transform(std::vector<double>(10, 1.5)))) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Demographic, BeatsRandomOnCorrelatedData) {
  const auto& p = shared_data();
  BaselineConfig demo;
  demo.model = "demo";
  BaselineConfig rnd;
  rnd.model = "random";
  EXPECT_GE(hr_of(*train_baseline(p, demo)) - hr_of(*train_baseline(p, rnd)), 0.10);
}

TEST(Gru4Rec, HeadsSumToOneAndPlantedItemWins) {
  dataio::Catalog cat;
  cat.items = {"A", "B", "C", "D"};
  cat.base_of.assign(4, std::nullopt);
  const auto vocab = dataio::ActionVocabulary::from_counts(
      {{"shop", 1}, {"home", 1}}, {{"item:A", 1}, {"item:B", 1}, {"item:C", 1}, {"item:D", 1}, {"none", 1}},
      {{"start", 1}, {"act", 1}}, cat);
  auto session = [&](const std::string& item) {
    std::vector<dataio::Action> acts;
    for (int i = 0; i < 3; ++i) {
      acts.push_back(vocab.encode("shop", "item:" + item, "start"));
      acts.push_back(vocab.encode("home", "none", "act"));
    }
    Mat m(static_cast<Eigen::Index>(acts.size()), static_cast<Eigen::Index>(vocab.width()));
    for (std::size_t r = 0; r < acts.size(); ++r) {
      const auto b = dataio::binarize_action(acts[r], vocab);
      for (std::size_t c = 0; c < b.size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = b[c];
    }
    return m;
  };
  std::vector<Mat> sessions;
  for (int rep = 0; rep < 10; ++rep)
    for (const char* item : {"A", "B", "C", "D"}) sessions.push_back(session(item));
  numcore::TrainConfig cfg{.batch_size = 8, .hidden_units = 16, .dropout_rate = 0.0, .max_epochs = 80};
  cfg.adam.learning_rate = 0.02;
  auto model = Gru4Rec::create(false, vocab, cat, cfg);
  numcore::LossBuilder loss = [&](numcore::Tape& t, numcore::Split split, std::size_t i, numcore::Rng* d) {
    return model.loss(t, sessions[split == numcore::Split::train ? i : i % 4], d);
  };
  numcore::fit(model.params(), loss, sessions.size(), 4, cfg);
  for (const char* item : {"A", "B", "C", "D"}) {
    const Mat s = session(item);
    const auto heads = model.next_action(s);
    for (const auto& h : heads) {
      double sum = 0.0;
      for (double v : h) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
    const auto scores = model.item_scores(s);
    EXPECT_EQ(eval::rank_items(scores)[0], static_cast<std::uint32_t>(*cat.index_of(item))) << item;
  }
  EXPECT_ANY_THROW(model.item_scores(Mat(0, static_cast<Eigen::Index>(vocab.width()))));
}

TEST(Sknn, CosineAndNeighbourScores) {
  EXPECT_DOUBLE_EQ(cosine_binary({1, 3, 5}, {1, 3, 5}), 1.0);
  EXPECT_DOUBLE_EQ(cosine_binary({1, 3}, {2, 4}), 0.0);
  EXPECT_DOUBLE_EQ(cosine_binary({}, {2, 4}), 0.0);
  EXPECT_NEAR(cosine_binary({1, 2}, {2, 3, 4}), 1.0 / std::sqrt(6.0), 1e-15);

  dataio::Catalog cat;
  cat.items = {"A", "B", "C"};
  cat.base_of.assign(3, std::nullopt);
  SknnModel one({{{1, 2, 3}, {2}}}, {}, cat, 30, 0.0, false);
  EXPECT_EQ(one.recommend({1, 2, 3}, {}), (std::vector<double>{0, 0, 1}));
  EXPECT_EQ(one.recommend({7, 8}, {}), (std::vector<double>{0, 0, 0}));

  std::vector<NeighborEntry> idx{{{1, 2}, {0}}, {{1, 2, 3}, {1}}, {{9}, {2}}};
  SknnModel top1(idx, {}, cat, 1, 0.0, false);
  EXPECT_EQ(top1.recommend({1, 2}, {}), (std::vector<double>{1, 0, 0}));
  SknnModel boosted(idx, {}, cat, 2, 0.5, false);
  const auto s = boosted.recommend({1, 2}, {1});
  EXPECT_NEAR(s[1], 1.5 * 2.0 / std::sqrt(6.0), 1e-15);
  EXPECT_NEAR(s[0], 1.0, 1e-15);
  EXPECT_EQ(boosted.name(), "sknn-b");
}

TEST(BaselineConfig, JsonAndValidation) {
  BaselineConfig c;
  c.model = "sknn-b";
  c.sknn_neighbors = 12;
  const auto back = nlohmann::json(c).get<BaselineConfig>();
  EXPECT_EQ(back.model, "sknn-b");
  EXPECT_EQ(back.sknn_neighbors, 12u);
  c.model = "mystery";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Baselines, CheckpointRoundTrip) {
  const auto& p = shared_data();
  const auto test = p.tasks_of(p.split.test);
  for (const char* name : {"popular", "random", "svd", "demo", "gru4rec", "gru4rec-concat", "sknn", "sknn-b"}) {
    BaselineConfig c;
    c.model = name;
    c.demo_train.max_epochs = 2;
    c.gru4rec_train.max_epochs = 1;
    const auto model = train_baseline(p, c);
    const auto back = load_baseline(nlohmann::json::parse(model->checkpoint().dump()));
    EXPECT_EQ(back->name(), model->name());
    for (std::size_t i = 0; i < 10; ++i) {
      const auto s = model->score(p.data, test[i]);
      EXPECT_EQ(s.size(), p.data.catalog.size());
      EXPECT_EQ(back->score(p.data, test[i]), s) << name;
    }
  }
}

TEST(Baselines, SessionModelsBeatPopularOnPlantedData) {
  const auto& p = shared_data();
  BaselineConfig pop;
  const double base = hr_of(*train_baseline(p, pop));
  BaselineConfig sknn;
  sknn.model = "sknn-b";
  EXPECT_GT(hr_of(*train_baseline(p, sknn)), base + 0.15);
}
