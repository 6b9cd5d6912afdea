#include <gtest/gtest.h>

#include <cmath>

#include "crossrec/error.hpp"
#include "crossrec/numcore/checkpoint.hpp"
#include "crossrec/numcore/layers.hpp"
#include "crossrec/numcore/optim.hpp"
#include "crossrec/numcore/scaler.hpp"
#include "crossrec/numcore/tape.hpp"
#include "fixtures.hpp"

using namespace crossrec;
using namespace crossrec::numcore;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

// Builds a scalar from two parameters through `op` and checks backward()
// against central differences.
double op_gradient_error(const std::function<Var(Tape&, Var, Var)>& op, Eigen::Index rows = 2,
                         Eigen::Index cols = 3) {
  Rng rng(7);
  ParamSet params;
  params.add("a", random_mat(rows, cols, rng));
  params.add("b", random_mat(rows, cols, rng));
  auto value = [&] {
    Tape t(&params);
    return t.value(t.sum(op(t, t.param(0), t.param(1))))(0, 0);
  };
  Tape t(&params);
  Var loss = t.sum(op(t, t.param(0), t.param(1)));
  auto grads = params.zero_gradients();
  t.backward(loss, grads);
  return fixtures::max_gradient_error(params, grads, value);
}

}  // namespace

TEST(Tape, ElementwiseOpsMatchFiniteDifferences) {
  EXPECT_LT(op_gradient_error([](Tape& t, Var a, Var b) { return t.add(a, b); }), 1e-8);
  EXPECT_LT(op_gradient_error([](Tape& t, Var a, Var b) { return t.sub(a, b); }), 1e-8);
  EXPECT_LT(op_gradient_error([](Tape& t, Var a, Var b) { return t.mul(a, b); }), 1e-8);
  EXPECT_LT(op_gradient_error([](Tape& t, Var a, Var b) { return t.mul(t.sigmoid(a), t.tanh(b)); }), 1e-8);
  EXPECT_LT(op_gradient_error([](Tape& t, Var a, Var b) { return t.mul(t.exp(a), t.one_minus(b)); }), 1e-8);
  EXPECT_LT(op_gradient_error([](Tape& t, Var a, Var b) { return t.scale(t.mul(a, b), -2.5); }), 1e-8);
}

TEST(Tape, MatrixOpsMatchFiniteDifferences) {
  EXPECT_LT(op_gradient_error([](Tape& t, Var a, Var b) { return t.matmul(a, t.transpose(b)); }), 1e-8);
  EXPECT_LT(op_gradient_error([](Tape& t, Var a, Var b) { return t.mul(t.softmax_rows(a), b); }), 1e-8);
  EXPECT_LT(op_gradient_error([](Tape& t, Var a, Var b) { return t.concat_cols(t.row(a, 0), t.row(b, 1)); }), 1e-8);
  EXPECT_LT(op_gradient_error([](Tape& t, Var a, Var b) { return t.add_row(a, t.row(b, 0)); }), 1e-8);
  EXPECT_LT(op_gradient_error([](Tape& t, Var a, Var b) {
              Var rows[] = {t.row(a, 1), t.row(b, 0), t.row(a, 0)};
              return t.mul(t.stack_rows(rows), t.stack_rows(rows));
            }),
            1e-8);
}

TEST(Tape, CrossEntropyMatchesFiniteDifferences) {
  EXPECT_LT(op_gradient_error([](Tape& t, Var a, Var b) { return t.softmax_cross_entropy(t.add(a, b), 2); }, 1, 4),
            1e-8);
  const std::uint32_t targets[] = {0, 3};
  EXPECT_LT(op_gradient_error([&](Tape& t, Var a, Var b) { return t.softmax_cross_entropy_rows(t.mul(a, b), targets); },
                              2, 4),
            1e-8);
}

TEST(Tape, SoftmaxCrossEntropyValue) {
  Tape t;
  Var l = t.softmax_cross_entropy(t.input(row_vector(std::vector<double>{1.0, 2.0, 3.0})), 0);
  const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
  EXPECT_NEAR(t.value(l)(0, 0), expected, 1e-12);
}

TEST(Tape, SoftmaxRowsSumToOne) {
  Rng rng(3);
  Tape t;
  const Mat s = t.value(t.softmax_rows(t.input(random_mat(4, 5, rng) * 50.0)));
  for (Eigen::Index r = 0; r < s.rows(); ++r) EXPECT_NEAR(s.row(r).sum(), 1.0, 1e-12);
}

TEST(Gru, TapedLayerMatchesPlainCell) {
  Rng rng(11);
  ParamSet params;
  auto gru = GruLayer::create(params, "gru", 4, 3, rng);
  const Mat x = random_mat(5, 4, rng);
  Tape t(&params);
  const auto states = gru.run(t, x);
  Mat h = Mat::Zero(1, 3);
  const auto w = gru.weights(params);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    h = gru_cell(x.row(r), h, w);
    EXPECT_LT((t.value(states[static_cast<std::size_t>(r)]) - h).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Gru, CellFollowsGateEquations) {
  GruWeights w;
  w.W_z = Mat::Constant(1, 1, 0.5);
  w.U_z = Mat::Constant(1, 1, -0.3);
  w.b_z = Mat::Constant(1, 1, 0.1);
  w.W_r = Mat::Constant(1, 1, 0.2);
  w.U_r = Mat::Constant(1, 1, 0.4);
  w.b_r = Mat::Constant(1, 1, -0.1);
  w.W = Mat::Constant(1, 1, 0.7);
  w.U = Mat::Constant(1, 1, 0.6);
  w.b = Mat::Constant(1, 1, 0.05);
  const double x = 0.8, h = -0.4;
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double z = sig(0.5 * x - 0.3 * h + 0.1);
  const double r = sig(0.2 * x + 0.4 * h - 0.1);
  const double c = std::tanh(0.7 * x + 0.6 * (r * h) + 0.05);
  const double expected = (1 - z) * h + z * c;
  EXPECT_NEAR(gru_cell(Mat::Constant(1, 1, x), Mat::Constant(1, 1, h), w)(0, 0), expected, 1e-15);
}

TEST(Layers, GlorotBounds) {
  Rng rng(1);
  const Mat w = glorot_uniform(30, 20, rng);
  EXPECT_LE(w.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 50.0));
  EXPECT_NEAR(w.mean(), 0.0, 0.02);
}

TEST(Layers, DropoutIsInvertedAndIdentityAtInference) {
  Rng rng(5);
  const Mat x = Mat::Ones(200, 200);
  const Mat y = dropout(x, 0.3, Mode::train, rng);
  std::size_t zeros = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y.data()[i] == 0.0) {
      ++zeros;
    } else {
      EXPECT_NEAR(y.data()[i], 1.0 / 0.7, 1e-12);
    }
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 40000.0, 0.3, 0.02);
  EXPECT_EQ(dropout(x, 0.3, Mode::infer, rng), x);
}

TEST(Layers, ParseActivation) {
  EXPECT_EQ(parse_activation("relu"), Activation::relu);
  EXPECT_THROW(parse_activation("swish"), ConfigError);
}

TEST(Adam, FirstStepMatchesClosedForm) {
  ParamSet params;
  params.add("w", row_vector(std::vector<double>{1.0, -2.0, 0.5}));
  Gradients g{row_vector(std::vector<double>{0.3, -4.0, 1e-9})};
  AdamConfig cfg;
  Adam adam(params, cfg);
  adam.step(params, g);
  const double start[] = {1.0, -2.0, 0.5};
  for (int i = 0; i < 3; ++i) {
    const double gi = g[0](0, i);
    const double m = (1 - cfg.beta1) * gi, v = (1 - cfg.beta2) * gi * gi;
    const double lr_t = cfg.learning_rate * std::sqrt(1 - cfg.beta2) / (1 - cfg.beta1);
    EXPECT_NEAR(params[0].value(0, i), start[i] - lr_t * m / (std::sqrt(v) + cfg.epsilon), 1e-15);
  }
}

TEST(Adam, MinimisesQuadratic) {
  ParamSet params;
  params.add("w", row_vector(std::vector<double>{3.0, -2.0}));
  Adam adam(params, {.learning_rate = 0.05});
  for (int i = 0; i < 2000; ++i) {
    Gradients g{2.0 * (params[0].value.array() - 1.0).matrix()};
    adam.step(params, g);
  }
  EXPECT_NEAR(params[0].value(0, 0), 1.0, 1e-3);
  EXPECT_NEAR(params[0].value(0, 1), 1.0, 1e-3);
}

TEST(EarlyStopping, StopsAfterPatiencePlusOneWorseEpochs) {
  EarlyStopping es(2);
  EXPECT_TRUE(es.update(1.0));
  EXPECT_FALSE(es.update(1.1));
  EXPECT_FALSE(es.update(1.2));
  EXPECT_FALSE(es.should_stop());
  EXPECT_FALSE(es.update(1.0));
  EXPECT_TRUE(es.should_stop());
  EXPECT_EQ(es.best_epoch(), 1u);
}

TEST(Fit, ReducesLossAndKeepsBestSnapshot) {
  // Linear regression y = 2x - 1 through a single dense unit.
  ParamSet params;
  Rng rng(2);
  auto layer = DenseLayer::create(params, "lin", 1, 1, Activation::identity, rng);
  std::vector<double> xs;
  for (int i = 0; i < 40; ++i) xs.push_back(-1.0 + i / 20.0);
  LossBuilder loss = [&](Tape& t, Split split, std::size_t i, Rng*) {
    const double x = split == Split::train ? xs[i] : xs[i] + 0.01;
    Var out = layer.apply(t, t.input(Mat::Constant(1, 1, x)));
    Var err = t.sub(out, t.input(Mat::Constant(1, 1, 2 * x - 1)));
    return t.sum(t.mul(err, err));
  };
  TrainConfig cfg{.batch_size = 8, .max_epochs = 300, .patience = 5};
  cfg.adam.learning_rate = 0.05;
  auto h = fit(params, loss, xs.size(), 10, cfg);
  EXPECT_LT(h.train_loss.back(), 0.5 * h.initial_train_loss);
  EXPECT_NEAR(evaluate_loss(params, loss, Split::validation, 10), h.validation_loss[h.best_epoch - 1], 1e-12);
}

TEST(Fit, IsBitReproducible) {
  auto run = [] {
    ParamSet params;
    Rng rng(4);
    auto layer = DenseLayer::create(params, "lin", 2, 1, Activation::sigmoid, rng);
    LossBuilder loss = [&](Tape& t, Split, std::size_t i, Rng* d) {
      Var x = t.input(row_vector(std::vector<double>{i * 0.1, 1.0 - i * 0.05}));
      return t.sum(layer.apply(t, dropout(t, x, 0.5, d)));
    };
    fit(params, loss, 20, 5, {.batch_size = 4, .max_epochs = 5});
    return params[0].value;
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng(9);
  ParamSet params;
  params.add("a", random_mat(3, 4, rng));
  params.add("b", random_mat(1, 2, rng));
  const auto j = make_checkpoint("test", {{"x", 1}}, params);
  const auto back = params_from_json(nlohmann::json::parse(j.dump()).at("params"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].value, params[0].value);
  EXPECT_EQ(back[1].name, "b");
  ParamSet wrong;
  wrong.add("a", Mat::Zero(2, 2));
  EXPECT_ANY_THROW(assign_params(wrong, j.at("params")));
}

TEST(Standardizer, ZScoresAndKeepsConstantColumns) {
  const auto s = Standardizer::fit({{1.0, 5.0}, {3.0, 5.0}});
  const Mat z = s.transform({3.0, 5.0});
  EXPECT_NEAR(z(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(z(0, 1), 0.0, 1e-12);
  EXPECT_EQ(Standardizer::from_json(s.to_json()).scale, s.scale);
}

TEST(Numeric, RequireFiniteThrows) {
  Mat m = Mat::Zero(1, 2);
  m(0, 1) = std::nan("");
  EXPECT_THROW(require_finite(m, "test"), NumericError);
  EXPECT_EQ(stable_sigmoid(-800.0), stable_sigmoid(-kPreActivationClamp));
  EXPECT_EQ(stable_sigmoid(800.0), stable_sigmoid(kPreActivationClamp));
  EXPECT_NEAR(stable_sigmoid(0.3), 1.0 / (1.0 + std::exp(-0.3)), 1e-15);
}
