#include "crossrec/numcore/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace crossrec::numcore {

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  if (name == "exp") return Activation::exp;
  if (name == "softmax") return Activation::softmax;
  throw ConfigError("unknown activation: " + std::string(name));
}

Mat dense(const Mat& x, const Mat& W, const Mat& b, Activation activation) {
  if (x.cols() != W.rows() || b.rows() != 1 || b.cols() != W.cols()) {
    throw Error("shape mismatch in dense");
  }
  Mat y = x * W;
  y.rowwise() += b.row(0);
  switch (activation) {
    case Activation::identity:
      break;
    case Activation::relu:
      y = y.cwiseMax(0.0);
      break;
    case Activation::sigmoid:
      y = y.unaryExpr([](double v) { return stable_sigmoid(v); });
      break;
    case Activation::tanh:
      y = y.array().tanh().matrix();
      break;
    case Activation::exp:
      y = y.unaryExpr(
          [](double v) { return std::exp(std::clamp(v, -kPreActivationClamp, kPreActivationClamp)); });
      break;
    case Activation::softmax:
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double m = y.row(r).maxCoeff();
        y.row(r) = (y.row(r).array() - m).exp().matrix();
        y.row(r) /= y.row(r).sum();
      }
      break;
  }
  require_finite(y, "dense");
  return y;
}

Mat gru_cell(const Mat& x, const Mat& h_prev, const GruWeights& w) {
  auto sig = [](const Mat& m) { return Mat(m.unaryExpr([](double v) { return stable_sigmoid(v); })); };
  Mat z = sig(x * w.W_z + h_prev * w.U_z + w.b_z);
  Mat r = sig(x * w.W_r + h_prev * w.U_r + w.b_r);
  Mat c = (x * w.W + r.cwiseProduct(h_prev) * w.U + w.b).array().tanh().matrix();
  Mat h = (1.0 - z.array()).matrix().cwiseProduct(h_prev) + z.cwiseProduct(c);
  require_finite(h, "gru_cell");
  return h;
}

DenseLayer DenseLayer::create(ParamSet& params, const std::string& prefix, std::size_t in,
                              std::size_t out, Activation activation, Rng& rng) {
  DenseLayer layer;
  layer.weight = params.add(prefix + "/W", glorot_uniform(in, out, rng));
  layer.bias = params.add(prefix + "/b", Mat::Zero(1, static_cast<Eigen::Index>(out)));
  layer.activation = activation;
  return layer;
}

Var DenseLayer::apply(Tape& tape, Var x) const {
  Var y = tape.add_row(tape.matmul(x, tape.param(weight)), tape.param(bias));
  switch (activation) {
    case Activation::identity:
      return y;
    case Activation::relu:
      return tape.relu(y);
    case Activation::sigmoid:
      return tape.sigmoid(y);
    case Activation::tanh:
      return tape.tanh(y);
    case Activation::exp:
      return tape.exp(y);
    case Activation::softmax:
      return tape.softmax_rows(y);
  }
  return y;
}

std::size_t DenseLayer::out_dim(const ParamSet& params) const {
  return static_cast<std::size_t>(params[weight].value.cols());
}

GruLayer GruLayer::create(ParamSet& params, const std::string& prefix, std::size_t in,
                          std::size_t hidden, Rng& rng) {
  GruLayer g;
  const auto H = static_cast<Eigen::Index>(hidden);
  g.hidden = hidden;
  g.W_z = params.add(prefix + "/W_z", glorot_uniform(in, hidden, rng));
  g.U_z = params.add(prefix + "/U_z", glorot_uniform(hidden, hidden, rng));
  g.b_z = params.add(prefix + "/b_z", Mat::Zero(1, H));
  g.W_r = params.add(prefix + "/W_r", glorot_uniform(in, hidden, rng));
  g.U_r = params.add(prefix + "/U_r", glorot_uniform(hidden, hidden, rng));
  g.b_r = params.add(prefix + "/b_r", Mat::Zero(1, H));
  g.W = params.add(prefix + "/W", glorot_uniform(in, hidden, rng));
  g.U = params.add(prefix + "/U", glorot_uniform(hidden, hidden, rng));
  g.b = params.add(prefix + "/b", Mat::Zero(1, H));
  return g;
}

std::vector<Var> GruLayer::run(Tape& tape, const Mat& inputs, std::optional<Var> h0) const {
  return run(tape, tape.input(inputs), h0);
}

std::vector<Var> GruLayer::run(Tape& tape, Var inputs, std::optional<Var> h0) const {
  const auto steps = static_cast<std::size_t>(tape.value(inputs).rows());
  if (steps == 0) throw Error("GRU over an empty sequence");
  // Input projections for all steps at once; rows are sliced per step.
  Var xz = tape.add_row(tape.matmul(inputs, tape.param(W_z)), tape.param(b_z));
  Var xr = tape.add_row(tape.matmul(inputs, tape.param(W_r)), tape.param(b_r));
  Var xc = tape.add_row(tape.matmul(inputs, tape.param(W)), tape.param(b));
  Var uz = tape.param(U_z);
  Var ur = tape.param(U_r);
  Var uc = tape.param(U);

  Var h = h0 ? *h0 : tape.input(Mat::Zero(1, static_cast<Eigen::Index>(hidden)));
  std::vector<Var> states;
  states.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    Var z = tape.sigmoid(tape.add(tape.row(xz, i), tape.matmul(h, uz)));
    Var r = tape.sigmoid(tape.add(tape.row(xr, i), tape.matmul(h, ur)));
    Var c = tape.tanh(tape.add(tape.row(xc, i), tape.matmul(tape.mul(r, h), uc)));
    h = tape.add(tape.mul(tape.one_minus(z), h), tape.mul(z, c));
    states.push_back(h);
  }
  return states;
}

GruWeights GruLayer::weights(const ParamSet& params) const {
  return {params[W_z].value, params[U_z].value, params[b_z].value,
          params[W_r].value, params[U_r].value, params[b_r].value,
          params[W].value,   params[U].value,   params[b].value};
}

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
  Mat m(rows, cols);
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? scale : 0.0;
  return m;
}

Mat dropout(const Mat& x, double rate, Mode mode, Rng& rng) {
  if (mode == Mode::infer || rate == 0.0) return x;
  return x.cwiseProduct(dropout_mask(x.rows(), x.cols(), rate, rng));
}

Var dropout(Tape& tape, Var x, double rate, Rng* rng) {
  if (rng == nullptr || rate == 0.0) return x;
  const Mat& v = tape.value(x);
  return tape.mask(x, dropout_mask(v.rows(), v.cols(), rate, *rng));
}

}  // namespace crossrec::numcore
