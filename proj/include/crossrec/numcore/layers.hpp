#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "crossrec/numcore/tape.hpp"

namespace crossrec::numcore {

enum class Activation { identity, relu, sigmoid, tanh, exp, softmax };

Activation parse_activation(std::string_view name);

// Plain (untaped) evaluation of activation(x * W + b).
Mat dense(const Mat& x, const Mat& W, const Mat& b, Activation activation);

// Weights of a single GRU layer. Input matrices are input_dim x hidden,
// recurrent matrices hidden x hidden, biases 1 x hidden.
struct GruWeights {
  Mat W_z, U_z, b_z;
  Mat W_r, U_r, b_r;
  Mat W, U, b;
};

// One GRU step on plain matrices:
//   z = sigmoid(x W_z + h U_z + b_z)
//   r = sigmoid(x W_r + h U_r + b_r)
//   c = tanh(x W + (r * h) U + b)
//   h' = (1 - z) * h + z * c
Mat gru_cell(const Mat& x, const Mat& h_prev, const GruWeights& w);

// Dense layer whose parameters live in a ParamSet.
struct DenseLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;
  Activation activation = Activation::identity;

  static DenseLayer create(ParamSet& params, const std::string& prefix, std::size_t in,
                           std::size_t out, Activation activation, Rng& rng);

  // x may hold several rows; the bias is broadcast.
  Var apply(Tape& tape, Var x) const;
  std::size_t out_dim(const ParamSet& params) const;
};

// GRU layer whose parameters live in a ParamSet.
struct GruLayer {
  std::size_t W_z = 0, U_z = 0, b_z = 0;
  std::size_t W_r = 0, U_r = 0, b_r = 0;
  std::size_t W = 0, U = 0, b = 0;
  std::size_t hidden = 0;

  static GruLayer create(ParamSet& params, const std::string& prefix, std::size_t in,
                         std::size_t hidden, Rng& rng);

  // Runs the layer over every row of `inputs` starting from h0 (zeros when
  // absent) and returns the hidden state after each step.
  std::vector<Var> run(Tape& tape, const Mat& inputs, std::optional<Var> h0 = std::nullopt) const;
  std::vector<Var> run(Tape& tape, Var inputs, std::optional<Var> h0 = std::nullopt) const;

  GruWeights weights(const ParamSet& params) const;
};

enum class Mode { train, infer };

// Inverted dropout: in train mode each element is zeroed with probability
// `rate` and survivors are scaled by 1 / (1 - rate). Infer mode is identity.
Mat dropout(const Mat& x, double rate, Mode mode, Rng& rng);
Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

// Taped dropout; rng == nullptr means inference.
Var dropout(Tape& tape, Var x, double rate, Rng* rng);

}  // namespace crossrec::numcore
