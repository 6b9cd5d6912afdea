#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crossrec/numcore/matrix.hpp"

namespace crossrec::numcore {

struct Parameter {
  std::string name;
  Mat value;
};

// Gradient buffer aligned index-for-index with a ParamSet.
using Gradients = std::vector<Mat>;

class ParamSet {
 public:
  std::size_t add(std::string name, Mat init);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::optional<std::size_t> find(std::string_view name) const;

  Gradients zero_gradients() const;
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter> params_;
};

struct Var {
  std::uint32_t id = 0;
};

// Records a forward computation so that backward() can produce exact
// reverse-mode gradients for every parameter that the loss depends on.
// A Tape is single-use and not thread-safe; build one per sample.
class Tape {
 public:
  using Backward = std::function<void(Tape&, Var self)>;

  explicit Tape(const ParamSet* params = nullptr) : params_(params) {}

  Var input(Mat value);
  Var param(std::size_t index);

  const Mat& value(Var v) const { return nodes_[v.id].value; }
  // Only meaningful while backward() is running.
  Mat& grad(Var v) { return nodes_[v.id].grad; }
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  // Adds a 1 x n row to every row of a.
  Var add_row(Var a, Var row);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var one_minus(Var a);
  Var scale(Var a, double s);
  // Elementwise product with a constant mask (dropout).
  Var mask(Var a, Mat m);

  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var exp(Var a);
  Var softmax_rows(Var a);

  Var row(Var a, std::size_t i);
  Var stack_rows(std::span<const Var> rows);
  Var concat_cols(Var a, Var b);
  Var transpose(Var a);
  Var sum(Var a);
  Var mean(std::span<const Var> scalars);

  // Categorical cross-entropy of softmax(logits) against a target class.
  // logits is 1 x n; returns a scalar.
  Var softmax_cross_entropy(Var logits, std::size_t target);
  // Sum over rows of the categorical cross-entropy, one target per row.
  Var softmax_cross_entropy_rows(Var logits, std::span<const std::uint32_t> targets);

  // Extension point for fused loss nodes defined by higher-level modules.
  Var custom(std::span<const Var> parents, Mat value, Backward backward);

  void backward(Var loss, Gradients& grads);

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward back;
    int param = -1;
  };

  Var push(Mat value, Backward back, std::string_view op);

  const ParamSet* params_;
  std::vector<Node> nodes_;
};

}  // namespace crossrec::numcore
