#include "crossrec/numcore/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace crossrec::numcore {

std::size_t ParamSet::add(std::string name, Mat init) {
  if (find(name)) throw Error("duplicate parameter name: " + name);
  params_.push_back({std::move(name), std::move(init)});
  return params_.size() - 1;
}

std::optional<std::size_t> ParamSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

Gradients ParamSet::zero_gradients() const {
  Gradients g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
  return g;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

namespace {

void require_same_shape(const Mat& a, const Mat& b, std::string_view op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error("shape mismatch in " + std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                std::to_string(b.cols()));
  }
}

}  // namespace

Var Tape::push(Mat value, Backward back, std::string_view op) {
  require_finite(value, op);
  nodes_.push_back({std::move(value), Mat(), std::move(back), -1});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::input(Mat value) { return push(std::move(value), nullptr, "input"); }

Var Tape::param(std::size_t index) {
  if (params_ == nullptr || index >= params_->size()) throw Error("tape has no such parameter");
  Var v = push((*params_)[index].value, nullptr, "param");
  nodes_[v.id].param = static_cast<int>(index);
  return v;
}

Var Tape::matmul(Var a, Var b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  if (A.cols() != B.rows()) throw Error("shape mismatch in matmul");
  return push(A * B,
              [a, b](Tape& t, Var self) {
                const Mat& g = t.grad(self);
                t.grad(a).noalias() += g * t.value(b).transpose();
                t.grad(b).noalias() += t.value(a).transpose() * g;
              },
              "matmul");
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  return push(value(a) + value(b),
              [a, b](Tape& t, Var self) {
                t.grad(a) += t.grad(self);
                t.grad(b) += t.grad(self);
              },
              "add");
}

Var Tape::add_row(Var a, Var row) {
  const Mat& A = value(a);
  const Mat& r = value(row);
  if (r.rows() != 1 || r.cols() != A.cols()) throw Error("shape mismatch in add_row");
  Mat out = A.rowwise() + r.row(0);
  return push(std::move(out),
              [a, row](Tape& t, Var self) {
                t.grad(a) += t.grad(self);
                t.grad(row) += t.grad(self).colwise().sum();
              },
              "add_row");
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  return push(value(a) - value(b),
              [a, b](Tape& t, Var self) {
                t.grad(a) += t.grad(self);
                t.grad(b) -= t.grad(self);
              },
              "sub");
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  return push(value(a).cwiseProduct(value(b)),
              [a, b](Tape& t, Var self) {
                const Mat& g = t.grad(self);
                t.grad(a) += g.cwiseProduct(t.value(b));
                t.grad(b) += g.cwiseProduct(t.value(a));
              },
              "mul");
}

Var Tape::one_minus(Var a) {
  Mat out = (1.0 - value(a).array()).matrix();
  return push(std::move(out), [a](Tape& t, Var self) { t.grad(a) -= t.grad(self); }, "one_minus");
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, [a, s](Tape& t, Var self) { t.grad(a) += s * t.grad(self); }, "scale");
}

Var Tape::mask(Var a, Mat m) {
  require_same_shape(value(a), m, "mask");
  Mat out = value(a).cwiseProduct(m);
  return push(std::move(out),
              [a, m = std::move(m)](Tape& t, Var self) { t.grad(a) += t.grad(self).cwiseProduct(m); },
              "mask");
}

Var Tape::sigmoid(Var a) {
  const Mat& x = value(a);
  Mat out = x.unaryExpr([](double v) { return stable_sigmoid(v); });
  return push(std::move(out),
              [a](Tape& t, Var self) {
                const Mat& x = t.value(a);
                const Mat& s = t.value(self);
                const Mat& g = t.grad(self);
                Mat& ga = t.grad(a);
                for (Eigen::Index i = 0; i < x.size(); ++i) {
                  if (std::abs(x.data()[i]) <= kPreActivationClamp) {
                    const double si = s.data()[i];
                    ga.data()[i] += g.data()[i] * si * (1.0 - si);
                  }
                }
              },
              "sigmoid");
}

Var Tape::tanh(Var a) {
  Mat out = value(a).array().tanh().matrix();
  return push(std::move(out),
              [a](Tape& t, Var self) {
                const Mat& y = t.value(self);
                t.grad(a).array() += t.grad(self).array() * (1.0 - y.array().square());
              },
              "tanh");
}

Var Tape::relu(Var a) {
  Mat out = value(a).cwiseMax(0.0);
  return push(std::move(out),
              [a](Tape& t, Var self) {
                const Mat& x = t.value(a);
                t.grad(a).array() += (x.array() > 0.0).select(t.grad(self).array(), 0.0);
              },
              "relu");
}

Var Tape::exp(Var a) {
  const Mat& x = value(a);
  Mat out = x.unaryExpr(
      [](double v) { return std::exp(std::clamp(v, -kPreActivationClamp, kPreActivationClamp)); });
  return push(std::move(out),
              [a](Tape& t, Var self) {
                const Mat& x = t.value(a);
                const Mat& y = t.value(self);
                const Mat& g = t.grad(self);
                Mat& ga = t.grad(a);
                for (Eigen::Index i = 0; i < x.size(); ++i) {
                  if (std::abs(x.data()[i]) <= kPreActivationClamp) ga.data()[i] += g.data()[i] * y.data()[i];
                }
              },
              "exp");
}

Var Tape::softmax_rows(Var a) {
  const Mat& x = value(a);
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return push(std::move(out),
              [a](Tape& t, Var self) {
                const Mat& y = t.value(self);
                const Mat& g = t.grad(self);
                Mat& ga = t.grad(a);
                for (Eigen::Index r = 0; r < y.rows(); ++r) {
                  const double dot = g.row(r).dot(y.row(r));
                  ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
                }
              },
              "softmax");
}

Var Tape::row(Var a, std::size_t i) {
  const Mat& x = value(a);
  const auto r = static_cast<Eigen::Index>(i);
  if (r >= x.rows()) throw Error("row index out of range");
  return push(x.row(r), [a, r](Tape& t, Var self) { t.grad(a).row(r) += t.grad(self); }, "row");
}

Var Tape::stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw Error("stack_rows of nothing");
  const Eigen::Index cols = value(rows.front()).cols();
  Mat out(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Mat& r = value(rows[i]);
    if (r.rows() != 1 || r.cols() != cols) throw Error("shape mismatch in stack_rows");
    out.row(static_cast<Eigen::Index>(i)) = r;
  }
  std::vector<Var> ids(rows.begin(), rows.end());
  return push(std::move(out),
              [ids = std::move(ids)](Tape& t, Var self) {
                const Mat& g = t.grad(self);
                for (std::size_t i = 0; i < ids.size(); ++i) t.grad(ids[i]) += g.row(static_cast<Eigen::Index>(i));
              },
              "stack_rows");
}

Var Tape::concat_cols(Var a, Var b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  if (A.rows() != B.rows()) throw Error("shape mismatch in concat_cols");
  Mat out(A.rows(), A.cols() + B.cols());
  out << A, B;
  const Eigen::Index split = A.cols();
  return push(std::move(out),
              [a, b, split](Tape& t, Var self) {
                const Mat& g = t.grad(self);
                t.grad(a) += g.leftCols(split);
                t.grad(b) += g.rightCols(g.cols() - split);
              },
              "concat_cols");
}

Var Tape::transpose(Var a) {
  Mat out = value(a).transpose();
  return push(std::move(out), [a](Tape& t, Var self) { t.grad(a) += t.grad(self).transpose(); },
              "transpose");
}

Var Tape::sum(Var a) {
  Mat out(1, 1);
  out(0, 0) = value(a).sum();
  return push(std::move(out), [a](Tape& t, Var self) { t.grad(a).array() += t.grad(self)(0, 0); }, "sum");
}

Var Tape::mean(std::span<const Var> scalars) {
  if (scalars.empty()) throw Error("mean of nothing");
  double total = 0.0;
  for (Var s : scalars) total += value(s)(0, 0);
  Mat out(1, 1);
  const double n = static_cast<double>(scalars.size());
  out(0, 0) = total / n;
  std::vector<Var> ids(scalars.begin(), scalars.end());
  return push(std::move(out),
              [ids = std::move(ids), n](Tape& t, Var self) {
                const double g = t.grad(self)(0, 0) / n;
                for (Var s : ids) t.grad(s)(0, 0) += g;
              },
              "mean");
}

Var Tape::softmax_cross_entropy(Var logits, std::size_t target) {
  const Mat& x = value(logits);
  if (x.rows() != 1 || target >= static_cast<std::size_t>(x.cols())) {
    throw Error("softmax_cross_entropy: bad target");
  }
  const double m = x.maxCoeff();
  Mat probs = (x.array() - m).exp().matrix();
  const double z = probs.sum();
  probs /= z;
  Mat out(1, 1);
  out(0, 0) = -(x(0, static_cast<Eigen::Index>(target)) - m - std::log(z));
  return push(std::move(out),
              [logits, target, probs = std::move(probs)](Tape& t, Var self) {
                const double g = t.grad(self)(0, 0);
                Mat& gl = t.grad(logits);
                gl += g * probs;
                gl(0, static_cast<Eigen::Index>(target)) -= g;
              },
              "softmax_cross_entropy");
}

Var Tape::softmax_cross_entropy_rows(Var logits, std::span<const std::uint32_t> targets) {
  const Mat& x = value(logits);
  if (static_cast<std::size_t>(x.rows()) != targets.size()) throw Error("softmax_cross_entropy_rows: bad targets");
  Mat probs(x.rows(), x.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto k = static_cast<Eigen::Index>(targets[static_cast<std::size_t>(r)]);
    if (k >= x.cols()) throw Error("softmax_cross_entropy_rows: bad target");
    const double m = x.row(r).maxCoeff();
    probs.row(r) = (x.row(r).array() - m).exp().matrix();
    const double z = probs.row(r).sum();
    probs.row(r) /= z;
    total -= x(r, k) - m - std::log(z);
  }
  Mat out(1, 1);
  out(0, 0) = total;
  std::vector<std::uint32_t> ts(targets.begin(), targets.end());
  return push(std::move(out),
              [logits, ts = std::move(ts), probs = std::move(probs)](Tape& t, Var self) {
                const double g = t.grad(self)(0, 0);
                Mat& gl = t.grad(logits);
                gl += g * probs;
                for (std::size_t r = 0; r < ts.size(); ++r) gl(static_cast<Eigen::Index>(r), ts[r]) -= g;
              },
              "softmax_cross_entropy_rows");
}

Var Tape::custom(std::span<const Var> parents, Mat value, Backward backward) {
  for (Var p : parents) {
    if (p.id >= nodes_.size()) throw Error("custom node with unknown parent");
  }
  return push(std::move(value), std::move(backward), "custom");
}

void Tape::backward(Var loss, Gradients& grads) {
  if (value(loss).size() != 1) throw Error("backward needs a scalar loss");
  for (std::size_t i = 0; i <= loss.id; ++i) {
    nodes_[i].grad = Mat::Zero(nodes_[i].value.rows(), nodes_[i].value.cols());
  }
  nodes_[loss.id].grad(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.back) {
      n.back(*this, Var{static_cast<std::uint32_t>(i)});
    } else if (n.param >= 0) {
      grads.at(static_cast<std::size_t>(n.param)) += n.grad;
    }
  }
}

}  // namespace crossrec::numcore
