#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "crossrec/error.hpp"

namespace crossrec::numcore {

// Dense row-major matrix. Vectors are 1 x n rows so that a batch of them
// stacks naturally and layers compute x * W + b.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

Mat row_vector(std::span<const double> values);
std::vector<double> to_vector(const Mat& m);

bool all_finite(const Mat& m);

// Throws NumericError("numeric overflow in <what>") on NaN/Inf.
void require_finite(const Mat& m, std::string_view what);

// Glorot-uniform initialisation: U(-s, s), s = sqrt(6 / (fan_in + fan_out)).
Mat glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

// SplitMix64 finaliser; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

inline constexpr double kPreActivationClamp = 30.0;
inline constexpr double kLogFloor = 1e-12;

double stable_sigmoid(double x);

}  // namespace crossrec::numcore
