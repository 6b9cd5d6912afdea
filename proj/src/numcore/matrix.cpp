#include "crossrec/numcore/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace crossrec::numcore {

Mat row_vector(std::span<const double> values) {
  Mat m(1, static_cast<Eigen::Index>(values.size()));
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

std::vector<double> to_vector(const Mat& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

bool all_finite(const Mat& m) { return m.allFinite(); }

void require_finite(const Mat& m, std::string_view what) {
  if (!m.allFinite()) {
    throw NumericError("numeric overflow in " + std::string(what));
  }
}

Mat glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-s, s);
  Mat w(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double stable_sigmoid(double x) {
  x = std::clamp(x, -kPreActivationClamp, kPreActivationClamp);
  return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace crossrec::numcore
