#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "crossrec/segmentation/segmentation.hpp"

using namespace crossrec;
using namespace crossrec::segmentation;

namespace {

std::vector<double> mixture(std::size_t n, double w1, double m1, double s1, double m2, double s2, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution first(w1);
  std::normal_distribution<double> a(m1, s1), b(m2, s2);
  std::vector<double> xs(n);
  for (auto& x : xs) x = first(rng) ? a(rng) : b(rng);
  return xs;
}

TimePoint at(std::int64_t seconds) { return TimePoint{} + Seconds(seconds); }

}  // namespace

TEST(Gmm, RecoversSeparatedComponents) {
  const auto xs = mixture(5000, 0.3, -2.0, 0.5, 3.0, 1.0, 1);
  const auto fit = fit_gmm_em(xs);
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.model.mu1, -2.0, 0.1);
  EXPECT_NEAR(fit.model.mu2, 3.0, 0.1);
  EXPECT_NEAR(fit.model.w1, 0.3, 0.02);
  EXPECT_NEAR(fit.model.sigma1, 0.5, 0.05);
}

TEST(Gmm, LogLikelihoodIsMonotone) {
  const auto xs = mixture(2000, 0.5, 0.0, 1.0, 1.5, 1.0, 2);
  const auto fit = fit_gmm_em(xs);
  for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
    EXPECT_GE(fit.log_likelihood[i], fit.log_likelihood[i - 1] - 1e-12);
  }
}

TEST(Gmm, LogLikelihoodMatchesDirectSum) {
  Gmm2 g{0.4, 0.6, 0.0, 2.0, 1.0, 0.5};
  const std::vector<double> xs{-1.0, 0.5, 2.2};
  double direct = 0.0;
  const double pi = std::acos(-1.0);
  for (double x : xs) {
    const double p1 = 0.4 * std::exp(-0.5 * x * x) / std::sqrt(2 * pi);
    const double p2 = 0.6 * std::exp(-0.5 * std::pow((x - 2.0) / 0.5, 2)) / (0.5 * std::sqrt(2 * pi));
    direct += std::log(p1 + p2);
  }
  EXPECT_NEAR(g.log_likelihood(xs), direct, 1e-12);
}

TEST(Gmm, DegenerateInputsThrow) {
  EXPECT_ANY_THROW(fit_gmm_em(std::vector<double>{1.0}));
  EXPECT_ANY_THROW(fit_gmm_em(std::vector<double>(100, 2.0)));
}

TEST(Threshold, EqualVarianceEqualWeightIsMidpoint) {
  Gmm2 g{0.5, 0.5, 1.0, 7.0, 1.3, 1.3};
  EXPECT_NEAR(intersection_threshold(g).log_seconds, 4.0, 1e-9);
}

TEST(Threshold, UnequalComponentsSolveDensityEquation) {
  Gmm2 g{0.7, 0.3, 8.0, 14.0, 1.0, 0.6};
  const double x = intersection_threshold(g).log_seconds;
  EXPECT_GT(x, 8.0);
  EXPECT_LT(x, 14.0);
  EXPECT_NEAR(g.weighted_density(0, x), g.weighted_density(1, x), 1e-12);
  EXPECT_NEAR(intersection_threshold(g).days, std::exp(x) / 86400.0, 1e-9);
}

TEST(Threshold, FromDays) {
  EXPECT_NEAR(threshold_from_days(10.0).log_seconds, std::log(864000.0), 1e-12);
  EXPECT_EQ(threshold_seconds(1.5).count(), 129600);
}

TEST(Segment, SplitsOnLongGapsAndPurchases) {
  const std::int64_t h = 3600, d = 86400;
  const std::vector<TimePoint> starts{at(0), at(h), at(30 * d), at(30 * d + h), at(30 * d + 3 * h)};
  std::vector<dataio::PurchaseEvent> purchases{{at(2 * h), {0}}, {at(30 * d + 2 * h), {1}}};
  const auto s = segment_tasks(0, starts, purchases, threshold_seconds(10));
  ASSERT_EQ(s.tasks.size(), 2u);
  EXPECT_EQ(s.tasks[0].sessions, (std::vector<std::uint32_t>{0, 1}));
  EXPECT_EQ(s.tasks[1].sessions, (std::vector<std::uint32_t>{2, 3}));
  EXPECT_EQ(s.chains.size(), 3u);
  std::size_t total = 0;
  for (const auto& c : s.chains) total += c.size();
  EXPECT_EQ(total, starts.size());
}

TEST(Segment, PurchaseWithoutSessionIsDropped) {
  const std::vector<TimePoint> starts{at(1000)};
  std::vector<dataio::PurchaseEvent> purchases{{at(10), {0}}, {at(2000), {0}}};
  const auto s = segment_tasks(0, starts, purchases, threshold_seconds(10));
  EXPECT_EQ(s.dropped_purchases, 1u);
  ASSERT_EQ(s.tasks.size(), 1u);
  EXPECT_EQ(s.tasks[0].purchase, 1u);
}

TEST(Segment, InterSessionTimes) {
  const std::vector<TimePoint> starts{at(0), at(10), at(100)};
  const auto g = inter_session_times(starts);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[1].count(), 90);
}
