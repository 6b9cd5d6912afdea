#include "crossrec/segmentation/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace crossrec::segmentation {

namespace {

constexpr double kMinSigma = 1e-6;

double log_normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct Stats {
  double mean = 0.0;
  double sd = 0.0;
};

Stats stats_of(std::span<const double> xs) {
  Stats s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(xs.size()));
  return s;
}

}  // namespace

double Gmm2::weighted_density(int component, double x) const {
  return component == 0 ? w1 * std::exp(log_normal_pdf(x, mu1, sigma1))
                        : w2 * std::exp(log_normal_pdf(x, mu2, sigma2));
}

double Gmm2::log_likelihood(std::span<const double> xs) const {
  double total = 0.0;
  for (double x : xs) {
    total += log_sum_exp(std::log(w1) + log_normal_pdf(x, mu1, sigma1), std::log(w2) + log_normal_pdf(x, mu2, sigma2));
  }
  return total;
}

GmmFit fit_gmm_em(std::span<const double> xs, const GmmFitOptions& options) {
  if (options.max_iter < 1) throw ConfigError("max_iter must be >= 1");
  if (!(options.tol > 0.0)) throw ConfigError("tol must be positive");
  if (xs.size() < 2) throw Error("fit_gmm_em needs at least two values");
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) throw Error("fit_gmm_em needs at least two distinct values");

  const std::size_t n = sorted.size();
  const std::size_t half = n / 2;
  const Stats overall = stats_of(sorted);
  Stats lo = stats_of(std::span<const double>(sorted).first(half));
  Stats hi = stats_of(std::span<const double>(sorted).subspan(half));
  auto floor_sd = [&](Stats s) {
    if (s.sd < kMinSigma) s.sd = std::max(overall.sd / 2.0, kMinSigma * 10);
    return s;
  };
  lo = floor_sd(lo);
  hi = floor_sd(hi);

  GmmFit fit;
  Gmm2& g = fit.model;
  g.w1 = static_cast<double>(half) / static_cast<double>(n);
  g.w2 = 1.0 - g.w1;
  g.mu1 = lo.mean;
  g.sigma1 = lo.sd;
  g.mu2 = hi.mean;
  g.sigma2 = hi.sd;

  const double nd = static_cast<double>(n);
  std::vector<double> resp(n);
  bool reinitialised = false;
  double prev = g.log_likelihood(xs) / nd;
  fit.log_likelihood.push_back(prev);

  for (std::size_t it = 0; it < options.max_iter; ++it) {
    // E-step
    double n1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::log(g.w1) + log_normal_pdf(xs[i], g.mu1, g.sigma1);
      const double b = std::log(g.w2) + log_normal_pdf(xs[i], g.mu2, g.sigma2);
      resp[i] = std::exp(a - log_sum_exp(a, b));
      n1 += resp[i];
    }
    const double n2 = nd - n1;
    // M-step
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s1 += resp[i] * xs[i];
      s2 += (1.0 - resp[i]) * xs[i];
    }
    Gmm2 next = g;
    next.mu1 = n1 > 0.0 ? s1 / n1 : g.mu1;
    next.mu2 = n2 > 0.0 ? s2 / n2 : g.mu2;
    double v1 = 0.0, v2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v1 += resp[i] * (xs[i] - next.mu1) * (xs[i] - next.mu1);
      v2 += (1.0 - resp[i]) * (xs[i] - next.mu2) * (xs[i] - next.mu2);
    }
    next.sigma1 = n1 > 0.0 ? std::sqrt(v1 / n1) : 0.0;
    next.sigma2 = n2 > 0.0 ? std::sqrt(v2 / n2) : 0.0;
    next.w1 = n1 / nd;
    next.w2 = 1.0 - next.w1;

    const bool bad1 = !(next.sigma1 >= kMinSigma) || next.w1 <= 0.0;
    const bool bad2 = !(next.sigma2 >= kMinSigma) || next.w2 <= 0.0;
    if (bad1 || bad2) {
      if (reinitialised) throw Error("degenerate mixture component (sigma below 1e-6)");
      reinitialised = true;
      if (bad1) {
        next.mu1 = lo.mean;
        next.sigma1 = overall.sd;
      }
      if (bad2) {
        next.mu2 = hi.mean;
        next.sigma2 = overall.sd;
      }
      next.w1 = 0.5;
      next.w2 = 0.5;
      g = next;
      prev = g.log_likelihood(xs) / nd;
      fit.log_likelihood.push_back(prev);
      continue;
    }
    g = next;
    ++fit.iterations;
    const double ll = g.log_likelihood(xs) / nd;
    fit.log_likelihood.push_back(ll);
    if (std::abs(ll - prev) < options.tol) {
      fit.converged = true;
      break;
    }
    prev = ll;
  }
  if (g.mu1 > g.mu2) {
    std::swap(g.mu1, g.mu2);
    std::swap(g.sigma1, g.sigma2);
    std::swap(g.w1, g.w2);
  }
  return fit;
}

TaskThreshold threshold_from_days(double days) {
  if (!(days > 0.0)) throw ConfigError("threshold must be positive");
  return {std::log(days * static_cast<double>(dataio::kSecondsPerDay)), days};
}

TaskThreshold intersection_threshold(const Gmm2& g) {
  if (!(g.mu1 < g.mu2)) throw Error("components not separable");
  // f(x) = log(w1 N1(x)) - log(w2 N2(x)) = a x^2 + b x + c
  const double s1 = g.sigma1 * g.sigma1;
  const double s2 = g.sigma2 * g.sigma2;
  const double a = 1.0 / (2.0 * s2) - 1.0 / (2.0 * s1);
  const double b = g.mu1 / s1 - g.mu2 / s2;
  const double c = g.mu2 * g.mu2 / (2.0 * s2) - g.mu1 * g.mu1 / (2.0 * s1) +
                   std::log(g.w1 * g.sigma2 / (g.w2 * g.sigma1));
  auto f = [&](double x) { return (a * x + b) * x + c; };

  std::vector<double> roots;
  const double scale = std::max({std::abs(b), std::abs(c), 1.0});
  if (std::abs(a) <= 1e-14 * scale) {
    if (b != 0.0) roots.push_back(-c / b);
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
      if (q != 0.0) roots.push_back(c / q);
      roots.push_back(q / a);
    }
  }
  for (double x : roots) {
    if (!(x > g.mu1 && x < g.mu2)) continue;
    // Newton polish on the exact polynomial.
    for (int i = 0; i < 3; ++i) {
      const double d = 2.0 * a * x + b;
      if (d == 0.0) break;
      const double step = f(x) / d;
      if (!std::isfinite(step)) break;
      x -= step;
    }
    return {x, std::exp(x) / static_cast<double>(dataio::kSecondsPerDay)};
  }
  throw Error("components not separable");
}

std::vector<Seconds> inter_session_times(std::span<const TimePoint> starts) {
  std::vector<Seconds> out;
  for (std::size_t i = 1; i < starts.size(); ++i) out.push_back(starts[i] - starts[i - 1]);
  return out;
}

std::vector<double> pooled_log_gaps(const dataio::Dataset& data) {
  std::vector<double> out;
  std::vector<TimePoint> starts;
  for (const auto& u : data.users) {
    starts.clear();
    for (const auto& s : u.sessions) starts.push_back(s.start);
    for (Seconds dt : inter_session_times(starts)) {
      out.push_back(std::log(static_cast<double>(std::max<std::int64_t>(dt.count(), 1))));
    }
  }
  return out;
}

Seconds threshold_seconds(double days) {
  return Seconds(static_cast<std::int64_t>(std::llround(days * static_cast<double>(dataio::kSecondsPerDay))));
}

Segmentation segment_tasks(std::uint32_t user, std::span<const TimePoint> session_starts,
                           std::span<const dataio::PurchaseEvent> purchases, Seconds threshold) {
  Segmentation out;
  bool closed = false;
  std::size_t p = 0;
  auto attach = [&](std::size_t purchase) {
    if (out.chains.empty()) {
      ++out.dropped_purchases;
      return;
    }
    out.tasks.push_back({user, out.chains.back(), static_cast<std::uint32_t>(purchase), purchases[purchase].time});
    closed = true;
  };
  for (std::size_t i = 0; i < session_starts.size(); ++i) {
    while (p < purchases.size() && purchases[p].time <= session_starts[i]) attach(p++);
    const bool new_chain = out.chains.empty() || closed ||
                           session_starts[i] - session_starts[out.chains.back().back()] > threshold;
    if (new_chain) {
      out.chains.emplace_back();
      closed = false;
    }
    out.chains.back().push_back(static_cast<std::uint32_t>(i));
  }
  while (p < purchases.size()) attach(p++);
  return out;
}

}  // namespace crossrec::segmentation
