#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "crossrec/dataio/dataset.hpp"

namespace crossrec::segmentation {

using dataio::Seconds;
using dataio::TimePoint;

// Two-component univariate Gaussian mixture, components ordered by mean.
struct Gmm2 {
  double w1 = 0.5, w2 = 0.5;
  double mu1 = 0.0, mu2 = 0.0;
  double sigma1 = 1.0, sigma2 = 1.0;

  double weighted_density(int component, double x) const;
  double log_likelihood(std::span<const double> xs) const;
};

struct GmmFitOptions {
  std::size_t max_iter = 500;
  double tol = 1e-8;
};

struct GmmFit {
  Gmm2 model;
  std::vector<double> log_likelihood;  // mean log-likelihood per point, after each iteration
  std::size_t iterations = 0;
  bool converged = false;
};

// Initialises by splitting the sorted sample at its median and taking the
// mean and standard deviation of each half, then runs EM until the mean
// log-likelihood improves by less than tol. A component whose sigma falls
// below 1e-6 is re-initialised once; a second collapse is an error.
GmmFit fit_gmm_em(std::span<const double> xs, const GmmFitOptions& options = {});

struct TaskThreshold {
  double log_seconds = 0.0;
  double days = 0.0;
};

TaskThreshold threshold_from_days(double days);

// Point in (mu1, mu2) where both weighted densities are equal. Throws
// Error("components not separable") when no such point exists.
TaskThreshold intersection_threshold(const Gmm2& g);

// Start-time differences between consecutive sessions, in seconds.
std::vector<Seconds> inter_session_times(std::span<const TimePoint> starts);

// log(max(dt, 1 s)) for every inter-session time of every user.
std::vector<double> pooled_log_gaps(const dataio::Dataset& data);

// A purchase event together with the chain of sessions that precede it.
struct Task {
  std::uint32_t user = 0;
  std::vector<std::uint32_t> sessions;  // indices into the user's sessions, time-ordered
  std::uint32_t purchase = 0;           // index into the user's purchases
  TimePoint purchase_time{};
};

struct Segmentation {
  std::vector<std::vector<std::uint32_t>> chains;  // partition of the sessions
  std::vector<Task> tasks;
  std::size_t dropped_purchases = 0;  // purchases with no preceding session
};

// Chains consecutive sessions whose start gap is <= threshold and that are
// not separated by a purchase. Each purchase is attached to the chain
// holding the latest session that started before it.
Segmentation segment_tasks(std::uint32_t user, std::span<const TimePoint> session_starts,
                           std::span<const dataio::PurchaseEvent> purchases, Seconds threshold);

Seconds threshold_seconds(double days);

}  // namespace crossrec::segmentation
