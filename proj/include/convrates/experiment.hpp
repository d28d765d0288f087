// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "convrates/error.hpp"
#include "convrates/targets.hpp"
#include "convrates/training.hpp"

namespace convrates {

struct RateFit {
  std::vector<double> n;
  std::vector<double> error;
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<double> residuals;  // log error minus fitted line
};

/// Least-squares line through (log n, log error). Needs at least four points
/// with positive n and error.
RateFit fit_rate(const std::vector<double>& n, const std::vector<double>& error);

/// Proportionality constants of the depth, constraint and truncation
/// schedules: L = round(L_factor * base_L), M = M_factor * base_M,
/// B = B_factor * log n (regression and logistic).
struct ScheduleConstants {
  double L_factor = 2.0;
  double M_factor = 10.0;
  double B_factor = 2.0;
};

struct Architecture {
  int L = 1;
  double M = 1.0;
  double B = 1.0;
};

struct RateParameters {
  int d = 2;
  double alpha = 1.0;
  double q = 1.0;     // Tsybakov exponent (hinge, logistic)
  double beta = 1.0;  // SVB exponent (logistic)
};

/// Rate schedule for (L_n, M_n, B_n); L >= 1 and M >= 1 are enforced.
Architecture rate_schedule(Loss loss, std::int64_t n, const RateParameters& rp, const ScheduleConstants& c);

/// Reference exponent: -2a/(2a+d), -(q+1)a/((q+2)a+d) or -(1+b)a/((1+b)a+d).
double theory_slope(Loss loss, const RateParameters& rp);

struct ExperimentConfig {
  TargetSpec target;
  Loss loss = Loss::squared;
  NoiseSpec noise;
  std::vector<std::int64_t> n_schedule;
  int repeats = 5;
  std::uint64_t seed = 0;
  TrainConfig train;  // s, J and optimizer settings; L, M, B come from the schedule
  RateParameters rates;
  ScheduleConstants constants;
  std::int64_t eval_samples = 20000;
  bool record_wall_time = false;
  /// Overrides rate_schedule when set.
  std::function<Architecture(std::int64_t)> architecture;
};

struct CellResult {
  Loss loss = Loss::squared;
  std::int64_t n = 0;
  int L = 0;
  double M = 0.0;
  double B = 0.0;
  std::uint64_t seed = 0;  // training seed of the cell
  double excess_risk = 0.0;
  double standard_error = 0.0;
  double wall_time = 0.0;  // seconds; 0 unless record_wall_time
  double train_risk = 0.0;
};

struct ExperimentResult {
  std::vector<CellResult> cells;   // ordered by (n, repeat)
  std::vector<double> mean_error;  // per n
  RateFit fit;
  double theory_slope = 0.0;
  int inversions = 0;  // consecutive n with mean error not strictly decreasing
};

/// Raised when some cell fails; carries the cells that finished.
class ExperimentFailure : public TrainingFailure {
 public:
  ExperimentFailure(const std::string& message, std::vector<CellResult> partial)
      : TrainingFailure(message), partial_(std::move(partial)) {}
  const std::vector<CellResult>& partial() const noexcept { return partial_; }

 private:
  std::vector<CellResult> partial_;
};

/// Trains every (n, repeat) cell, possibly concurrently, and fits the slope
/// of mean excess risk against n. Requires an increasing schedule of at
/// least four sample sizes.
ExperimentResult run_rate_experiment(const ExperimentConfig& cfg);

}  // namespace convrates
