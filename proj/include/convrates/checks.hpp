// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace convrates {

/// One instance of a Monte-Carlo inequality check: lhs <= rhs up to the
/// check's own standard-error allowance.
struct CheckRow {
  std::string check;
  int instance = 0;
  std::string kind;  // "closed-form" or "random"
  double lhs = 0.0;
  double lhs_se = 0.0;
  double rhs = 0.0;
  double rhs_se = 0.0;
  bool passed = false;
};

/// Names accepted by run_check_suite.
const std::vector<std::string>& check_suite_names();

/// Runs the closed-form instances of `check` followed by `random_instances`
/// randomized ones, each with m Monte-Carlo draws. Instance i draws its
/// problem from Rng(seed, i) and its samples from stream_seed(seed, i).
///   logistic-variance: E (phi(Yf) - phi(Yf*))^2 <= 3B R_phi(f).
///   kl-bound: E KL(eta, h) against the SVB bound.
///   hinge-calibration: R(f) - R* <= R_phi(f) - R_phi*.
///   logistic-calibration: R(f) - R* <= 4 c_q^{1/(q+2)} (R_phi excess)^{(q+1)/(q+2)}.
std::vector<CheckRow> run_check_suite(const std::string& check, int random_instances, std::int64_t m,
                                      std::uint64_t seed);

}  // namespace convrates
