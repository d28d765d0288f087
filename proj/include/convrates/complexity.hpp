// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace convrates {

/// Per-layer Lipschitz constants of a feed-forward parameterization:
/// gamma_l bounds the layer map, lambda_l its dependence on the layer's
/// parameters, B bounds every parameter and N counts them.
struct LayeredComplexitySpec {
  std::vector<double> gammas;
  std::vector<double> lambdas;
  double B = 0.0;
  std::int64_t N = 0;
};

struct EntropyResult {
  double C_L = 0.0;          // value of the recursion
  double closed_form = 0.0;  // (sum lambda) * (prod gamma) >= C_L
  double B = 0.0;
  std::int64_t N = 0;

  /// N log(C_L B / eps), natural log.
  double entropy_bound(double eps) const;
};

/// C_0 = lambda_0, C_{l+1} = gamma_{l+1} C_l + lambda_{l+1} prod_{i<=l} gamma_i.
EntropyResult covering_recursion(const LayeredComplexitySpec& spec);

/// gamma = (1, ..., 1, M), lambda = (sJ+1, ..., sJ+1, dJ), B = M v 1.
LayeredComplexitySpec cnn_complexity_spec(int d, int s, int J, int L, double M);

/// Stored parameter count (sJ+1)JL + (d+s-sJ)J.
std::int64_t param_count(int d, int s, int J, int L);

/// N log(3 d J L M^2 / eps).
double entropy_bound_cnn(int d, int s, int J, int L, double M, double eps);

struct CoverCheckOptions {
  int d = 2;
  int s = 2;
  int J = 1;
  int L = 1;
  double M = 1.0;
  double eps = 0.5;
  /// Grid points per parameter; 0 derives the spacing eps / C_L.
  int grid_resolution = 0;
  int trials = 100;
  std::uint64_t seed = 0;
  int uniform_points = 512;
  int halton_points = 512;
};

struct CoverCheckReport {
  double C_L = 0.0;
  double spacing = 0.0;
  int points_per_dim = 0;
  double candidate_count = 0.0;  // (points_per_dim)^N, may exceed 2^53
  bool exhaustive = false;       // false: nearest point plus its 3^N neighbours
  std::int64_t searched_per_trial = 0;
  int sample_points = 0;
  bool spacing_ok = false;       // C_L * spacing <= eps
  std::vector<double> distances; // per trial, sampled sup distance
  std::vector<bool> on_grid;     // trial parameters coincide with grid points
  double worst = 0.0;
  bool passed = false;
  std::string method;
};

/// Brute-force check that the parameter grid induces an eps-cover of
/// CNN(s, J, L, M) restricted to normalised parameters. Requires at most
/// eight parameters.
CoverCheckReport empirical_cover_check(const CoverCheckOptions& opt);

}  // namespace convrates
