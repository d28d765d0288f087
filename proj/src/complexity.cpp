// SPDX-License-Identifier: Apache-2.0
#include "convrates/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "convrates/cnn.hpp"
#include "convrates/error.hpp"
#include "convrates/parallel.hpp"
#include "convrates/random.hpp"
#include "convrates/tape.hpp"

namespace convrates {

double EntropyResult::entropy_bound(double eps) const {
  require(eps > 0.0, "epsilon", "eps must be positive");
  return static_cast<double>(N) * std::log(C_L * B / eps);
}

EntropyResult covering_recursion(const LayeredComplexitySpec& spec) {
  require(!spec.gammas.empty(), "invalid-spec", "need at least one layer");
  require(spec.gammas.size() == spec.lambdas.size(), "invalid-spec", "gamma and lambda lengths differ");
  for (double g : spec.gammas) require(g >= 1.0, "invalid-spec", "gamma must be at least 1");
  for (double l : spec.lambdas) require(l >= 0.0, "invalid-spec", "lambda must be nonnegative");
  require(spec.B >= 0.0, "invalid-spec", "B must be nonnegative");

  double C = spec.lambdas[0];
  double prod = spec.gammas[0];
  double lambda_sum = spec.lambdas[0];
  for (std::size_t l = 1; l < spec.gammas.size(); ++l) {
    C = spec.gammas[l] * C + spec.lambdas[l] * prod;
    prod *= spec.gammas[l];
    lambda_sum += spec.lambdas[l];
  }
  EntropyResult r;
  r.C_L = C;
  r.closed_form = lambda_sum * prod;
  r.B = spec.B;
  r.N = spec.N;
  return r;
}

std::int64_t param_count(int d, int s, int J, int L) {
  require(s >= 1 && s <= d, "filter-size", "need 1 <= s <= d");
  require(J >= 1 && L >= 1, "architecture", "J and L must be positive");
  const std::int64_t sJ = static_cast<std::int64_t>(s) * J;
  return (sJ + 1) * J * L + (d + s - sJ) * J;
}

LayeredComplexitySpec cnn_complexity_spec(int d, int s, int J, int L, double M) {
  require(s >= 2 && s <= d, "filter-size", "need 2 <= s <= d");
  require(J >= 1 && L >= 1, "architecture", "J and L must be positive");
  require(M >= 1.0, "constraint", "M must be at least 1");
  LayeredComplexitySpec spec;
  spec.gammas.assign(L + 1, 1.0);
  spec.gammas[L] = M;
  spec.lambdas.assign(L + 1, static_cast<double>(s) * J + 1.0);
  spec.lambdas[L] = static_cast<double>(d) * J;
  spec.B = std::max(M, 1.0);
  spec.N = param_count(d, s, J, L);
  return spec;
}

double entropy_bound_cnn(int d, int s, int J, int L, double M, double eps) {
  require(M >= 1.0, "constraint", "M must be at least 1");
  require(eps > 0.0, "epsilon", "eps must be positive");
  const double N = static_cast<double>(param_count(d, s, J, L));
  return N * std::log(3.0 * d * J * L * M * M / eps);
}

namespace {

void assign(CnnParams& p, const std::vector<double>& theta) {
  std::size_t pos = 0;
  for (ConvLayer& layer : p.layers) {
    for (double& t : layer.filter.w) t = theta[pos++];
    for (double& t : layer.bias) t = theta[pos++];
  }
  for (double& t : p.output_weights) t = theta[pos++];
}

/// Random parameters with hidden layer norms <= 1 and ||w_L||_1 <= M.
std::vector<double> normalized_trial(Rng& rng, const CnnParams& shape, double M) {
  CnnParams p = shape;
  for (ConvLayer& layer : p.layers) {
    Filter& f = layer.filter;
    for (int jo = 0; jo < f.out; ++jo) {
      double sum = 0.0;
      for (int k = 0; k < f.s; ++k) {
        for (int ji = 0; ji < f.in; ++ji) sum += std::abs(f.at(k, jo, ji) = rng.uniform(-1, 1));
      }
      sum += std::abs(layer.bias[jo] = rng.uniform(-1, 1));
      if (sum > 1.0) {
        for (int k = 0; k < f.s; ++k) {
          for (int ji = 0; ji < f.in; ++ji) f.at(k, jo, ji) /= sum;
        }
        layer.bias[jo] /= sum;
      }
    }
  }
  for (double& t : p.output_weights) t = rng.uniform(-M, M);
  const double norm = l1_norm(p.output_weights);
  if (norm > M) {
    for (double& t : p.output_weights) t *= M / norm;
  }
  return flatten(p);
}

}  // namespace

CoverCheckReport empirical_cover_check(const CoverCheckOptions& opt) {
  const std::int64_t N = param_count(opt.d, opt.s, opt.J, opt.L);
  require(N <= 8, "tractability-guard", "empirical cover check needs at most 8 parameters");
  require(opt.eps > 0.0, "epsilon", "eps must be positive");
  require(opt.trials >= 1, "trials", "need at least one trial");
  require(opt.grid_resolution == 0 || opt.grid_resolution >= 2, "grid-resolution",
          "need 0 (derived) or at least 2 points per dimension");
  require(opt.uniform_points + opt.halton_points >= 1000, "sample-points", "need at least 1000 sample points");
  const LayeredComplexitySpec spec = cnn_complexity_spec(opt.d, opt.s, opt.J, opt.L, opt.M);
  const EntropyResult ent = covering_recursion(spec);
  const double B = spec.B;

  CoverCheckReport report;
  report.C_L = ent.C_L;

  // Grid values shared by every coordinate.
  std::vector<double> grid;
  if (opt.grid_resolution == 0) {
    const double delta = opt.eps / ent.C_L;
    const auto K = static_cast<std::int64_t>(std::floor(B / delta * (1 + 1e-12)));
    for (std::int64_t k = -K; k <= K; ++k) grid.push_back(static_cast<double>(k) * delta);
    if (static_cast<double>(K) * delta < B) {
      grid.insert(grid.begin(), -B);
      grid.push_back(B);
    }
    report.spacing = delta;
  } else {
    const int r = opt.grid_resolution;
    for (int k = 0; k < r; ++k) grid.push_back(-B + 2.0 * B * k / (r - 1));
    report.spacing = 2.0 * B / (r - 1);
  }
  const int G = static_cast<int>(grid.size());
  report.points_per_dim = G;
  report.candidate_count = std::pow(static_cast<double>(G), static_cast<double>(N));
  report.spacing_ok = ent.C_L * report.spacing <= opt.eps * (1 + 1e-12);
  report.exhaustive = report.candidate_count <= 1e5;
  report.searched_per_trial = report.exhaustive
                                  ? static_cast<std::int64_t>(report.candidate_count)
                                  : static_cast<std::int64_t>(std::pow(3.0, static_cast<double>(N)));

  // Sample points: uniform draws, Halton points and the cube's corners.
  std::vector<std::vector<double>> points;
  {
    Rng rng(opt.seed, 0xC0FFEEULL);
    for (int t = 0; t < opt.uniform_points; ++t) {
      std::vector<double> x(opt.d);
      for (double& v : x) v = rng.uniform();
      points.push_back(std::move(x));
    }
    for (int t = 0; t < opt.halton_points; ++t) points.push_back(halton_point(t, opt.d));
    for (int mask = 0; mask < (1 << opt.d); ++mask) {
      std::vector<double> x(opt.d);
      for (int k = 0; k < opt.d; ++k) x[k] = (mask >> k) & 1;
      points.push_back(std::move(x));
    }
  }
  report.sample_points = static_cast<int>(points.size());
  report.method = std::string("sampled sup over ") + std::to_string(opt.uniform_points) + " uniform, " +
                  std::to_string(opt.halton_points) + " Halton and " + std::to_string(1 << opt.d) +
                  " corner points; " +
                  (report.exhaustive ? "exhaustive grid search"
                                     : "search over the nearest grid point and its 3^N neighbours");

  const CnnParams shape = CnnParams::zeros(opt.d, opt.s, opt.J, opt.L);
  report.distances.assign(opt.trials, 0.0);
  report.on_grid.assign(opt.trials, false);
  std::vector<char> on_grid(opt.trials, 0);

  parallel_for(static_cast<std::size_t>(opt.trials), [&](std::size_t trial) {
    Rng rng(opt.seed, trial);
    std::vector<double> theta = normalized_trial(rng, shape, opt.M);
    // Every tenth trial is snapped onto the grid.
    std::vector<int> nearest(N);
    for (std::int64_t k = 0; k < N; ++k) {
      const auto it = std::min_element(grid.begin(), grid.end(), [&](double a, double b) {
        return std::abs(a - theta[k]) < std::abs(b - theta[k]);
      });
      nearest[k] = static_cast<int>(it - grid.begin());
    }
    if (trial % 10 == 0) {
      for (std::int64_t k = 0; k < N; ++k) theta[k] = grid[nearest[k]];
      on_grid[trial] = 1;
    }

    CnnParams p = shape;
    assign(p, theta);
    Tape tape;
    std::vector<double> reference(points.size());
    for (std::size_t t = 0; t < points.size(); ++t) reference[t] = tape.forward(p, points[t]);

    double best = std::numeric_limits<double>::infinity();
    CnnParams q = shape;
    std::vector<double> cand(N);
    auto evaluate = [&](const std::vector<int>& idx) {
      for (std::int64_t k = 0; k < N; ++k) cand[k] = grid[idx[k]];
      assign(q, cand);
      double dist = 0.0;
      for (std::size_t t = 0; t < points.size() && dist < best; ++t) {
        dist = std::max(dist, std::abs(tape.forward(q, points[t]) - reference[t]));
      }
      best = std::min(best, dist);
    };

    std::vector<int> idx(N, 0);
    if (report.exhaustive) {
      // Nearest point first so the early exit bites.
      evaluate(nearest);
      while (true) {
        evaluate(idx);
        std::int64_t k = 0;
        while (k < N && ++idx[k] == G) idx[k++] = 0;
        if (k == N) break;
      }
    } else {
      std::vector<int> offset(N, -1);
      evaluate(nearest);
      while (true) {
        bool valid = true;
        for (std::int64_t k = 0; k < N; ++k) {
          idx[k] = nearest[k] + offset[k];
          if (idx[k] < 0 || idx[k] >= G) valid = false;
        }
        if (valid) evaluate(idx);
        std::int64_t k = 0;
        while (k < N && ++offset[k] == 2) offset[k++] = -1;
        if (k == N) break;
      }
    }
    report.distances[trial] = best;
  });

  for (int t = 0; t < opt.trials; ++t) report.on_grid[t] = on_grid[t] != 0;
  report.worst = *std::max_element(report.distances.begin(), report.distances.end());
  report.passed = report.worst <= opt.eps;
  return report;
}

}  // namespace convrates
