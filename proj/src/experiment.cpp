// SPDX-License-Identifier: Apache-2.0
#include "convrates/experiment.hpp"

#include <chrono>
#include <cmath>
#include <optional>

#include "convrates/parallel.hpp"
#include "convrates/random.hpp"

namespace convrates {

RateFit fit_rate(const std::vector<double>& n, const std::vector<double>& error) {
  require(n.size() == error.size(), "rate-fit", "n and error lengths differ");
  require(n.size() >= 4, "rate-fit", "a rate fit needs at least four points");
  RateFit fit;
  fit.n = n;
  fit.error = error;
  const double k = static_cast<double>(n.size());
  double sx = 0, sy = 0;
  std::vector<double> lx(n.size()), ly(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    require(n[i] > 0 && error[i] > 0 && std::isfinite(error[i]), "rate-fit", "n and error must be positive");
    lx[i] = std::log(n[i]);
    ly[i] = std::log(error[i]);
    sx += lx[i];
    sy += ly[i];
  }
  const double mx = sx / k, my = sy / k;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  require(sxx > 0, "rate-fit", "sample sizes must not all coincide");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  for (std::size_t i = 0; i < n.size(); ++i) fit.residuals.push_back(ly[i] - fit.intercept - fit.slope * lx[i]);
  return fit;
}

Architecture rate_schedule(Loss loss, std::int64_t n, const RateParameters& rp, const ScheduleConstants& c) {
  require(n >= 3, "sample-size", "schedules need n >= 3");
  require(rp.alpha > 0 && rp.d >= 1, "rate-parameters", "alpha and d must be positive");
  const double d = rp.d, a = rp.alpha, logn = std::log(static_cast<double>(n));
  double base = 0, L_exp = 0, M_exp = 0;
  Architecture arch;
  switch (loss) {
    case Loss::squared:
      base = n / (logn * logn * logn);
      L_exp = d / (2 * a + d);
      M_exp = (3 * d + 3 - 2 * a) / (4 * a + 2 * d);
      arch.B = c.B_factor * logn;
      break;
    case Loss::hinge:
      base = n / (logn * logn);
      if (std::isinf(rp.q)) {
        L_exp = 0;
        M_exp = 0;
      } else {
        L_exp = d / ((rp.q + 2) * a + d);
        M_exp = (3 * d + 3) / (2 * (rp.q + 2) * a + 2 * d);
      }
      arch.B = 1.0;
      break;
    case Loss::logistic:
      base = n / logn;
      L_exp = d / ((1 + rp.beta) * a + d);
      M_exp = (3 * d + 3 + 2 * a) / (2 * (1 + rp.beta) * a + 2 * d);
      arch.B = c.B_factor * logn;
      break;
  }
  arch.L = std::max(1, static_cast<int>(std::lround(c.L_factor * std::pow(base, L_exp))));
  arch.M = std::max(1.0, c.M_factor * std::pow(base, M_exp));
  return arch;
}

double theory_slope(Loss loss, const RateParameters& rp) {
  const double d = rp.d, a = rp.alpha;
  switch (loss) {
    case Loss::squared: return -2 * a / (2 * a + d);
    case Loss::hinge: return std::isinf(rp.q) ? -1.0 : -(rp.q + 1) * a / ((rp.q + 2) * a + d);
    case Loss::logistic: return -(1 + rp.beta) * a / ((1 + rp.beta) * a + d);
  }
  return 0.0;
}

ExperimentResult run_rate_experiment(const ExperimentConfig& cfg) {
  require(cfg.n_schedule.size() >= 4, "n-schedule", "need at least four sample sizes");
  for (std::size_t i = 1; i < cfg.n_schedule.size(); ++i) {
    require(cfg.n_schedule[i] > cfg.n_schedule[i - 1], "n-schedule", "sample sizes must increase");
  }
  require(cfg.repeats >= 1, "repeats", "need at least one repeat");
  require(cfg.eval_samples >= 2, "samples", "need at least two evaluation draws");
  require((cfg.loss == Loss::squared) == (cfg.target.kind == TargetKind::regression), "loss-kind",
          "loss does not match the target kind");

  const std::size_t N = cfg.n_schedule.size();
  const std::size_t R = static_cast<std::size_t>(cfg.repeats);
  std::vector<Architecture> arch(N);
  for (std::size_t i = 0; i < N; ++i) {
    arch[i] = cfg.architecture ? cfg.architecture(cfg.n_schedule[i])
                               : rate_schedule(cfg.loss, cfg.n_schedule[i], cfg.rates, cfg.constants);
  }
  // Every cell is measured on the same evaluation draws.
  const std::uint64_t eval_seed = stream_seed(cfg.seed, 0xE7A1ull);

  std::vector<CellResult> cells(N * R);
  std::vector<std::optional<std::string>> failures(N * R);
  parallel_for(N * R, [&](std::size_t c) {
    const std::size_t i = c / R, r = c % R;
    const auto start = std::chrono::steady_clock::now();
    CellResult& cell = cells[c];
    cell.loss = cfg.loss;
    cell.n = cfg.n_schedule[i];
    cell.L = arch[i].L;
    cell.M = arch[i].M;
    cell.B = cfg.loss == Loss::hinge ? 1.0 : arch[i].B;
    cell.seed = stream_seed(cfg.seed, 2 * c + 1);
    try {
      const Dataset data = sample_dataset(cfg.target, cell.n, cfg.noise, stream_seed(cfg.seed, 2 * c));
      TrainConfig tc = cfg.train;
      tc.loss = cfg.loss;
      tc.L = cell.L;
      tc.M = cell.M;
      tc.B = cell.B;
      tc.seed = cell.seed;
      const TrainResult fit = train_erm(data, tc);
      const RiskEstimate est = measure_excess(fit, cfg.target, cfg.loss, cfg.eval_samples, eval_seed);
      cell.excess_risk = est.value;
      cell.standard_error = est.standard_error;
      cell.train_risk = fit.final_risk;
    } catch (const Error& e) {
      failures[c] = "n = " + std::to_string(cell.n) + ", repeat " + std::to_string(r) + ": " + e.what();
    }
    if (cfg.record_wall_time) {
      cell.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  });

  std::vector<CellResult> finished;
  std::optional<std::string> first;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (failures[c]) {
      if (!first) first = failures[c];
    } else {
      finished.push_back(cells[c]);
    }
  }
  if (first) throw ExperimentFailure("rate experiment cell failed: " + *first, finished);

  ExperimentResult result;
  result.cells = std::move(cells);
  std::vector<double> ns;
  for (std::size_t i = 0; i < N; ++i) {
    double sum = 0;
    for (std::size_t r = 0; r < R; ++r) sum += result.cells[i * R + r].excess_risk;
    result.mean_error.push_back(sum / static_cast<double>(R));
    ns.push_back(static_cast<double>(cfg.n_schedule[i]));
    if (i > 0 && !(result.mean_error[i] < result.mean_error[i - 1])) ++result.inversions;
  }
  result.fit = fit_rate(ns, result.mean_error);
  result.theory_slope = theory_slope(cfg.loss, cfg.rates);
  return result;
}

}  // namespace convrates
