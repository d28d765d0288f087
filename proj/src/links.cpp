// SPDX-License-Identifier: Apache-2.0
#include "convrates/links.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "convrates/error.hpp"
#include "convrates/parallel.hpp"

namespace convrates {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log1p(x) - x.
double log1p_minus_x(double x) {
  if (std::abs(x) >= 0.05) return std::log1p(x) - x;
  double term = x;
  double sum = 0.0;
  for (int k = 2; k <= 16; ++k) {
    term *= -x;
    sum += term / k;
  }
  return sum;
}

// expm1(s) - s.
double expm1_minus_s(double s) {
  if (std::abs(s) >= 0.1) return std::expm1(s) - s;
  double term = s;
  double sum = 0.0;
  for (int k = 2; k <= 14; ++k) {
    term *= s / k;
    sum += term;
  }
  return sum;
}

// KL(p, q) given q, 1-q and their logs.
double kl_core(double p, double q, double q1, double log_q, double log_q1) {
  require(p >= 0.0 && p <= 1.0, "probability", "p must lie in [0,1]");
  require(q >= 0.0 && q <= 1.0, "probability", "q must lie in [0,1]");
  if (q == 0.0) return p == 0.0 ? 0.0 : kInf;
  if (q1 == 0.0) return p == 1.0 ? 0.0 : kInf;
  // p - q taken from whichever of q, 1-q carries full precision.
  const double delta = q <= 0.5 ? p - q : q1 - (1.0 - p);
  if (std::abs(delta) <= 0.05 * std::min(q, q1)) {
    return delta * delta / (q * q1) + p * log1p_minus_x(delta / q) +
           (1.0 - p) * log1p_minus_x(-delta / q1);
  }
  double sum = 0.0;
  if (p > 0.0) sum += p * (std::log(p) - log_q);
  if (p < 1.0) sum += (1.0 - p) * (std::log1p(-p) - log_q1);
  return std::max(sum, 0.0);
}

// Per-draw values of K functionals, draw i from Rng(seed, i).
template <class Body>
std::vector<double> draw_values(std::int64_t m, int K, std::uint64_t seed, const XSampler& x, Body&& body) {
  require(m >= 2, "samples", "need at least two Monte-Carlo draws");
  std::vector<double> values(static_cast<std::size_t>(m) * K);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
    Rng rng(seed, i);
    const std::vector<double> xi = x(rng);
    body(std::span<const double>(xi), std::span<double>(values.data() + i * K, K));
  });
  return values;
}

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

// Mean and standard error of column a (minus column b when b >= 0).
Moments moments(const std::vector<double>& v, int K, int a, int b = -1) {
  const std::size_t m = v.size() / K;
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) sum += v[i * K + a] - (b >= 0 ? v[i * K + b] : 0.0);
  const double mean = sum / static_cast<double>(m);
  if (!std::isfinite(mean)) return {mean, kInf};
  double ss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = v[i * K + a] - (b >= 0 ? v[i * K + b] : 0.0) - mean;
    ss += r * r;
  }
  return {mean, std::sqrt(ss / static_cast<double>(m - 1) / static_cast<double>(m))};
}

RiskEstimate estimate(const std::vector<double>& v, int K, int col, std::int64_t m, std::uint64_t seed) {
  const Moments mo = moments(v, K, col);
  return {mo.mean, mo.se, m, seed};
}

double checked_eta(const ScalarField& eta, std::span<const double> x) {
  const double e = eta(x);
  require(e >= 0.0 && e <= 1.0, "probability", "eta must take values in [0,1]");
  return e;
}

double hinge_integrand(double f, double e) {
  require(std::abs(f) <= 1.0, "bounded-output", "hinge excess risk formula needs |f| <= 1");
  return std::abs(f - sign_of(2.0 * e - 1.0)) * std::abs(2.0 * e - 1.0);
}

double classification_integrand(double f, double e) {
  return sign_of(f) != sign_of(2.0 * e - 1.0) ? std::abs(2.0 * e - 1.0) : 0.0;
}

}  // namespace

XSampler uniform_sampler(int d) {
  require(d >= 1, "dimension", "d must be positive");
  return [d](Rng& rng) {
    std::vector<double> x(d);
    for (double& v : x) v = rng.uniform();
    return x;
  };
}

double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

double kl_divergence(double p, double q) {
  return kl_core(p, q, 1.0 - q, std::log(q), std::log1p(-q));
}

double kl_logit(double p, double f) {
  return kl_core(p, logistic(f), logistic(-f), -softplus(-f), -softplus(f));
}

double PiecewiseLinearLink::closed_form(double t) const {
  if (kind == Kind::sign) return std::clamp(t / u, -1.0, 1.0);
  auto h = [this](double x) {
    if (x <= knots.front()) return values.front();
    if (x >= knots.back()) return values.back();
    const auto i = static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), x) - knots.begin()) - 1;
    const double w = (x - knots[i]) / (knots[i + 1] - knots[i]);
    return values[i] + w * (values[i + 1] - values[i]);
  };
  return h(t) - h(1.0 - t);
}

PiecewiseLinearLink log_link_net(int N) {
  require(N >= 3, "link-size", "log link needs N >= 3");
  PiecewiseLinearLink link;
  link.kind = PiecewiseLinearLink::Kind::log_ratio;
  link.N = N;
  link.range = std::log(static_cast<double>(N));
  const double n = N;
  for (int i = 1; i <= N; ++i) {
    link.knots.push_back(i / n);
    link.values.push_back(std::log(static_cast<double>(i)) - link.range);
  }
  // Slopes k_i on [t_i, t_{i+1}], i = 1..N-1.
  std::vector<double> k(N);
  for (int i = 1; i < N; ++i) k[i] = n * (link.values[i] - link.values[i - 1]);
  // h(t) = -log N + sum_i coef_i relu(t - t_i).
  std::vector<double> coef(N + 1);
  coef[1] = k[1];
  for (int i = 2; i < N; ++i) coef[i] = k[i] - k[i - 1];
  coef[N] = -k[N - 1];
  for (int i = 1; i <= N; ++i) {
    const double t = link.knots[i - 1];
    link.net.neurons.push_back({coef[i], 1.0, -t});
    link.net.neurons.push_back({-coef[i], -1.0, 1.0 - t});
  }
  return link;
}

PiecewiseLinearLink sign_link_net(double u) {
  require(u > 0.0 && u < 1.0, "link-width", "u must lie in (0,1)");
  PiecewiseLinearLink link;
  link.kind = PiecewiseLinearLink::Kind::sign;
  link.u = u;
  link.range = 1.0;
  link.net.neurons = {{1.0 / u, 1.0, u}, {-1.0 / u, 1.0, -u}, {-1.0, 0.0, 1.0}};
  return link;
}

RiskEstimate monte_carlo_mean(const ScalarField& g, const XSampler& x, std::int64_t m, std::uint64_t seed) {
  const auto v = draw_values(m, 1, seed, x, [&](std::span<const double> xi, std::span<double> out) {
    out[0] = g(xi);
  });
  return estimate(v, 1, 0, m, seed);
}

RiskEstimate hinge_excess_risk(const ScalarField& f, const ScalarField& eta, const XSampler& x,
                               std::int64_t m, std::uint64_t seed) {
  const auto v = draw_values(m, 1, seed, x, [&](std::span<const double> xi, std::span<double> out) {
    out[0] = hinge_integrand(f(xi), checked_eta(eta, xi));
  });
  return estimate(v, 1, 0, m, seed);
}

RiskEstimate logistic_excess_risk(const ScalarField& f, const ScalarField& eta, const XSampler& x,
                                  std::int64_t m, std::uint64_t seed) {
  const auto v = draw_values(m, 1, seed, x, [&](std::span<const double> xi, std::span<double> out) {
    out[0] = kl_logit(checked_eta(eta, xi), f(xi));
  });
  return estimate(v, 1, 0, m, seed);
}

RiskEstimate classification_excess_risk(const ScalarField& f, const ScalarField& eta,
                                         const XSampler& x, std::int64_t m, std::uint64_t seed) {
  const auto v = draw_values(m, 1, seed, x, [&](std::span<const double> xi, std::span<double> out) {
    out[0] = classification_integrand(f(xi), checked_eta(eta, xi));
  });
  return estimate(v, 1, 0, m, seed);
}

Log2Sides log2_inequality(double p, double q, double u) {
  require(u > 0.0 && u <= std::exp(-2.0) * (1 + 1e-15), "log2-range", "need 0 < u <= e^-2");
  require(p >= 0.0 && p <= 1.0, "log2-range", "p must lie in [0,1]");
  require(q >= u && q <= 1.0, "log2-range", "q must lie in [u,1]");
  const double L = -2.0 * std::log(u);
  if (p == 0.0) return {0.0, L * q, L * q};
  const double s = std::log(q / p);
  const double g = expm1_minus_s(s);
  return {p * s * s, L * p * g, p * (L * g - s * s)};
}

Log2Report check_log2_inequality(int grid_resolution, int u_count) {
  require(grid_resolution >= 2, "grid-resolution", "need at least two grid points");
  require(u_count >= 1, "grid-resolution", "need at least one u value");
  Log2Report r;
  r.min_slack = kInf;
  const double step = 1.0 / (grid_resolution - 1);
  for (int j = 0; j < u_count; ++j) {
    const double u = std::exp(-2.0) * std::pow(4.0, -j);
    r.u_values.push_back(u);
    for (int a = 0; a < grid_resolution; ++a) {
      const double p = a * step;
      for (int b = 0; b < grid_resolution; ++b) {
        const double q = b == grid_resolution - 1 ? 1.0 : u + (1.0 - u) * (b * step);
        const Log2Sides sides = log2_inequality(p, q, u);
        ++r.points;
        if (sides.slack < 0.0) ++r.violations;
        if (sides.slack < r.min_slack) {
          r.min_slack = sides.slack;
          r.argmin_p = p;
          r.argmin_q = q;
          r.argmin_u = u;
        }
      }
    }
  }
  r.passed = r.violations == 0;
  return r;
}

InequalityReport check_logistic_variance_bound(const ScalarField& f, const ScalarField& eta, double B,
                                               const XSampler& x, std::int64_t m, std::uint64_t seed) {
  require(B >= 2.0, "bound", "variance bound needs B >= 2");
  const auto v = draw_values(m, 2, seed, x, [&](std::span<const double> xi, std::span<double> out) {
    const double fx = f(xi);
    require(std::abs(fx) <= B, "bounded-output", "|f| must not exceed B");
    const double e = checked_eta(eta, xi);
    double lhs = 0.0;
    if (e > 0.0) {
      const double l = std::log(e) + softplus(-fx);
      lhs += e * l * l;
    }
    if (e < 1.0) {
      const double l = std::log1p(-e) + softplus(fx);
      lhs += (1.0 - e) * l * l;
    }
    out[0] = lhs;
    out[1] = 3.0 * B * kl_logit(e, fx);
  });
  InequalityReport r;
  const Moments l = moments(v, 2, 0), h = moments(v, 2, 1), d = moments(v, 2, 1, 0);
  r.lhs = l.mean;
  r.lhs_se = l.se;
  r.rhs = h.mean;
  r.rhs_se = h.se;
  r.diff = d.mean;
  r.diff_se = d.se;
  r.samples = m;
  r.passed = r.diff >= -3.0 * r.diff_se;
  return r;
}

double kl_bound_value(double u, double C, double beta, double C_beta) {
  require(u > 0.0 && u < 0.5, "kl-bound", "need 0 < u < 1/2");
  require(beta >= 0.0 && beta <= 1.0, "kl-bound", "need 0 <= beta <= 1");
  require(C >= 0.0 && C_beta >= 0.0, "kl-bound", "constants must be nonnegative");
  if (beta == 1.0) return 2.0 * C_beta * std::pow(C + 1.0, 3.0) * u * u * std::log(1.0 / u);
  return 2.0 * (2.0 - beta) * C_beta * std::pow(C + 1.0, 2.0 + beta) / (1.0 - beta) * std::pow(u, 1.0 + beta);
}

KlBoundReport check_kl_bound(const ScalarField& eta, const ScalarField& h, double u, double C, double beta,
                             double C_beta, const XSampler& x, std::int64_t m, std::uint64_t seed) {
  KlBoundReport r;
  r.bound = kl_bound_value(u, C, beta, C_beta);
  const auto v = draw_values(m, 1, seed, x, [&](std::span<const double> xi, std::span<double> out) {
    const double e = checked_eta(eta, xi);
    const double hx = h(xi);
    require(hx >= u && hx <= 1.0 - u, "kl-range", "h must take values in [u, 1-u]");
    require(std::abs(hx - e) <= C * u * (1 + 1e-12), "kl-range", "|h - eta| must not exceed C u");
    out[0] = kl_divergence(e, hx);
  });
  r.kl = estimate(v, 1, 0, m, seed);
  r.passed = r.kl.value <= r.bound + 3.0 * r.kl.standard_error;
  return r;
}

InequalityReport check_hinge_calibration(const ScalarField& f, const ScalarField& eta, const XSampler& x,
                                         std::int64_t m, std::uint64_t seed) {
  const auto v = draw_values(m, 2, seed, x, [&](std::span<const double> xi, std::span<double> out) {
    const double fx = f(xi);
    const double e = checked_eta(eta, xi);
    out[0] = classification_integrand(fx, e);
    out[1] = hinge_integrand(fx, e);
  });
  InequalityReport r;
  const Moments l = moments(v, 2, 0), h = moments(v, 2, 1), d = moments(v, 2, 1, 0);
  r.lhs = l.mean;
  r.lhs_se = l.se;
  r.rhs = h.mean;
  r.rhs_se = h.se;
  r.diff = d.mean;
  r.diff_se = d.se;
  r.samples = m;
  r.passed = r.diff >= -3.0 * r.diff_se;
  return r;
}

CalibrationReport check_logistic_calibration(const ScalarField& f, const ScalarField& eta, double q,
                                             double c_q, const XSampler& x, std::int64_t m,
                                             std::uint64_t seed) {
  require(q >= 0.0, "tsybakov", "q must be nonnegative");
  require(c_q > 0.0, "tsybakov", "c_q must be positive");
  const auto v = draw_values(m, 2, seed, x, [&](std::span<const double> xi, std::span<double> out) {
    const double fx = f(xi);
    const double e = checked_eta(eta, xi);
    out[0] = classification_integrand(fx, e);
    out[1] = kl_logit(e, fx);
  });
  CalibrationReport r;
  r.classification = estimate(v, 2, 0, m, seed);
  r.surrogate = estimate(v, 2, 1, m, seed);
  const double inner = std::isinf(q) ? 0.0 : 1.0 / (q + 2.0);
  const double outer = std::isinf(q) ? 1.0 : (q + 1.0) / (q + 2.0);
  r.bound = 4.0 * std::pow(c_q, inner) *
            std::pow(r.surrogate.value + 3.0 * r.surrogate.standard_error, outer);
  r.passed = r.classification.value - 3.0 * r.classification.standard_error <= r.bound;
  return r;
}

}  // namespace convrates
