// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "convrates/compiler.hpp"
#include "convrates/random.hpp"

namespace convrates {

using ScalarField = std::function<double(std::span<const double>)>;
using XSampler = std::function<std::vector<double>(Rng&)>;

/// Uniform distribution on [0,1]^d.
XSampler uniform_sampler(int d);

/// 1 / (1 + e^-t), evaluated without overflow; defined at +-infinity.
double logistic(double t);

/// log(1 + e^t) without overflow.
double softplus(double t);

/// p log(p/q) + (1-p) log((1-p)/(1-q)) with 0 log 0 = 0; +infinity when q = 0
/// and p != 0, or q = 1 and p != 1.
double kl_divergence(double p, double q);

/// KL(p, logistic(f)), computed from the logit so that logistic(f) near 0 or 1
/// keeps its relative precision.
double kl_logit(double p, double f);

/// One-dimensional ReLU network together with the closed form it realises.
struct PiecewiseLinearLink {
  enum class Kind { log_ratio, sign };

  Kind kind = Kind::sign;
  ScalarNet net;
  int N = 0;          // log link: number of knots
  double u = 0.0;     // sign link: width of the linear zone
  double range = 0.0; // sup |g|
  std::vector<double> knots;  // log link: t_i = i/N, i = 1..N
  std::vector<double> values; // log link: log t_i

  double operator()(double t) const { return net(t); }
  /// The defining piecewise formula, evaluated directly.
  double closed_form(double t) const;
};

/// g(t) = h(t) - h(1-t), h the piecewise-linear interpolant of log on the knots
/// i/N, constant outside [1/N, 1]. Requires N >= 3.
PiecewiseLinearLink log_link_net(int N);

/// g(t) = clamp(t/u, -1, 1) as u^-1 relu(t+u) - u^-1 relu(t-u) - relu(1).
PiecewiseLinearLink sign_link_net(double u);

struct RiskEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
};

/// Monte-Carlo mean of g(X) over m draws, draw i from Rng(seed, i).
RiskEstimate monte_carlo_mean(const ScalarField& g, const XSampler& x, std::int64_t m, std::uint64_t seed);

/// sgn with sgn(0) = +1.
inline double sign_of(double t) { return t >= 0.0 ? 1.0 : -1.0; }

/// E |f - sgn(2 eta - 1)| |2 eta - 1|, valid when |f| <= 1 (checked per draw).
RiskEstimate hinge_excess_risk(const ScalarField& f, const ScalarField& eta, const XSampler& x,
                               std::int64_t m, std::uint64_t seed);

/// E KL(eta, logistic(f)).
RiskEstimate logistic_excess_risk(const ScalarField& f, const ScalarField& eta, const XSampler& x,
                                  std::int64_t m, std::uint64_t seed);

/// E 1{sgn f != sgn(2 eta - 1)} |2 eta - 1|.
RiskEstimate classification_excess_risk(const ScalarField& f, const ScalarField& eta,
                                         const XSampler& x, std::int64_t m, std::uint64_t seed);

struct Log2Sides {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // rhs - lhs, computed without cancellation near p = q
};

/// p log^2(p/q) versus log(u^-2) (p log(p/q) - p + q).
Log2Sides log2_inequality(double p, double q, double u);

struct Log2Report {
  std::int64_t points = 0;
  std::int64_t violations = 0;
  double min_slack = 0.0;
  double argmin_p = 0.0, argmin_q = 0.0, argmin_u = 0.0;
  std::vector<double> u_values;
  bool passed = false;
};

/// Grid over p in [0,1] and q in [u,1] (grid_resolution points each) for
/// u_count values u = e^-2 4^-j.
Log2Report check_log2_inequality(int grid_resolution, int u_count = 5);

/// Monte-Carlo comparison of two nonnegative functionals, lhs <= rhs expected.
struct InequalityReport {
  double lhs = 0.0, lhs_se = 0.0;
  double rhs = 0.0, rhs_se = 0.0;
  double diff = 0.0, diff_se = 0.0;  // mean and standard error of rhs - lhs
  std::int64_t samples = 0;
  bool passed = false;               // diff >= -3 diff_se
};

/// E[(phi(Y f) - phi(Y f*))^2] <= 3 B R_phi(f) for the logistic loss; Y is
/// integrated out exactly. Requires B >= 2 and |f| <= B.
InequalityReport check_logistic_variance_bound(const ScalarField& f, const ScalarField& eta, double B,
                                               const XSampler& x, std::int64_t m, std::uint64_t seed);

/// Constant of the KL bound multiplying u^(1+beta) (or u^2 log(1/u) at beta = 1).
double kl_bound_value(double u, double C, double beta, double C_beta);

struct KlBoundReport {
  RiskEstimate kl;
  double bound = 0.0;
  bool passed = false;  // kl.value <= bound + 3 se
};

/// E KL(eta, h) against the KL bound, for h with values in [u, 1-u] and
/// |h - eta| <= C u (both checked per draw). (beta, C_beta) are certified by
/// the caller for the distribution of x.
KlBoundReport check_kl_bound(const ScalarField& eta, const ScalarField& h, double u, double C, double beta,
                             double C_beta, const XSampler& x, std::int64_t m, std::uint64_t seed);

/// R(f) <= R_phi(f) for the hinge loss, |f| <= 1; paired estimate.
InequalityReport check_hinge_calibration(const ScalarField& f, const ScalarField& eta, const XSampler& x,
                                         std::int64_t m, std::uint64_t seed);

struct CalibrationReport {
  RiskEstimate classification;
  RiskEstimate surrogate;
  double bound = 0.0;  // 4 c_q^(1/(q+2)) (R_phi + 3 se)^((q+1)/(q+2))
  bool passed = false; // R - 3 se <= bound
};

/// R(f) <= 4 c_q^(1/(q+2)) R_phi(f)^((q+1)/(q+2)) for the logistic loss under
/// a Tsybakov condition with exponent q (q = +infinity allowed).
CalibrationReport check_logistic_calibration(const ScalarField& f, const ScalarField& eta, double q,
                                             double c_q, const XSampler& x, std::int64_t m,
                                             std::uint64_t seed);

}  // namespace convrates
