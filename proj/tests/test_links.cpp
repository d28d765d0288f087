// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "convrates/compiler.hpp"
#include "convrates/error.hpp"
#include "convrates/links.hpp"
#include "convrates/random.hpp"

using namespace convrates;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ScalarField constant(double v) {
  return [v](std::span<const double>) { return v; };
}

ScalarField first_coordinate() {
  return [](std::span<const double> x) { return x[0]; };
}

// Random affine map x -> w.x + b with coefficients in [-scale, scale].
ScalarField random_affine(Rng& rng, int d, double scale) {
  std::vector<double> w(d);
  for (double& t : w) t = rng.uniform(-scale, scale);
  const double b = rng.uniform(-scale, scale);
  return [w, b](std::span<const double> x) {
    double s = b;
    for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * x[k];
    return s;
  };
}

}  // namespace

TEST(Logistic, Values) {
  EXPECT_EQ(logistic(0.0), 0.5);
  EXPECT_NEAR(logistic(std::log(3.0)), 0.75, 1e-15);
  EXPECT_EQ(logistic(kInf), 1.0);
  EXPECT_EQ(logistic(-kInf), 0.0);
  EXPECT_GT(logistic(-700.0), 0.0);
  EXPECT_TRUE(std::isfinite(logistic(-1e308)));
}

TEST(Logistic, Symmetry) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double t = rng.uniform(-50, 50);
    ASSERT_NEAR(logistic(t) + logistic(-t), 1.0, 1e-15);
  }
}

TEST(Softplus, MatchesDefinition) {
  for (double t : {-30.0, -2.0, 0.0, 1.5, 20.0}) EXPECT_NEAR(softplus(t), std::log1p(std::exp(t)), 1e-14);
  EXPECT_EQ(softplus(1000.0), 1000.0);
}

TEST(KlDivergence, Examples) {
  const double direct = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  const double other = 0.5 * std::log(0.5 / 0.25) + 0.5 * std::log(0.5 / 0.75);
  EXPECT_NEAR(direct, other, 1e-16);
  EXPECT_NEAR(kl_divergence(0.5, 0.25), direct, 1e-15);
  EXPECT_EQ(kl_divergence(1.0, 0.0), kInf);
  EXPECT_EQ(kl_divergence(0.0, 1.0), kInf);
  EXPECT_EQ(kl_divergence(0.0, 0.0), 0.0);
  EXPECT_EQ(kl_divergence(1.0, 1.0), 0.0);
  EXPECT_NEAR(kl_divergence(1.0, 0.5), std::log(2.0), 1e-15);
  EXPECT_THROW(kl_divergence(1.5, 0.5), PreconditionError);
}

TEST(KlDivergence, ZeroExactlyOnDiagonal) {
  for (int i = 0; i <= 1000; ++i) {
    const double p = i / 1000.0;
    ASSERT_EQ(kl_divergence(p, p), 0.0) << p;
  }
}

TEST(KlDivergence, NonnegativeAndPositiveOffDiagonal) {
  for (int i = 0; i <= 100; ++i) {
    for (int j = 1; j < 100; ++j) {
      const double p = i / 100.0, q = j / 100.0;
      const double kl = kl_divergence(p, q);
      if (i == j) {
        ASSERT_EQ(kl, 0.0);
      } else {
        ASSERT_GT(kl, 0.0) << p << " " << q;
      }
    }
  }
}

TEST(KlDivergence, SecondOrderNearDiagonal) {
  // KL(p, p + delta) = delta^2 / (2 p (1 - p)) + O(delta^3).
  for (double p : {0.01, 0.3, 0.5, 0.9}) {
    for (double delta : {1e-5, 1e-7, 1e-9}) {
      const double expect = delta * delta / (2 * p * (1 - p));
      ASSERT_NEAR(kl_divergence(p, p + delta) / expect, 1.0, 1e-3) << p << " " << delta;
    }
  }
}

TEST(KlDivergence, LogitFormAgrees) {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const double p = rng.uniform();
    const double f = rng.uniform(-8, 8);
    const double a = kl_logit(p, f), b = kl_divergence(p, logistic(f));
    ASSERT_NEAR(a, b, 1e-12 * std::max(1.0, b));
  }
  // Saturated logits keep their relative precision.
  EXPECT_NEAR(kl_logit(1.0, 40.0), std::log1p(std::exp(-40.0)), 1e-30);
  EXPECT_EQ(kl_logit(0.0, kInf), kInf);
}

TEST(LogLink, Antisymmetry) {
  for (int N : {3, 10, 100}) {
    const PiecewiseLinearLink g = log_link_net(N);
    EXPECT_EQ(g.closed_form(0.5), 0.0);
    EXPECT_NEAR(g(0.5), 0.0, 1e-14);
    EXPECT_NEAR(logistic(g(0.5)), 0.5, 1e-14);
  }
}

TEST(LogLink, BoundaryValues) {
  const PiecewiseLinearLink g = log_link_net(3);
  EXPECT_EQ(g.closed_form(0.0), -std::log(3.0));
  EXPECT_EQ(g.closed_form(1.0), std::log(3.0));
  EXPECT_NEAR(g(0.0), -std::log(3.0), 1e-14);
  EXPECT_NEAR(g(1.0), std::log(3.0), 1e-14);
}

TEST(LogLink, ConditionsHoldForAllN) {
  for (int N = 3; N <= 200; ++N) {
    const PiecewiseLinearLink g = log_link_net(N);
    const double logN = std::log(static_cast<double>(N));
    ASSERT_EQ(g.net.neurons.size(), static_cast<std::size_t>(2 * N));
    ASSERT_LE(scalar_norm(g.net), 6.0 * N);
    double worst = 0.0;
    for (int i = 0; i <= 10000; ++i) {
      const double t = i / 10000.0;
      const double v = g(t);
      ASSERT_LE(std::abs(v), logN + 1e-12) << N << " " << t;
      ASSERT_NEAR(v, g.closed_form(t), 1e-12) << N << " " << t;
      worst = std::max(worst, std::abs(logistic(v) - t));
    }
    ASSERT_LE(worst, 3.0 / N) << N;
    for (double t : {-5.0, -1.0, -1e-3, 0.0}) ASSERT_NEAR(g(t), -logN, 1e-12) << N;
    for (double t : {1.0, 1.001, 2.0, 7.0}) ASSERT_NEAR(g(t), logN, 1e-12) << N;
  }
}

TEST(LogLink, RejectsSmallN) { EXPECT_THROW(log_link_net(2), PreconditionError); }

TEST(SignLink, Values) {
  const double u = 0.1;
  const PiecewiseLinearLink g = sign_link_net(u);
  EXPECT_EQ(g.net.neurons.size(), 3u);
  EXPECT_EQ(g(0.0), 0.0);
  EXPECT_NEAR(g(2 * u), 1.0, 1e-14);
  EXPECT_NEAR(g(-2 * u), -1.0, 1e-14);
  for (int i = 0; i <= 10000; ++i) {
    const double t = -1.0 + 2.0 * i / 10000.0;
    ASSERT_NEAR(g(t), std::clamp(t / u, -1.0, 1.0), 1e-14) << t;
    ASSERT_NEAR(g(t), g.closed_form(t), 1e-14) << t;
  }
  EXPECT_THROW(sign_link_net(0.0), PreconditionError);
  EXPECT_THROW(sign_link_net(1.0), PreconditionError);
}

TEST(HingeExcess, Examples) {
  const XSampler x = uniform_sampler(2);
  const ScalarField eta = first_coordinate();
  const ScalarField bayes = [](std::span<const double> v) { return sign_of(2 * v[0] - 1); };
  EXPECT_EQ(hinge_excess_risk(bayes, eta, x, 1000, 1).value, 0.0);
  const RiskEstimate two = hinge_excess_risk(constant(-1), constant(1), x, 100, 1);
  EXPECT_EQ(two.value, 2.0);
  EXPECT_EQ(two.standard_error, 0.0);
  EXPECT_EQ(two.samples, 100);
  // Quadrature: 2 * int_0^{1/2} (1 - 2t) dt = 1/2.
  const RiskEstimate half = hinge_excess_risk(constant(1), eta, x, 100000, 3);
  EXPECT_NEAR(half.value, 0.5, 4 * half.standard_error);
  EXPECT_GT(half.standard_error, 0.0);
  EXPECT_THROW(hinge_excess_risk(constant(1.5), eta, x, 100, 1), PreconditionError);
}

TEST(LogisticExcess, Examples) {
  const XSampler x = uniform_sampler(2);
  const ScalarField eta = [](std::span<const double> v) { return 0.1 + 0.8 * v[0]; };
  const ScalarField bayes = [](std::span<const double> v) {
    const double e = 0.1 + 0.8 * v[0];
    return std::log(e / (1 - e));
  };
  EXPECT_NEAR(logistic_excess_risk(bayes, eta, x, 1000, 1).value, 0.0, 1e-14);
  EXPECT_EQ(logistic_excess_risk(constant(0), constant(0.5), x, 100, 1).value, 0.0);
  EXPECT_NEAR(logistic_excess_risk(constant(std::log(3.0)), constant(0.5), x, 100, 1).value,
              kl_divergence(0.5, 0.75), 1e-15);
  EXPECT_EQ(logistic_excess_risk(constant(-kInf), constant(0.5), x, 100, 1).value, kInf);
}

TEST(ClassificationExcess, Examples) {
  const XSampler x = uniform_sampler(2);
  const ScalarField eta = first_coordinate();
  const ScalarField aligned = [](std::span<const double> v) { return 3 * (v[0] - 0.5); };
  EXPECT_EQ(classification_excess_risk(aligned, eta, x, 1000, 1).value, 0.0);
  EXPECT_EQ(classification_excess_risk(constant(-1), constant(1), x, 100, 1).value, 1.0);
}

TEST(MonteCarlo, DeterministicGivenSeed) {
  const XSampler x = uniform_sampler(3);
  const ScalarField eta = first_coordinate();
  const auto a = hinge_excess_risk(constant(0.3), eta, x, 5000, 42);
  const auto b = hinge_excess_risk(constant(0.3), eta, x, 5000, 42);
  const auto c = hinge_excess_risk(constant(0.3), eta, x, 5000, 43);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.standard_error, b.standard_error);
  EXPECT_NE(a.value, c.value);
  EXPECT_EQ(a.seed, 42u);
}

TEST(HingeCalibration, RandomInstances) {
  Rng rng(13);
  const XSampler x = uniform_sampler(2);
  for (int trial = 0; trial < 20; ++trial) {
    const ScalarField lin = random_affine(rng, 2, 2.0);
    const ScalarField f = [lin](std::span<const double> v) { return std::clamp(lin(v), -1.0, 1.0); };
    const ScalarField z = random_affine(rng, 2, 4.0);
    const ScalarField eta = [z](std::span<const double> v) { return logistic(z(v)); };
    const InequalityReport r = check_hinge_calibration(f, eta, x, 20000, trial);
    ASSERT_TRUE(r.passed) << trial;
    const RiskEstimate R = classification_excess_risk(f, eta, x, 20000, trial);
    const RiskEstimate H = hinge_excess_risk(f, eta, x, 20000, trial);
    ASSERT_LE(R.value, H.value + 3 * std::hypot(R.standard_error, H.standard_error)) << trial;
  }
}

TEST(LogisticCalibration, UniformMargin) {
  // eta(x) = x_1 under uniform X: P(|2 eta - 1| <= t) = t, so q = 1 and c_q = 1.
  Rng rng(14);
  const XSampler x = uniform_sampler(2);
  for (int trial = 0; trial < 10; ++trial) {
    const ScalarField f = random_affine(rng, 2, 3.0);
    const CalibrationReport r = check_logistic_calibration(f, first_coordinate(), 1.0, 1.0, x, 20000, trial);
    ASSERT_TRUE(r.passed) << trial;
  }
  // Hard margin (q = infinity): eta in {0.1, 0.9}.
  const ScalarField hard = [](std::span<const double> v) { return v[0] < 0.5 ? 0.1 : 0.9; };
  const CalibrationReport r = check_logistic_calibration(constant(-0.2), hard, kInf, 1.0, x, 20000, 1);
  EXPECT_TRUE(r.passed);
  EXPECT_NEAR(r.bound, 4.0 * (r.surrogate.value + 3 * r.surrogate.standard_error), 1e-15);
}

TEST(Log2Inequality, Examples) {
  const double u = std::exp(-2.0);
  const Log2Sides eq = log2_inequality(0.3, 0.3, u);
  EXPECT_EQ(eq.lhs, 0.0);
  EXPECT_EQ(eq.rhs, 0.0);
  EXPECT_EQ(eq.slack, 0.0);
  const Log2Sides corner = log2_inequality(1.0, u, u);
  EXPECT_NEAR(corner.lhs, 4.0, 1e-14);
  EXPECT_NEAR(corner.rhs, 4.0 * (1.0 + u), 1e-14);
  EXPECT_GT(corner.slack, 0.0);
  for (double q : {u, 0.5, 1.0}) {
    const Log2Sides zero = log2_inequality(0.0, q, u);
    EXPECT_EQ(zero.lhs, 0.0);
    EXPECT_NEAR(zero.rhs, q * 4.0, 1e-14);
  }
  EXPECT_THROW(log2_inequality(0.5, 0.5, 0.2), PreconditionError);
  EXPECT_THROW(log2_inequality(0.5, 0.01, u), PreconditionError);
}

TEST(Log2Inequality, FullGrid) {
  const Log2Report r = check_log2_inequality(500, 5);
  EXPECT_EQ(r.points, 500 * 500 * 5);
  EXPECT_EQ(r.violations, 0);
  EXPECT_TRUE(r.passed);
  EXPECT_GE(r.min_slack, 0.0);
  EXPECT_EQ(r.u_values.front(), std::exp(-2.0));
}

TEST(LogisticVariance, ConstantExample) {
  const XSampler x = uniform_sampler(2);
  const InequalityReport r = check_logistic_variance_bound(constant(2.0), constant(0.5), 2.0, x, 100, 1);
  const double l1 = std::log((1 + std::exp(-2.0)) / 2), l2 = std::log((1 + std::exp(2.0)) / 2);
  EXPECT_NEAR(r.lhs, 0.5 * l1 * l1 + 0.5 * l2 * l2, 1e-14);
  EXPECT_NEAR(r.rhs, 6.0 * kl_divergence(0.5, logistic(2.0)), 1e-14);
  EXPECT_TRUE(r.passed);
}

TEST(LogisticVariance, BayesGivesZero) {
  const XSampler x = uniform_sampler(2);
  const ScalarField eta = [](std::span<const double> v) { return 0.2 + 0.6 * v[1]; };
  const ScalarField bayes = [eta](std::span<const double> v) {
    const double e = eta(v);
    return std::log(e / (1 - e));
  };
  const InequalityReport r = check_logistic_variance_bound(bayes, eta, 2.0, x, 1000, 1);
  EXPECT_NEAR(r.lhs, 0.0, 1e-20);
  EXPECT_NEAR(r.rhs, 0.0, 1e-20);
  EXPECT_TRUE(r.passed);
}

TEST(LogisticVariance, RandomInstances) {
  Rng rng(15);
  const XSampler x = uniform_sampler(2);
  for (int trial = 0; trial < 50; ++trial) {
    const double B = rng.uniform(2.0, 6.0);
    const ScalarField z = random_affine(rng, 2, 3.0);
    const ScalarField f = [z, B](std::span<const double> v) { return B * std::tanh(z(v)); };
    const ScalarField e = random_affine(rng, 2, 5.0);
    const ScalarField eta = [e](std::span<const double> v) { return logistic(e(v)); };
    const InequalityReport r = check_logistic_variance_bound(f, eta, B, x, 5000, trial);
    ASSERT_TRUE(r.passed) << trial << " lhs " << r.lhs << " rhs " << r.rhs;
  }
  EXPECT_THROW(check_logistic_variance_bound(constant(1), constant(0.5), 1.5, x, 10, 1), PreconditionError);
  EXPECT_THROW(check_logistic_variance_bound(constant(3), constant(0.5), 2.0, x, 10, 1), PreconditionError);
}

TEST(KlBound, Constants) {
  const double u = 0.01;
  EXPECT_NEAR(kl_bound_value(u, 1.0, 1.0, 1.0), 2 * 8 * u * u * std::log(1 / u), 1e-18);
  EXPECT_NEAR(kl_bound_value(u, 2.0, 0.0, 1.0), 4 * 9 * u, 1e-15);
  EXPECT_NEAR(kl_bound_value(u, 1.0, 0.5, 2.0), 2 * 1.5 * 2 * std::pow(2.0, 2.5) / 0.5 * std::pow(u, 1.5), 1e-15);
}

TEST(KlBound, ClippedIdentity) {
  const double u = 0.01;
  const XSampler x = uniform_sampler(2);
  const ScalarField eta = first_coordinate();
  const ScalarField h = [u](std::span<const double> v) { return std::clamp(v[0], u, 1 - u); };
  const KlBoundReport r = check_kl_bound(eta, h, u, 1.0, 1.0, 1.0, x, 200000, 5);
  // Quadrature oracle: 2 int_0^u KL(t, u) dt, composite Simpson on 2e4 intervals.
  const int n = 20000;
  long double sum = 0.0L;
  for (int i = 0; i <= n; ++i) {
    const long double t = static_cast<long double>(u) * i / n;
    const long double uu = u;
    long double kl = (1 - t) * std::log((1 - t) / (1 - uu));
    if (t > 0) kl += t * std::log(t / uu);
    const int w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    sum += w * kl;
  }
  const double oracle = static_cast<double>(2.0L * sum * (static_cast<long double>(u) / n) / 3.0L);
  EXPECT_NEAR(r.kl.value, oracle, 4 * r.kl.standard_error);
  EXPECT_LE(oracle, r.bound);
  EXPECT_TRUE(r.passed);
}

TEST(KlBound, ZeroWhenAlreadyInRange) {
  const double u = 0.05;
  const XSampler x = uniform_sampler(2);
  const ScalarField eta = [](std::span<const double> v) { return 0.1 + 0.8 * v[0]; };
  const ScalarField h = [u](std::span<const double> v) { return std::clamp(0.1 + 0.8 * v[0], u, 1 - u); };
  const KlBoundReport r = check_kl_bound(eta, h, u, 1.0, 0.0, 1.0, x, 1000, 1);
  EXPECT_EQ(r.kl.value, 0.0);
  EXPECT_TRUE(r.passed);
}

TEST(KlBound, RangeViolations) {
  const double u = 0.05;
  const XSampler x = uniform_sampler(2);
  EXPECT_THROW(check_kl_bound(first_coordinate(), first_coordinate(), u, 1.0, 1.0, 1.0, x, 100, 1),
               PreconditionError);
  EXPECT_THROW(check_kl_bound(first_coordinate(), constant(0.5), u, 1.0, 1.0, 1.0, x, 100, 1),
               PreconditionError);
}
