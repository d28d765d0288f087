// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "convrates/compiler.hpp"
#include "convrates/error.hpp"
#include "convrates/experiment.hpp"
#include "convrates/targets.hpp"
#include "convrates/training.hpp"
#include "test_util.hpp"

namespace convrates {
namespace {

using std::numbers::pi;

// ---- targets ------------------------------------------------------------

TEST(Targets, SingleSineTermHasRadiusTwo) {
  // sin(2 pi x_1) / (2 pi): sup 1/(2 pi), slope 1.
  const TargetSpec h = make_regression_target("trig-mixture", 2, {{"amplitude", 1.0 / (2 * pi)}}, 0);
  EXPECT_EQ(h.alpha, 1.0);
  EXPECT_LE(h.R, 2.0);
  EXPECT_NEAR(h.R, 1.0, 1e-12);
  const std::vector<double> x = {0.25, 0.7};
  EXPECT_NEAR(h(x), 1.0 / (2 * pi), 1e-15);
}

TEST(Targets, ConstantHasRadiusOfItsValue) {
  const TargetSpec h = make_regression_target("constant", 3, {{"value", 0.3}}, 0);
  EXPECT_EQ(h.R, 0.3);
  EXPECT_TRUE(std::isinf(h.alpha));
  const std::vector<double> x = {0.1, 0.2, 0.9};
  EXPECT_EQ(h(x), 0.3);
}

TEST(Targets, ClampHasLipschitzFour) {
  const TargetSpec h = make_regression_target("coordinate-clamp", 2, {{"slope", 4.0}}, 0);
  EXPECT_EQ(h.alpha, 1.0);
  EXPECT_EQ(h.R, 4.0);
  const std::vector<double> lo = {0.0, 0.5}, mid = {0.6, 0.5}, hi = {1.0, 0.1};
  EXPECT_EQ(h(lo), -1.0);
  EXPECT_NEAR(h(mid), 0.4, 1e-15);
  EXPECT_EQ(h(hi), 1.0);
  ASSERT_TRUE(h.shallow.has_value());
  for (const auto& x : {lo, mid, hi}) EXPECT_NEAR((*h.shallow)(x), h(x), 1e-15);
}

TEST(Targets, UnknownFamilyAndKeysAreRejected) {
  EXPECT_THROW(make_regression_target("spline", 2, {}, 0), PreconditionError);
  EXPECT_THROW(make_regression_target("constant", 2, {{"width", 1.0}}, 0), PreconditionError);
  EXPECT_THROW(make_eta("logit", 2, {}), PreconditionError);
  EXPECT_THROW(make_eta_svb(1.5), PreconditionError);
  EXPECT_THROW(make_eta_svb(-0.1), PreconditionError);
}

TEST(Targets, TsybakovPairForSlopeFour) {
  // |2 eta - 1| = min(4 |x_1 - 1/2|, 1): P = t/2 below t = 1 and P = 1 at t = 1,
  // so c_q = 1 is the smallest valid constant.
  const TargetSpec eta = make_eta_tsybakov(4.0);
  EXPECT_TRUE(eta.has_tsybakov);
  EXPECT_EQ(eta.q, 1.0);
  EXPECT_EQ(eta.c_q, 1.0);
  const CertificationReport rep = verify_certification(eta);
  EXPECT_TRUE(rep.tsybakov_ok);
  EXPECT_NEAR(rep.worst_tsybakov_ratio, 1.0, 1e-3);
}

TEST(Targets, SharpMarginHasInfiniteExponent) {
  const TargetSpec eta = make_eta_sharp();
  EXPECT_TRUE(std::isinf(eta.q));
  const std::vector<double> a = {0.49, 0.3}, b = {0.5, 0.3};
  EXPECT_EQ(eta(a), 0.0);
  EXPECT_EQ(eta(b), 1.0);
}

TEST(Targets, SvbIdentityPair) {
  const TargetSpec eta = make_eta_svb(1.0);
  EXPECT_TRUE(eta.has_svb);
  EXPECT_EQ(eta.svb_beta, 1.0);
  EXPECT_EQ(eta.C_beta, 1.0);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto x = testing::random_point(rng, 2);
    EXPECT_NEAR(eta(x), x[0], 1e-15);
  }
  const CertificationReport rep = verify_certification(eta);
  EXPECT_TRUE(rep.svb_ok);
  EXPECT_TRUE(rep.tsybakov_ok);
}

TEST(Targets, ConstantHalfIsConservative) {
  const TargetSpec eta = make_eta_constant(0.5);
  EXPECT_TRUE(eta.has_svb);
  EXPECT_EQ(eta.svb_beta, 1.0);
  EXPECT_EQ(eta.C_beta, 2.0);
  EXPECT_TRUE(verify_certification(eta).svb_ok);
}

TEST(Targets, CertificationOfEveryFamily) {
  for (double c : {0.5, 1.0, 2.0, 4.0, 16.0}) {
    const CertificationReport rep = verify_certification(make_eta_tsybakov(c));
    EXPECT_TRUE(rep.tsybakov_ok) << "c = " << c << " ratio " << rep.worst_tsybakov_ratio;
  }
  for (double beta : {0.0, 0.25, 0.5, 1.0}) {
    const CertificationReport rep = verify_certification(make_eta_svb(beta));
    EXPECT_TRUE(rep.svb_ok) << "beta = " << beta << " ratio " << rep.worst_svb_ratio;
    EXPECT_TRUE(rep.tsybakov_ok) << "beta = " << beta;
  }
  EXPECT_TRUE(verify_certification(make_eta_sharp()).tsybakov_ok);
}

// ---- datasets -----------------------------------------------------------

TEST(Datasets, NoiselessRegressionIsExact) {
  const TargetSpec h = make_regression_target("trig-mixture", 3, {}, 5);
  const Dataset data = sample_dataset(h, 200, parse_noise("gaussian", 0.0), 9);
  ASSERT_EQ(data.size(), 200u);
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(data.y[i], h(data.x[i]));
    for (double t : data.x[i]) {
      EXPECT_GE(t, 0.0);
      EXPECT_LT(t, 1.0);
    }
  }
}

TEST(Datasets, CertainLabelsAreAllPositive) {
  const Dataset data = sample_dataset(make_eta_constant(1.0), 500, {}, 4);
  for (double y : data.y) EXPECT_EQ(y, 1.0);
  const Dataset neg = sample_dataset(make_eta_constant(0.0), 500, {}, 4);
  for (double y : neg.y) EXPECT_EQ(y, -1.0);
}

TEST(Datasets, BinnedMeansFollowTheTarget) {
  const TargetSpec h = make_regression_target("coordinate-clamp", 2, {{"slope", 4.0}}, 0);
  const double sigma = 0.5;
  for (const char* family : {"gaussian", "bounded-uniform"}) {
    const Dataset data = sample_dataset(h, 200000, parse_noise(family, sigma), 17);
    // Noise standard deviation: sigma, or a / sqrt(3) for U[-a, a].
    const double sd = std::string(family) == "gaussian" ? sigma : sigma / std::sqrt(3.0);
    const int bins = 20;
    std::vector<double> sum(bins, 0.0), target(bins, 0.0);
    std::vector<int> count(bins, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const int b = std::min(bins - 1, static_cast<int>(data.x[i][0] * bins));
      sum[b] += data.y[i];
      target[b] += h(data.x[i]);
      ++count[b];
    }
    for (int b = 0; b < bins; ++b) {
      ASSERT_GT(count[b], 0);
      EXPECT_LE(std::abs(sum[b] - target[b]) / count[b], 4 * sd / std::sqrt(count[b])) << family << " bin " << b;
    }
  }
}

TEST(Datasets, LabelFrequencyFollowsEta) {
  const TargetSpec eta = make_eta_svb(1.0);
  const Dataset data = sample_dataset(eta, 200000, {}, 2);
  const int bins = 10;
  std::vector<double> pos(bins, 0.0), mean_eta(bins, 0.0);
  std::vector<int> count(bins, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int b = std::min(bins - 1, static_cast<int>(data.x[i][0] * bins));
    pos[b] += data.y[i] > 0;
    mean_eta[b] += eta(data.x[i]);
    ++count[b];
  }
  for (int b = 0; b < bins; ++b) {
    const double p = mean_eta[b] / count[b];
    EXPECT_LE(std::abs(pos[b] / count[b] - p), 4 * std::sqrt(p * (1 - p) / count[b]) + 1e-12) << "bin " << b;
  }
}

TEST(Datasets, Reproducible) {
  const TargetSpec h = make_regression_target("gaussian-bump-mixture", 2, {}, 1);
  const Dataset a = sample_dataset(h, 300, parse_noise("gaussian", 0.3), 8);
  const Dataset b = sample_dataset(h, 300, parse_noise("gaussian", 0.3), 8);
  const Dataset c = sample_dataset(h, 300, parse_noise("gaussian", 0.3), 9);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_NE(a.y, c.y);
}

TEST(Datasets, UnknownNoiseIsRejected) {
  EXPECT_THROW(parse_noise("cauchy", 1.0), PreconditionError);
  EXPECT_THROW(parse_noise("gaussian", -1.0), PreconditionError);
}

// ---- training -----------------------------------------------------------

TEST(Training, RealizableLinearTargetIsFitted) {
  // h(x) = 0.2 + 0.3 x_1 - 0.1 x_2 is a shallow net (all ReLU arguments
  // positive on the cube), hence realizable.
  TargetSpec h;
  h.kind = TargetKind::regression;
  h.d = 2;
  h.fn = [](std::span<const double> x) { return 0.2 + 0.3 * x[0] - 0.1 * x[1]; };
  const Dataset data = sample_dataset(h, 128, parse_noise("gaussian", 0.0), 3);
  TrainConfig cfg;
  cfg.s = 2;
  cfg.J = 2;
  cfg.L = 1;
  cfg.M = 10;
  cfg.B = 1;
  cfg.epochs = 300;
  cfg.batch = 16;
  cfg.learning_rate = 1e-2;
  cfg.seed = 1;
  const TrainResult fit = train_erm(data, cfg);
  EXPECT_LE(fit.final_risk, 1e-3);
  EXPECT_LE(fit.final_risk, fit.initial_risk);
  EXPECT_LE(kappa(fit.params), cfg.M * (1 + 1e-12));
}

TEST(Training, CompiledSeparatorHasZeroHingeRisk) {
  // Labels are -1 for x_1 < 0.4 and +1 for x_1 > 0.6. The shallow net
  // 10 relu(x_1 - 0.5) - 10 relu(0.5 - x_1) has margin at least 1 there.
  ShallowNet sep;
  sep.d = 2;
  sep.neurons = {{10.0, {1.0, 0.0}, -0.5}, {-10.0, {-1.0, 0.0}, 0.5}};
  Dataset data;
  data.d = 2;
  data.kind = TargetKind::classification;
  Rng rng(12);
  while (data.size() < 200) {
    auto x = testing::random_point(rng, 2);
    if (std::abs(x[0] - 0.5) < 0.1) continue;
    data.y.push_back(x[0] > 0.5 ? 1.0 : -1.0);
    data.x.push_back(std::move(x));
  }
  const CnnParams compiled = shallow_to_cnn(sep, 2);
  EXPECT_EQ(empirical_risk(compiled, 1.0, Loss::hinge, data), 0.0);

  TrainConfig cfg;
  cfg.loss = Loss::hinge;
  cfg.s = 2;
  cfg.J = 2;
  cfg.L = 1;
  cfg.M = 2 * kappa(compiled);
  cfg.epochs = 200;
  cfg.batch = 16;
  cfg.learning_rate = 2e-2;
  cfg.seed = 4;
  const TrainResult fit = train_erm(data, cfg);
  EXPECT_EQ(fit.B, 1.0);
  EXPECT_EQ(fit.final_risk, 0.0);
}

TEST(Training, ReturnedRiskNeverExceedsInitialisation) {
  const TargetSpec eta = make_eta_tsybakov(2.0);
  const TargetSpec h = make_regression_target("trig-mixture", 2, {}, 3);
  for (Loss loss : {Loss::squared, Loss::hinge, Loss::logistic}) {
    const TargetSpec& spec = loss == Loss::squared ? h : eta;
    const Dataset data = sample_dataset(spec, 100, parse_noise("gaussian", 0.5), 6);
    for (int L : {1, 3, 6}) {
      TrainConfig cfg;
      cfg.loss = loss;
      cfg.J = 3;
      cfg.L = L;
      cfg.M = 5;
      cfg.B = 2;
      cfg.epochs = 5;
      cfg.seed = 10 + L;
      for (Parametrization p : {Parametrization::projected, Parametrization::normalised}) {
        cfg.parametrization = p;
        const TrainResult fit = train_erm(data, cfg);
        EXPECT_LE(fit.final_risk, fit.initial_risk) << loss_name(loss) << " L=" << L;
        EXPECT_LE(kappa(fit.params), cfg.M * (1 + 1e-12)) << loss_name(loss) << " L=" << L;
        EXPECT_EQ(fit.final_risk, empirical_risk(fit.params, fit.B, loss, data));
        ASSERT_EQ(fit.trace.size(), static_cast<std::size_t>(cfg.restarts));
        EXPECT_EQ(fit.trace[0].size(), static_cast<std::size_t>(cfg.epochs + 1));
        EXPECT_EQ(fit.trace[0][0], fit.initial_risk);
      }
    }
  }
}

TEST(Training, Deterministic) {
  const TargetSpec h = make_regression_target("gaussian-bump-mixture", 2, {}, 2);
  const Dataset data = sample_dataset(h, 150, parse_noise("gaussian", 0.2), 1);
  TrainConfig cfg;
  cfg.L = 3;
  cfg.epochs = 4;
  cfg.seed = 77;
  const TrainResult a = train_erm(data, cfg);
  const TrainResult b = train_erm(data, cfg);
  EXPECT_EQ(flatten(a.params), flatten(b.params));
  EXPECT_EQ(a.trace, b.trace);
}

TEST(Training, ConfigValidation) {
  const Dataset data = sample_dataset(make_eta_constant(0.5), 10, {}, 0);
  TrainConfig cfg;
  cfg.loss = Loss::hinge;
  cfg.M = 0.5;
  EXPECT_THROW(train_erm(data, cfg), PreconditionError);
  cfg.M = 2;
  cfg.B = 0;
  EXPECT_THROW(train_erm(data, cfg), PreconditionError);
  cfg.B = 1;
  cfg.loss = Loss::squared;
  EXPECT_THROW(train_erm(data, cfg), PreconditionError);
  EXPECT_THROW(parse_loss("exponential"), PreconditionError);
}

// ---- excess risk --------------------------------------------------------

TEST(Excess, CompiledCopyOfShallowTarget) {
  const TargetSpec h = make_regression_target("coordinate-clamp", 2, {{"slope", 4.0}}, 0);
  ASSERT_TRUE(h.shallow.has_value());
  TrainResult copy;
  copy.params = shallow_to_cnn(*h.shallow, 2);
  copy.B = 1.0;
  const RiskEstimate est = measure_excess(copy, h, Loss::squared, 10000, 5);
  EXPECT_LE(est.value, 1e-10);
}

TEST(Excess, ZeroAgainstConstantOne) {
  const TargetSpec h = make_regression_target("constant", 2, {{"value", 1.0}}, 0);
  const ScalarField zero = [](std::span<const double>) { return 0.0; };
  const RiskEstimate est = measure_excess(zero, h, Loss::squared, 1000, 5);
  EXPECT_EQ(est.value, 1.0);
  EXPECT_EQ(est.standard_error, 0.0);
}

TEST(Excess, ZeroAgainstClampMatchesQuadrature) {
  // E h^2 for h = clamp(4 (x_1 - 1/2), -1, 1): 2 * (int_0^{1/4} 16 t^2 dt + 1/4) = 2/3.
  const TargetSpec h = make_regression_target("coordinate-clamp", 2, {{"slope", 4.0}}, 0);
  double quad = 0;
  const int K = 1000000;
  for (int k = 0; k < K; ++k) {
    const std::vector<double> x = {(k + 0.5) / K, 0.5};
    quad += h(x) * h(x);
  }
  quad /= K;
  EXPECT_NEAR(quad, 2.0 / 3.0, 1e-9);
  const ScalarField zero = [](std::span<const double>) { return 0.0; };
  const RiskEstimate est = measure_excess(zero, h, Loss::squared, 100000, 11);
  EXPECT_LE(std::abs(est.value - quad), 4 * est.standard_error);
}

TEST(Excess, BayesClassifierHasNoExcess) {
  const TargetSpec eta = make_eta_tsybakov(4.0);
  const ScalarField bayes_hinge = [&](std::span<const double> x) { return eta(x) >= 0.5 ? 1.0 : -1.0; };
  EXPECT_EQ(measure_excess(bayes_hinge, eta, Loss::hinge, 5000, 3).value, 0.0);
  const TargetSpec svb = make_eta_svb(0.0);
  const ScalarField bayes_logit = [&](std::span<const double> x) {
    const double p = svb(x);
    return std::log(p / (1 - p));
  };
  EXPECT_LE(std::abs(measure_excess(bayes_logit, svb, Loss::logistic, 5000, 3).value), 1e-14);
}

TEST(Excess, LossMustMatchTarget) {
  const ScalarField zero = [](std::span<const double>) { return 0.0; };
  EXPECT_THROW(measure_excess(zero, make_eta_svb(1.0), Loss::squared, 10, 0), PreconditionError);
  EXPECT_THROW(measure_excess(zero, make_regression_target("constant", 2, {}, 0), Loss::hinge, 10, 0),
               PreconditionError);
}

// ---- rate fitting and schedules -------------------------------------------

TEST(RateFit, ExactPowerLaw) {
  std::vector<double> n, e;
  for (int k = 8; k <= 13; ++k) {
    n.push_back(std::ldexp(1.0, k));
    e.push_back(3.0 / std::sqrt(n.back()));
  }
  const RateFit fit = fit_rate(n, e);
  EXPECT_NEAR(fit.slope, -0.5, 1e-12);
  EXPECT_NEAR(fit.intercept, std::log(3.0), 1e-12);
  for (double r : fit.residuals) EXPECT_NEAR(r, 0.0, 1e-12);
}

TEST(RateFit, ConstantErrorHasZeroSlope) {
  const RateFit fit = fit_rate({10, 20, 40, 80}, {0.1, 0.1, 0.1, 0.1});
  EXPECT_NEAR(fit.slope, 0.0, 1e-15);
}

TEST(RateFit, RejectsDegenerateInput) {
  EXPECT_THROW(fit_rate({10, 20, 40}, {1, 2, 3}), PreconditionError);
  EXPECT_THROW(fit_rate({10, 20, 40, 80}, {1, 0, 3, 4}), PreconditionError);
  EXPECT_THROW(fit_rate({10, 10, 10, 10}, {1, 2, 3, 4}), PreconditionError);
  EXPECT_THROW(fit_rate({10, 20, 40, 80}, {1, 2, 3}), PreconditionError);
}

TEST(Schedule, TheorySlopes) {
  const RateParameters rp;  // d = 2, alpha = 1, q = 1, beta = 1
  EXPECT_DOUBLE_EQ(theory_slope(Loss::squared, rp), -0.5);
  EXPECT_DOUBLE_EQ(theory_slope(Loss::hinge, rp), -0.4);
  EXPECT_DOUBLE_EQ(theory_slope(Loss::logistic, rp), -0.5);
  RateParameters zero = rp;
  zero.beta = 0;
  EXPECT_DOUBLE_EQ(theory_slope(Loss::logistic, zero), -1.0 / 3.0);
}

TEST(Schedule, RegressionExponents) {
  const RateParameters rp;
  const ScheduleConstants c;
  const std::int64_t n = 4096;
  const double logn = std::log(4096.0), base = 4096.0 / (logn * logn * logn);
  const Architecture a = rate_schedule(Loss::squared, n, rp, c);
  EXPECT_EQ(a.L, static_cast<int>(std::lround(2.0 * std::pow(base, 0.5))));
  EXPECT_NEAR(a.M, 10.0 * std::pow(base, 7.0 / 8.0), 1e-9 * a.M);
  EXPECT_NEAR(a.B, 2.0 * logn, 1e-12);
  EXPECT_EQ(rate_schedule(Loss::hinge, n, rp, c).B, 1.0);
}

TEST(Experiment, SmallRunIsDeterministic) {
  ExperimentConfig cfg;
  cfg.target = make_regression_target("coordinate-clamp", 2, {{"slope", 2.0}}, 0);
  cfg.loss = Loss::squared;
  cfg.noise = parse_noise("gaussian", 0.3);
  cfg.n_schedule = {32, 64, 128, 256};
  cfg.repeats = 2;
  cfg.seed = 5;
  cfg.train.epochs = 3;
  cfg.eval_samples = 500;
  const ExperimentResult a = run_rate_experiment(cfg);
  const ExperimentResult b = run_rate_experiment(cfg);
  ASSERT_EQ(a.cells.size(), 8u);
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    EXPECT_EQ(a.cells[i].excess_risk, b.cells[i].excess_risk);
    EXPECT_EQ(a.cells[i].seed, b.cells[i].seed);
    EXPECT_EQ(a.cells[i].wall_time, 0.0);
  }
  EXPECT_EQ(a.fit.slope, b.fit.slope);
  EXPECT_EQ(a.theory_slope, -0.5);
}

TEST(Experiment, RejectsShortOrUnsortedSchedules) {
  ExperimentConfig cfg;
  cfg.target = make_regression_target("constant", 2, {}, 0);
  cfg.n_schedule = {32, 64, 128};
  EXPECT_THROW(run_rate_experiment(cfg), PreconditionError);
  cfg.n_schedule = {32, 64, 64, 128};
  EXPECT_THROW(run_rate_experiment(cfg), PreconditionError);
  cfg.n_schedule = {32, 64, 128, 256};
  cfg.loss = Loss::hinge;
  EXPECT_THROW(run_rate_experiment(cfg), PreconditionError);
}

}  // namespace
}  // namespace convrates
