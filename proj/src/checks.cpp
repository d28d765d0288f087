// SPDX-License-Identifier: Apache-2.0
#include "convrates/checks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "convrates/error.hpp"
#include "convrates/links.hpp"
#include "convrates/random.hpp"
#include "convrates/targets.hpp"

namespace convrates {
namespace {

ScalarField constant(double v) {
  return [v](std::span<const double>) { return v; };
}

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

CheckRow row(const std::string& check, int instance, bool closed, const InequalityReport& r) {
  return {check, instance, closed ? "closed-form" : "random", r.lhs, r.lhs_se, r.rhs, r.rhs_se, r.passed};
}

CheckRow row(const std::string& check, int instance, bool closed, const KlBoundReport& r) {
  return {check, instance, closed ? "closed-form" : "random", r.kl.value, r.kl.standard_error, r.bound, 0.0,
          r.passed};
}

CheckRow row(const std::string& check, int instance, bool closed, const CalibrationReport& r) {
  return {check,     instance, closed ? "closed-form" : "random", r.classification.value,
          r.classification.standard_error, r.bound, 0.0, r.passed};
}

constexpr int kDim = 2;

}  // namespace

const std::vector<std::string>& check_suite_names() {
  static const std::vector<std::string> names = {"logistic-variance", "kl-bound", "hinge-calibration",
                                                 "logistic-calibration"};
  return names;
}

std::vector<CheckRow> run_check_suite(const std::string& check, int random_instances, std::int64_t m,
                                      std::uint64_t seed) {
  require(random_instances >= 0, "instances", "instance count must be nonnegative");
  require(m >= 2, "samples", "need at least two draws");
  const XSampler x = uniform_sampler(kDim);
  std::vector<CheckRow> rows;
  int index = 0;

  if (check == "logistic-variance") {
    rows.push_back(row(check, index, true,
                       check_logistic_variance_bound(constant(2.0), constant(0.5), 2.0, x, m, stream_seed(seed, index))));
    ++index;
    const ScalarField eta = [](std::span<const double> v) { return 0.2 + 0.6 * v[1]; };
    const ScalarField bayes = [eta](std::span<const double> v) {
      const double e = eta(v);
      return std::log(e / (1 - e));
    };
    rows.push_back(row(check, index, true, check_logistic_variance_bound(bayes, eta, 2.0, x, m, stream_seed(seed, index))));
    ++index;
    for (int t = 0; t < random_instances; ++t, ++index) {
      Rng rng(seed, index);
      const double B = rng.uniform(2.0, 6.0);
      const ScalarField z = random_affine(rng, kDim, 3.0);
      const ScalarField f = [z, B](std::span<const double> v) { return B * std::tanh(z(v)); };
      const ScalarField e = random_affine(rng, kDim, 5.0);
      const ScalarField eta_r = [e](std::span<const double> v) { return logistic(e(v)); };
      rows.push_back(row(check, index, false, check_logistic_variance_bound(f, eta_r, B, x, m, stream_seed(seed, index))));
    }
  } else if (check == "kl-bound") {
    {
      const double u = 0.05;
      const ScalarField eta = [](std::span<const double> v) { return 0.1 + 0.8 * v[0]; };
      const ScalarField h = [u](std::span<const double> v) { return std::clamp(0.1 + 0.8 * v[0], u, 1 - u); };
      rows.push_back(row(check, index, true, check_kl_bound(eta, h, u, 1.0, 0.0, 1.0, x, m, stream_seed(seed, index))));
      ++index;
    }
    {
      const double u = 0.01;
      const ScalarField eta = [](std::span<const double> v) { return v[0]; };
      const ScalarField h = [u](std::span<const double> v) { return std::clamp(v[0], u, 1 - u); };
      rows.push_back(row(check, index, true, check_kl_bound(eta, h, u, 1.0, 1.0, 1.0, x, m, stream_seed(seed, index))));
      ++index;
    }
    for (int t = 0; t < random_instances; ++t, ++index) {
      // eta from the certified SVB family, h a bounded perturbation clipped
      // to [u, 1-u]; |h - eta| <= max(C u, u) = C u since C >= 1.
      Rng rng(seed, index);
      const double beta = t % 5 == 0 ? 0.0 : (t % 5 == 1 ? 1.0 : rng.uniform(0.05, 0.95));
      const TargetSpec eta = make_eta_svb(beta, kDim);
      const double u = rng.uniform(0.005, 0.1);
      const double C = rng.uniform(1.0, 3.0);
      const double freq = rng.uniform(1.0, 6.0), phase = rng.uniform(0.0, 2 * std::numbers::pi);
      const ScalarField h = [eta, u, C, freq, phase](std::span<const double> v) {
        const double w = std::sin(freq * (v[0] + v[1]) + phase);
        return std::clamp(eta(v) + C * u * w, u, 1 - u);
      };
      const ScalarField eta_f = [eta](std::span<const double> v) { return eta(v); };
      rows.push_back(row(check, index, false,
                         check_kl_bound(eta_f, h, u, C, eta.svb_beta, eta.C_beta, x, m, stream_seed(seed, index))));
    }
  } else if (check == "hinge-calibration") {
    for (int t = 0; t < random_instances; ++t, ++index) {
      Rng rng(seed, index);
      const ScalarField lin = random_affine(rng, kDim, 2.0);
      const ScalarField f = [lin](std::span<const double> v) { return std::clamp(lin(v), -1.0, 1.0); };
      const ScalarField z = random_affine(rng, kDim, 4.0);
      const ScalarField eta = [z](std::span<const double> v) { return logistic(z(v)); };
      rows.push_back(row(check, index, false, check_hinge_calibration(f, eta, x, m, stream_seed(seed, index))));
    }
  } else if (check == "logistic-calibration") {
    for (int t = 0; t < random_instances; ++t, ++index) {
      // Distributions with certified Tsybakov pairs.
      Rng rng(seed, index);
      TargetSpec spec;
      switch (t % 3) {
        case 0: spec = make_eta_tsybakov(rng.uniform(0.5, 8.0), kDim); break;
        case 1: spec = make_eta_svb(rng.uniform(0.2, 1.0), kDim); break;
        default: spec = make_eta_sharp(kDim); break;
      }
      const ScalarField f = random_affine(rng, kDim, 3.0);
      const ScalarField eta = [spec](std::span<const double> v) { return spec(v); };
      rows.push_back(row(check, index, false,
                         check_logistic_calibration(f, eta, spec.q, spec.c_q, x, m, stream_seed(seed, index))));
    }
  } else {
    throw PreconditionError("check", "unknown check '" + check + "'");
  }
  return rows;
}

}  // namespace convrates
