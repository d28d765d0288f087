// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "convrates/compiler.hpp"
#include "convrates/links.hpp"

namespace convrates {

enum class TargetKind { regression, classification };

/// Closed-form regression function h or class probability eta on [0,1]^d
/// (X uniform), with smoothness and noise parameters derived by hand from
/// the formula.
struct TargetSpec {
  TargetKind kind = TargetKind::regression;
  std::string family;
  std::string description;
  int d = 2;
  std::map<std::string, double> params;
  ScalarField fn;

  // Hoelder class: alpha = r + beta and R bounds max(sup |f|, Lipschitz
  // constant) when alpha = 1. Constants carry alpha = +infinity.
  double alpha = 1.0;
  double R = 0.0;

  // Tsybakov pair: P(|2 eta - 1| <= t) <= c_q t^q for all t > 0.
  bool has_tsybakov = false;
  double q = 0.0;
  double c_q = 0.0;
  // SVB pair: P(eta <= t), P(1 - eta <= t) <= C_beta t^beta on (0, 1].
  bool has_svb = false;
  double svb_beta = 0.0;
  double C_beta = 0.0;

  /// Set when the target is exactly a shallow ReLU network.
  std::optional<ShallowNet> shallow;

  double operator()(std::span<const double> x) const { return fn(x); }
};

/// Regression families:
///   trig-mixture: sum_k a_k sin(2 pi <w_k, x> + phi_k); params terms, seed
///     draw (a, w, phi) unless "amplitude"/"frequency" describe one term on x_1.
///   gaussian-bump-mixture: sum_k a_k exp(-|x - c_k|^2 / (2 w^2)); params
///     terms, width.
///   coordinate-clamp: clamp(slope (x_1 - 1/2), -1, 1); param slope.
///   constant: param value.
TargetSpec make_regression_target(const std::string& family, int d, const std::map<std::string, double>& params,
                                  std::uint64_t seed);

/// eta(x) = (1 + clamp(c (x_1 - 1/2), -1, 1)) / 2; q = 1, c_q = max(2/c, 1).
TargetSpec make_eta_tsybakov(double c, int d = 2);

/// eta(x) = 1{x_1 >= 1/2}; q = infinity.
TargetSpec make_eta_sharp(int d = 2);

/// beta in (0, 1]: eta(x) = (2 x_1)^(1/beta) / 2 below 1/2, mirrored above, so
/// P(eta <= t) <= t^beta and likewise for 1 - eta (C_beta = 1); q = 1, c_q = 1.
/// beta = 0: eta = delta + (1 - 2 delta) x_1 with delta = 1/4.
TargetSpec make_eta_svb(double beta, int d = 2);

/// eta constant v.
TargetSpec make_eta_constant(double v, int d = 2);

/// Looks up a classification family by name: tsybakov (param c),
/// tsybakov-sharp, svb (param beta), constant (param value).
TargetSpec make_eta(const std::string& family, int d, const std::map<std::string, double>& params);

struct CertificationReport {
  bool tsybakov_ok = true;
  bool svb_ok = true;
  double worst_tsybakov_ratio = 0.0;  // max over t of P / (c_q t^q)
  double worst_svb_ratio = 0.0;
  int t_values = 0;
};

/// Recomputes the marginal probabilities of eta(X) by quadrature on a fine
/// grid of x_1 and compares them with the certified pairs at t_values points
/// of (0, 1]. Intended for families where eta depends on x_1 only.
CertificationReport verify_certification(const TargetSpec& spec, int t_values = 20, int quadrature = 200000);

}  // namespace convrates
