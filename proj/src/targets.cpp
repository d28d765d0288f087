// SPDX-License-Identifier: Apache-2.0
#include "convrates/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "convrates/error.hpp"
#include "convrates/random.hpp"

namespace convrates {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double param(const std::map<std::string, double>& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void check_keys(const std::map<std::string, double>& params, std::initializer_list<const char*> allowed,
                const std::string& family) {
  for (const auto& [key, value] : params) {
    (void)value;
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    require(known, "target-params", "unknown parameter '" + key + "' for family " + family);
  }
}

}  // namespace

TargetSpec make_regression_target(const std::string& family, int d, const std::map<std::string, double>& params,
                                  std::uint64_t seed) {
  require(d >= 1, "dimension", "d must be positive");
  TargetSpec spec;
  spec.kind = TargetKind::regression;
  spec.family = family;
  spec.d = d;
  spec.params = params;
  std::ostringstream desc;

  if (family == "trig-mixture") {
    check_keys(params, {"terms", "amplitude", "frequency"}, family);
    std::vector<double> amp;
    std::vector<std::vector<double>> freq;
    std::vector<double> phase;
    if (params.count("amplitude") || params.count("frequency")) {
      amp.push_back(param(params, "amplitude", 1.0));
      std::vector<double> w(d, 0.0);
      w[0] = param(params, "frequency", 1.0);
      freq.push_back(w);
      phase.push_back(0.0);
    } else {
      const int terms = static_cast<int>(param(params, "terms", 3));
      require(terms >= 1, "target-params", "terms must be positive");
      Rng rng(seed, 0x7A7Aull);
      for (int k = 0; k < terms; ++k) {
        std::vector<double> w(d);
        do {
          for (double& t : w) t = static_cast<double>(rng.below(5)) - 2.0;
        } while (std::all_of(w.begin(), w.end(), [](double t) { return t == 0.0; }));
        amp.push_back(rng.uniform(-1.0, 1.0) / (k + 1));
        freq.push_back(w);
        phase.push_back(rng.uniform(0.0, kTwoPi));
      }
    }
    double sup = 0.0, lip = 0.0;
    desc << "h(x) =";
    for (std::size_t k = 0; k < amp.size(); ++k) {
      double w2 = 0.0;
      for (double t : freq[k]) w2 += t * t;
      sup += std::abs(amp[k]);
      lip += kTwoPi * std::abs(amp[k]) * std::sqrt(w2);
      desc << (k ? " +" : "") << " " << amp[k] << " sin(2 pi <(";
      for (int j = 0; j < d; ++j) desc << (j ? "," : "") << freq[k][j];
      desc << "), x> + " << phase[k] << ")";
    }
    spec.fn = [amp, freq, phase](std::span<const double> x) {
      double s = 0.0;
      for (std::size_t k = 0; k < amp.size(); ++k) {
        double z = phase[k];
        for (std::size_t j = 0; j < x.size(); ++j) z += kTwoPi * freq[k][j] * x[j];
        s += amp[k] * std::sin(z);
      }
      return s;
    };
    spec.alpha = 1.0;
    spec.R = std::max(sup, lip);
  } else if (family == "gaussian-bump-mixture") {
    check_keys(params, {"terms", "width"}, family);
    const int terms = static_cast<int>(param(params, "terms", 3));
    const double width = param(params, "width", 0.2);
    require(terms >= 1, "target-params", "terms must be positive");
    require(width > 0.0, "target-params", "width must be positive");
    Rng rng(seed, 0xB0B0ull);
    std::vector<double> amp;
    std::vector<std::vector<double>> centre;
    double sup = 0.0;
    desc << "h(x) = sum_k a_k exp(-|x - c_k|^2 / (2 * " << width << "^2)), a = (";
    for (int k = 0; k < terms; ++k) {
      std::vector<double> c(d);
      for (double& t : c) t = rng.uniform();
      amp.push_back(rng.uniform(-1.0, 1.0));
      centre.push_back(c);
      sup += std::abs(amp.back());
      desc << (k ? "," : "") << amp.back();
    }
    desc << ")";
    spec.fn = [amp, centre, width](std::span<const double> x) {
      double s = 0.0;
      for (std::size_t k = 0; k < amp.size(); ++k) {
        double r2 = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) r2 += (x[j] - centre[k][j]) * (x[j] - centre[k][j]);
        s += amp[k] * std::exp(-r2 / (2 * width * width));
      }
      return s;
    };
    // |grad exp(-r^2/(2w^2))| = (r/w^2) exp(-r^2/(2w^2)) <= e^(-1/2) / w.
    spec.alpha = 1.0;
    spec.R = std::max(sup, sup * std::exp(-0.5) / width);
  } else if (family == "coordinate-clamp") {
    check_keys(params, {"slope"}, family);
    const double slope = param(params, "slope", 4.0);
    require(slope > 0.0, "target-params", "slope must be positive");
    desc << "h(x) = clamp(" << slope << " (x_1 - 1/2), -1, 1)";
    spec.fn = [slope](std::span<const double> x) { return std::clamp(slope * (x[0] - 0.5), -1.0, 1.0); };
    spec.alpha = 1.0;
    spec.R = std::max(std::min(1.0, slope / 2), slope);
    // relu(slope x_1 - slope/2 + 1) - relu(slope x_1 - slope/2 - 1) - relu(1).
    ShallowNet net;
    net.d = d;
    std::vector<double> a(d, 0.0);
    a[0] = slope;
    net.neurons.push_back({1.0, a, 1.0 - slope / 2});
    net.neurons.push_back({-1.0, a, -1.0 - slope / 2});
    net.neurons.push_back({-1.0, std::vector<double>(d, 0.0), 1.0});
    spec.shallow = net;
  } else if (family == "constant") {
    check_keys(params, {"value"}, family);
    const double v = param(params, "value", 0.0);
    desc << "h(x) = " << v;
    spec.fn = [v](std::span<const double>) { return v; };
    spec.alpha = kInf;
    spec.R = std::abs(v);
    ShallowNet net;
    net.d = d;
    net.neurons.push_back({v, std::vector<double>(d, 0.0), 1.0});
    spec.shallow = net;
  } else {
    throw PreconditionError("target-family", "unknown regression family '" + family + "'");
  }
  spec.description = desc.str();
  return spec;
}

TargetSpec make_eta_tsybakov(double c, int d) {
  require(c > 0.0 && std::isfinite(c), "target-params", "c must be positive");
  TargetSpec spec;
  spec.kind = TargetKind::classification;
  spec.family = "tsybakov";
  spec.d = d;
  spec.params = {{"c", c}};
  std::ostringstream desc;
  desc << "eta(x) = (1 + clamp(" << c << " (x_1 - 1/2), -1, 1)) / 2";
  spec.description = desc.str();
  spec.fn = [c](std::span<const double> x) { return 0.5 * (1.0 + std::clamp(c * (x[0] - 0.5), -1.0, 1.0)); };
  spec.alpha = 1.0;
  spec.R = std::max(1.0, c / 2);
  // |2 eta - 1| = min(c |x_1 - 1/2|, 1): P(<= t) = min(2t/c, 1) for t < 1 and
  // 1 from t = 1 on, so the smallest c_q with q = 1 is max(2/c, 1).
  spec.has_tsybakov = true;
  spec.q = 1.0;
  spec.c_q = std::max(2.0 / c, 1.0);
  return spec;
}

TargetSpec make_eta_sharp(int d) {
  TargetSpec spec;
  spec.kind = TargetKind::classification;
  spec.family = "tsybakov-sharp";
  spec.d = d;
  spec.description = "eta(x) = 1{x_1 >= 1/2}";
  spec.fn = [](std::span<const double> x) { return x[0] >= 0.5 ? 1.0 : 0.0; };
  // Discontinuous: no Hoelder certificate.
  spec.alpha = 0.0;
  spec.R = kInf;
  spec.has_tsybakov = true;
  spec.q = kInf;
  spec.c_q = 1.0;
  return spec;
}

TargetSpec make_eta_svb(double beta, int d) {
  require(beta >= 0.0 && beta <= 1.0, "target-params", "beta must lie in [0,1]");
  TargetSpec spec;
  spec.kind = TargetKind::classification;
  spec.family = "svb";
  spec.d = d;
  spec.params = {{"beta", beta}};
  spec.has_svb = true;
  spec.svb_beta = beta;
  spec.C_beta = 1.0;
  if (beta == 0.0) {
    const double delta = 0.25;
    spec.description = "eta(x) = 1/4 + x_1 / 2";
    spec.fn = [delta](std::span<const double> x) { return delta + (1 - 2 * delta) * x[0]; };
    spec.alpha = 1.0;
    spec.R = 1.0;
    // |2 eta - 1| = |x_1 - 1/2|: P(<= t) = min(2t, 1).
    spec.has_tsybakov = true;
    spec.q = 1.0;
    spec.c_q = 2.0;
    return spec;
  }
  // For t <= 1/2, P(eta <= t) = 2^(beta-1) t^beta. For t = 1 - s >= 1/2,
  // 1 - P(eta <= t) = 2^(beta-1) s^beta >= s >= 1 - t^beta, so C_beta = 1.
  // |2 eta - 1| <= t on a set of mass 1 - (1 - t)^beta <= t: q = 1, c_q = 1.
  const double e = 1.0 / beta;
  std::ostringstream desc;
  desc << "eta(x) = (2 x_1)^" << e << " / 2 for x_1 < 1/2, 1 - (2 (1 - x_1))^" << e << " / 2 otherwise";
  spec.description = desc.str();
  spec.fn = [e](std::span<const double> x) {
    const double t = x[0];
    return t < 0.5 ? 0.5 * std::pow(2 * t, e) : 1.0 - 0.5 * std::pow(2 * (1 - t), e);
  };
  spec.alpha = 1.0;
  spec.R = std::max(1.0, e);
  spec.has_tsybakov = true;
  spec.q = 1.0;
  spec.c_q = 1.0;
  return spec;
}

TargetSpec make_eta_constant(double v, int d) {
  require(v >= 0.0 && v <= 1.0, "target-params", "value must lie in [0,1]");
  TargetSpec spec;
  spec.kind = TargetKind::classification;
  spec.family = "constant";
  spec.d = d;
  spec.params = {{"value", v}};
  std::ostringstream desc;
  desc << "eta(x) = " << v;
  spec.description = desc.str();
  spec.fn = [v](std::span<const double>) { return v; };
  spec.alpha = kInf;
  spec.R = v;
  spec.has_tsybakov = true;
  if (v == 0.5) {
    spec.q = 0.0;  // |2 eta - 1| = 0 everywhere
    spec.c_q = 1.0;
  } else {
    spec.q = kInf;
    spec.c_q = 1.0;
  }
  const double m = std::min(v, 1.0 - v);
  if (m > 0.0) {
    // P(eta <= t) = 1{t >= v} <= t / v.
    spec.has_svb = true;
    spec.svb_beta = 1.0;
    spec.C_beta = 1.0 / m;
  }
  return spec;
}

TargetSpec make_eta(const std::string& family, int d, const std::map<std::string, double>& params) {
  if (family == "tsybakov") {
    check_keys(params, {"c"}, family);
    return make_eta_tsybakov(param(params, "c", 4.0), d);
  }
  if (family == "tsybakov-sharp") {
    check_keys(params, {}, family);
    return make_eta_sharp(d);
  }
  if (family == "svb") {
    check_keys(params, {"beta"}, family);
    return make_eta_svb(param(params, "beta", 1.0), d);
  }
  if (family == "constant") {
    check_keys(params, {"value"}, family);
    return make_eta_constant(param(params, "value", 0.5), d);
  }
  throw PreconditionError("target-family", "unknown classification family '" + family + "'");
}

CertificationReport verify_certification(const TargetSpec& spec, int t_values, int quadrature) {
  require(spec.kind == TargetKind::classification, "target-kind", "certification applies to eta targets");
  require(t_values >= 1 && quadrature >= 100, "quadrature", "need t values and a fine grid");
  std::vector<double> eta(quadrature);
  std::vector<double> x(spec.d, 0.5);
  for (int i = 0; i < quadrature; ++i) {
    x[0] = (i + 0.5) / quadrature;
    eta[i] = spec(x);
  }
  // Midpoint counts carry at most one cell of error per level-set boundary.
  const double slack = 4.0 / quadrature;
  CertificationReport r;
  r.t_values = t_values;
  for (int k = 1; k <= t_values; ++k) {
    const double t = static_cast<double>(k) / t_values;
    double margin = 0, low = 0, high = 0;
    for (double e : eta) {
      margin += std::abs(2 * e - 1) <= t;
      low += e <= t;
      high += 1 - e <= t;
    }
    margin /= quadrature;
    low /= quadrature;
    high /= quadrature;
    if (spec.has_tsybakov) {
      const double bound = std::isinf(spec.q) ? (t < 1 ? 0.0 : spec.c_q) : spec.c_q * std::pow(t, spec.q);
      if (margin > bound + slack) r.tsybakov_ok = false;
      if (bound > 0) r.worst_tsybakov_ratio = std::max(r.worst_tsybakov_ratio, margin / bound);
    }
    if (spec.has_svb) {
      const double bound = spec.C_beta * std::pow(t, spec.svb_beta);
      if (std::max(low, high) > bound + slack) r.svb_ok = false;
      r.worst_svb_ratio = std::max(r.worst_svb_ratio, std::max(low, high) / bound);
    }
  }
  return r;
}

}  // namespace convrates
