// SPDX-License-Identifier: Apache-2.0
#include "convrates/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "convrates/error.hpp"
#include "convrates/random.hpp"
#include "convrates/tape.hpp"

namespace convrates {

NoiseSpec parse_noise(const std::string& family, double level) {
  require(level >= 0.0 && std::isfinite(level), "noise", "noise level must be finite and nonnegative");
  if (family == "gaussian") return {NoiseSpec::Family::gaussian, level};
  if (family == "bounded-uniform") return {NoiseSpec::Family::bounded_uniform, level};
  throw PreconditionError("noise", "unknown noise family '" + family + "'");
}

std::string noise_name(NoiseSpec::Family f) {
  return f == NoiseSpec::Family::gaussian ? "gaussian" : "bounded-uniform";
}

Dataset sample_dataset(const TargetSpec& spec, std::int64_t n, const NoiseSpec& noise, std::uint64_t seed) {
  require(n >= 1, "sample-size", "n must be positive");
  Dataset data;
  data.d = spec.d;
  data.kind = spec.kind;
  data.seed = seed;
  data.x.resize(n);
  data.y.resize(n);
  for (std::int64_t i = 0; i < n; ++i) {
    Rng rng(seed, static_cast<std::uint64_t>(i));
    std::vector<double> x(spec.d);
    for (double& t : x) t = rng.uniform();
    const double v = spec(x);
    if (spec.kind == TargetKind::classification) {
      require(v >= 0.0 && v <= 1.0, "probability", "eta must take values in [0,1]");
      data.y[i] = rng.bernoulli(v) ? 1.0 : -1.0;
    } else if (noise.family == NoiseSpec::Family::gaussian) {
      data.y[i] = noise.level > 0.0 ? v + noise.level * rng.normal() : v;
    } else {
      data.y[i] = noise.level > 0.0 ? v + rng.uniform(-noise.level, noise.level) : v;
    }
    data.x[i] = std::move(x);
  }
  return data;
}

Loss parse_loss(const std::string& name) {
  if (name == "squared") return Loss::squared;
  if (name == "hinge") return Loss::hinge;
  if (name == "logistic") return Loss::logistic;
  throw PreconditionError("loss", "unknown loss '" + name + "'");
}

std::string loss_name(Loss loss) {
  switch (loss) {
    case Loss::squared: return "squared";
    case Loss::hinge: return "hinge";
    case Loss::logistic: return "logistic";
  }
  return "squared";
}

Parametrization parse_parametrization(const std::string& name) {
  if (name == "projected") return Parametrization::projected;
  if (name == "normalised") return Parametrization::normalised;
  throw PreconditionError("parametrization", "unknown parametrization '" + name + "'");
}

std::string parametrization_name(Parametrization p) {
  return p == Parametrization::projected ? "projected" : "normalised";
}

void validate(const TrainConfig& cfg, int d) {
  require(cfg.s >= 1 && cfg.s <= d, "filter-size", "need 1 <= s <= d");
  require(cfg.J >= 1 && cfg.L >= 1, "architecture", "J and L must be positive");
  require(cfg.M >= 1.0, "constraint", "M must be at least 1");
  require(cfg.B > 0.0, "truncation", "B must be positive");
  require(cfg.epochs >= 0 && cfg.batch >= 1 && cfg.restarts >= 1, "optimizer", "invalid optimizer budget");
  require(cfg.learning_rate > 0.0 && cfg.lr_decay > 0.0, "optimizer", "learning rate must be positive");
}

double TrainResult::predict(std::span<const double> x) const { return truncate(B, cnn_forward(params, x)); }

namespace {

double loss_value(Loss loss, double g, double y) {
  switch (loss) {
    case Loss::squared: return (g - y) * (g - y);
    case Loss::hinge: return std::max(0.0, 1.0 - y * g);
    case Loss::logistic: return softplus(-y * g);
  }
  return 0.0;
}

double loss_slope(Loss loss, double g, double y) {
  switch (loss) {
    case Loss::squared: return 2.0 * (g - y);
    case Loss::hinge: return y * g < 1.0 ? -y : 0.0;
    case Loss::logistic: return -y * logistic(-y * g);
  }
  return 0.0;
}

void store(CnnParams& p, std::span<const double> theta) {
  std::size_t pos = 0;
  for (ConvLayer& layer : p.layers) {
    for (double& t : layer.filter.w) t = theta[pos++];
    for (double& t : layer.bias) t = theta[pos++];
  }
  for (double& t : p.output_weights) t = theta[pos++];
}

CnnParams initialise(Rng& rng, int d, const TrainConfig& cfg) {
  CnnParams p = CnnParams::zeros(d, cfg.s, cfg.J, cfg.L);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    ConvLayer& layer = p.layers[l];
    Filter& f = layer.filter;
    // Deeper layers start near the identity so signals survive depth.
    const double a = cfg.init_scale * std::sqrt(6.0 / (f.s * f.in)) * (l > 0 ? cfg.deep_init_noise : 1.0);
    for (double& t : f.w) t = rng.uniform(-a, a);
    if (l > 0) {
      for (int j = 0; j < std::min(f.out, f.in); ++j) f.at(0, j, j) += 1.0;
    }
    for (double& t : layer.bias) t = rng.uniform(0.0, 0.1);
  }
  const double a = std::sqrt(6.0 / (d * cfg.J));
  for (double& t : p.output_weights) t = rng.uniform(-a, a);
  return p;
}

struct LayerScale {
  double m = 1.0;  // max(1, layer norm)
  int row = -1;    // output channel attaining the norm
};

// Effective parameters: every hidden layer divided by max(1, its norm).
void normalise(const CnnParams& raw, CnnParams& eff, std::vector<LayerScale>& scales) {
  eff = raw;
  scales.assign(raw.layers.size(), {});
  for (std::size_t l = 0; l < raw.layers.size(); ++l) {
    const ConvLayer& layer = raw.layers[l];
    const Filter& f = layer.filter;
    double norm = -1.0;
    for (int jo = 0; jo < f.out; ++jo) {
      double sum = std::abs(layer.bias[jo]);
      for (int k = 0; k < f.s; ++k) {
        for (int ji = 0; ji < f.in; ++ji) sum += std::abs(f.at(k, jo, ji));
      }
      if (sum > norm) {
        norm = sum;
        scales[l].row = jo;
      }
    }
    if (norm <= 1.0) continue;
    scales[l].m = norm;
    for (double& t : eff.layers[l].filter.w) t /= norm;
    for (double& t : eff.layers[l].bias) t /= norm;
  }
}

// Turns a gradient with respect to the effective parameters into one with
// respect to the raw parameters, in place.
void pull_back(const CnnParams& raw, const std::vector<LayerScale>& scales, std::span<double> grad) {
  std::size_t pos = 0;
  for (std::size_t l = 0; l < raw.layers.size(); ++l) {
    const ConvLayer& layer = raw.layers[l];
    const Filter& f = layer.filter;
    const std::size_t nw = f.w.size(), nb = layer.bias.size();
    const double m = scales[l].m;
    if (m > 1.0) {
      double dot = 0.0;
      for (std::size_t i = 0; i < nw; ++i) dot += grad[pos + i] * f.w[i];
      for (std::size_t i = 0; i < nb; ++i) dot += grad[pos + nw + i] * layer.bias[i];
      for (std::size_t i = 0; i < nw + nb; ++i) grad[pos + i] /= m;
      const double c = dot / (m * m);
      const int jo = scales[l].row;
      for (int k = 0; k < f.s; ++k) {
        for (int ji = 0; ji < f.in; ++ji) {
          const std::size_t i = f.index(k, jo, ji);
          grad[pos + i] -= c * (f.w[i] > 0 ? 1.0 : (f.w[i] < 0 ? -1.0 : 0.0));
        }
      }
      const double b = layer.bias[jo];
      grad[pos + nw + jo] -= c * (b > 0 ? 1.0 : (b < 0 ? -1.0 : 0.0));
    }
    pos += nw + nb;
  }
}

// Scales the output layer of p (and the matching tail of theta) so that
// kappa(p) <= M.
void project(CnnParams& p, std::span<double> theta, double M) {
  const double k = kappa(p);
  if (k <= M) return;
  const double scale = M / k;
  const std::size_t offset = theta.size() - p.output_weights.size();
  for (std::size_t i = 0; i < p.output_weights.size(); ++i) {
    p.output_weights[i] *= scale;
    theta[offset + i] = p.output_weights[i];
  }
}

}  // namespace

double empirical_risk(const CnnParams& p, double B, Loss loss, const Dataset& data) {
  Tape tape;
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    sum += loss_value(loss, truncate(B, tape.forward(p, data.x[i])), data.y[i]);
  }
  return sum / static_cast<double>(data.size());
}

TrainResult train_erm(const Dataset& data, const TrainConfig& cfg) {
  validate(cfg, data.d);
  require(data.size() >= 1, "sample-size", "empty dataset");
  const bool classification = cfg.loss != Loss::squared;
  require(classification == (data.kind == TargetKind::classification), "loss-kind",
          "loss " + loss_name(cfg.loss) + " does not match the dataset kind");
  const double B = cfg.loss == Loss::hinge ? 1.0 : cfg.B;
  const std::size_t n = data.size();
  const bool normalised = cfg.parametrization == Parametrization::normalised;

  TrainResult result;
  result.B = B;
  double best = std::numeric_limits<double>::infinity();
  Tape tape;

  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng(cfg.seed, static_cast<std::uint64_t>(r));
    // `raw` holds the optimised coordinates; `p` is the network they define.
    CnnParams raw = initialise(rng, data.d, cfg);
    std::vector<double> theta = flatten(raw);
    CnnParams p;
    std::vector<LayerScale> scales;
    auto refresh = [&] {
      if (normalised) {
        normalise(raw, p, scales);
        // Hidden norms are at most one, so kappa is the output layer's norm.
        project(p, theta, cfg.M);
        raw.output_weights = p.output_weights;
      } else {
        project(raw, theta, cfg.M);
        p = raw;
      }
    };
    refresh();
    std::vector<double> grad(theta.size()), m1(theta.size(), 0.0), m2(theta.size(), 0.0);
    std::vector<double> trace;

    auto record = [&](const char* when) {
      const double risk = empirical_risk(p, B, cfg.loss, data);
      if (!std::isfinite(risk)) {
        std::ostringstream msg;
        msg << "non-finite empirical risk " << when << " (restart " << r << ", epoch " << trace.size() << ")";
        throw TrainingFailure(msg.str(), trace);
      }
      trace.push_back(risk);
      if (risk < best) {
        best = risk;
        result.params = p;
        result.best_restart = r;
      }
    };
    record("at initialisation");
    if (r == 0) result.initial_risk = trace.front();

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::int64_t step = 0;
    double lr = cfg.learning_rate;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      for (std::size_t start = 0; start < n; start += cfg.batch) {
        const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch));
        std::fill(grad.begin(), grad.end(), 0.0);
        const double weight = 1.0 / static_cast<double>(stop - start);
        for (std::size_t k = start; k < stop; ++k) {
          const std::size_t i = order[k];
          const double f = tape.forward(p, data.x[i]);
          const double g = truncate(B, f);
          double slope = loss_slope(cfg.loss, g, data.y[i]);
          // Pass the gradient through the clamp only when a descent step
          // moves f back towards [-B, B].
          if ((f > B && slope < 0.0) || (f < -B && slope > 0.0)) slope = 0.0;
          if (slope != 0.0) tape.backward(p, slope * weight, grad);
        }
        if (normalised) pull_back(raw, scales, grad);
        ++step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t j = 0; j < theta.size(); ++j) {
          m1[j] = beta1 * m1[j] + (1 - beta1) * grad[j];
          m2[j] = beta2 * m2[j] + (1 - beta2) * grad[j] * grad[j];
          theta[j] -= lr * (m1[j] / c1) / (std::sqrt(m2[j] / c2) + adam_eps);
        }
        store(raw, theta);
        refresh();
      }
      lr *= cfg.lr_decay;
      record("after an epoch");
    }
    result.trace.push_back(std::move(trace));
  }
  result.final_risk = best;
  require(kappa(result.params) <= cfg.M * (1 + 1e-12), "constraint", "returned parameters violate kappa <= M");
  return result;
}

RiskEstimate measure_excess(const ScalarField& f, const TargetSpec& spec, Loss loss, std::int64_t m,
                            std::uint64_t seed) {
  const XSampler x = uniform_sampler(spec.d);
  const ScalarField target = spec.fn;
  switch (loss) {
    case Loss::squared: {
      require(spec.kind == TargetKind::regression, "loss-kind", "squared loss needs a regression target");
      return monte_carlo_mean(
          [&](std::span<const double> v) {
            const double e = f(v) - target(v);
            return e * e;
          },
          x, m, seed);
    }
    case Loss::hinge:
      require(spec.kind == TargetKind::classification, "loss-kind", "hinge loss needs an eta target");
      return hinge_excess_risk(f, target, x, m, seed);
    case Loss::logistic:
      require(spec.kind == TargetKind::classification, "loss-kind", "logistic loss needs an eta target");
      return logistic_excess_risk(f, target, x, m, seed);
  }
  return {};
}

RiskEstimate measure_excess(const TrainResult& fit, const TargetSpec& spec, Loss loss, std::int64_t m,
                            std::uint64_t seed) {
  const TrainResult* p = &fit;
  return measure_excess([p](std::span<const double> x) { return p->predict(x); }, spec, loss, m, seed);
}

}  // namespace convrates
