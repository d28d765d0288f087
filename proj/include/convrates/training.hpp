// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "convrates/cnn.hpp"
#include "convrates/links.hpp"
#include "convrates/targets.hpp"

namespace convrates {

struct NoiseSpec {
  enum class Family { gaussian, bounded_uniform };
  Family family = Family::gaussian;
  double level = 0.0;  // sigma, or half-width a of U[-a, a]
};

NoiseSpec parse_noise(const std::string& family, double level);
std::string noise_name(NoiseSpec::Family f);

struct Dataset {
  int d = 0;
  TargetKind kind = TargetKind::regression;
  std::vector<std::vector<double>> x;
  std::vector<double> y;  // real responses, or labels in {-1, +1}
  std::uint64_t seed = 0;

  std::size_t size() const { return y.size(); }
};

/// Point i uses its own stream Rng(seed, i): uniform X, then noise or label.
Dataset sample_dataset(const TargetSpec& spec, std::int64_t n, const NoiseSpec& noise, std::uint64_t seed);

enum class Loss { squared, hinge, logistic };

Loss parse_loss(const std::string& name);
std::string loss_name(Loss loss);

/// How kappa <= M is kept during training.
///   projected: after every step the output layer is scaled by M / kappa.
///   normalised: every hidden layer is used divided by max(1, its norm), so
///     kappa equals the output layer's norm, which is projected onto the
///     l1 ball of radius M. Both optimise over the same class of networks.
enum class Parametrization { projected, normalised };

Parametrization parse_parametrization(const std::string& name);
std::string parametrization_name(Parametrization p);

struct TrainConfig {
  int s = 2;
  int J = 4;
  int L = 2;
  double M = 10.0;
  Loss loss = Loss::squared;
  double B = 1.0;  // truncation level; the hinge loss always uses 1

  int epochs = 100;
  int batch = 32;
  double learning_rate = 1e-2;
  double lr_decay = 1.0;  // learning rate multiplied by this after every epoch
  int restarts = 2;
  double init_scale = 1.0;
  double deep_init_noise = 0.3;  // relative weight noise around the identity in layers 2..L
  Parametrization parametrization = Parametrization::normalised;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg, int d);

struct TrainResult {
  CnnParams params;
  double B = 1.0;                    // truncation applied at prediction time
  double initial_risk = 0.0;         // empirical risk of the first restart's initialisation
  double final_risk = 0.0;           // empirical risk of the returned parameters
  int best_restart = 0;
  std::vector<std::vector<double>> trace;  // per restart: risk at init, then after each epoch

  double predict(std::span<const double> x) const;
};

/// Truncated empirical risk of (p, B) on the data.
double empirical_risk(const CnnParams& p, double B, Loss loss, const Dataset& data);

/// Adam on minibatches with best-iterate selection across epochs and
/// restarts; kappa <= M is restored after every step by scaling the output
/// layer. Throws TrainingFailure when the risk becomes non-finite.
TrainResult train_erm(const Dataset& data, const TrainConfig& cfg);

/// Regression: E (pi_B f - h)^2. Hinge: hinge excess risk of pi_1 f.
/// Logistic: logistic excess risk of pi_B f.
RiskEstimate measure_excess(const TrainResult& fit, const TargetSpec& spec, Loss loss, std::int64_t m,
                            std::uint64_t seed);

/// Same, for an arbitrary predictor that is already truncated.
RiskEstimate measure_excess(const ScalarField& f, const TargetSpec& spec, Loss loss, std::int64_t m,
                            std::uint64_t seed);

}  // namespace convrates
