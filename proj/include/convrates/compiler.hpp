// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "convrates/cnn.hpp"

namespace convrates {

struct Neuron {
  double c = 0.0;
  std::vector<double> a;
  double b = 0.0;
};

/// x -> sum_i c_i relu(a_i . x + b_i) on R^d.
struct ShallowNet {
  int d = 0;
  std::vector<Neuron> neurons;

  double operator()(std::span<const double> x) const;
};

struct ScalarNeuron {
  double c = 0.0;
  double a = 0.0;
  double b = 0.0;
};

/// t -> sum_k c_k relu(a_k t + b_k).
struct ScalarNet {
  std::vector<ScalarNeuron> neurons;

  double operator()(double t) const;
};

struct CompileReport {
  int depth = 0;
  int channels = 0;
  int L0 = 0;
  double kappa = 0.0;
  double kappa_bound = 0.0;
};

/// Hidden layers of a network without its linear output layer.
struct OpenNetwork {
  int d = 0;
  int s = 0;
  int J = 0;
  std::vector<ConvLayer> layers;
};

/// ceil((d-1)/(s-1)) for 2 <= s <= d.
int depth_per_neuron(int d, int s);

/// sum_i |c_i| (||a_i||_1 + |b_i|).
double shallow_norm(const ShallowNet& net);

/// sum_k |c_k| (|a_k| + |b_k|).
double scalar_norm(const ScalarNet& g);

void validate(const ShallowNet& net);

/// Three-channel network of depth L0 computing c relu(a . x + b) on [0,1]^d.
/// kappa <= 3^(L0-1) |c| (||a||_1 + |b|).
CnnParams neuron_to_cnn(std::span<const double> a, double b, double c, int s);

/// Six-channel network of depth N L0 computing `net` on [0,1]^d.
CnnParams shallow_to_cnn(const ShallowNet& net, int s, CompileReport* report = nullptr);

/// Depth N L0 + 1 stack whose activated output holds relu(f) at (0,0) and
/// relu(-f) at (0,1), with zeros in the remaining channels of row 0.
OpenNetwork shallow_to_cnn_open(const ShallowNet& net, int s, CompileReport* report = nullptr);

/// Activated output grid of an open network.
Grid open_forward(const OpenNetwork& net, std::span<const double> x);

/// Product over layers of (layer_norm v 1).
double open_norm(const OpenNetwork& net);

/// Six-channel network of depth N L0 + K + 1 computing g(net(x)) on [0,1]^d.
CnnParams compose_with_scalar_net(const ShallowNet& net, const ScalarNet& g, int s,
                                  CompileReport* report = nullptr);

}  // namespace convrates
