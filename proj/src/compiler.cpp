// SPDX-License-Identifier: Apache-2.0
#include "convrates/compiler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "convrates/error.hpp"

namespace convrates {

double ShallowNet::operator()(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != d) throw ShapeError("input length does not match shallow net");
  double sum = 0.0;
  for (const Neuron& n : neurons) {
    double z = n.b;
    for (int k = 0; k < d; ++k) z += n.a[k] * x[k];
    sum += n.c * std::max(z, 0.0);
  }
  return sum;
}

double ScalarNet::operator()(double t) const {
  double sum = 0.0;
  for (const ScalarNeuron& n : neurons) sum += n.c * std::max(n.a * t + n.b, 0.0);
  return sum;
}

int depth_per_neuron(int d, int s) {
  if (s < 2 || s > d) {
    throw PreconditionError("filter-size", "need 2 <= s <= d, got s=" + std::to_string(s) +
                                               ", d=" + std::to_string(d));
  }
  return (d - 1 + s - 2) / (s - 1);
}

double shallow_norm(const ShallowNet& net) {
  double m = 0.0;
  for (const Neuron& n : net.neurons) m += std::abs(n.c) * (l1_norm(n.a) + std::abs(n.b));
  return m;
}

double scalar_norm(const ScalarNet& g) {
  double m = 0.0;
  for (const ScalarNeuron& n : g.neurons) m += std::abs(n.c) * (std::abs(n.a) + std::abs(n.b));
  return m;
}

void validate(const ShallowNet& net) {
  require(net.d >= 2, "input-dimension", "d must be at least 2");
  require(!net.neurons.empty(), "neuron-count", "shallow net needs at least one neuron");
  for (const Neuron& n : net.neurons) {
    if (static_cast<int>(n.a.size()) != net.d) throw ShapeError("neuron weight length differs from d");
  }
  require(std::isfinite(shallow_norm(net)), "finite-entries", "shallow net constraint is not finite");
}

CnnParams neuron_to_cnn(std::span<const double> a, double b, double c, int s) {
  const int d = static_cast<int>(a.size());
  const int L0 = depth_per_neuron(d, s);
  CnnParams p = CnnParams::zeros(d, s, 3, L0);
  const double r = l1_norm(a) + std::abs(b);
  if (r == 0.0 || c == 0.0) return p;

  std::vector<double> an(a.begin(), a.end());
  for (double& t : an) t /= r;
  const double bn = b / r;
  const double cn = c * r;

  if (L0 == 1) {
    for (int k = 0; k < s; ++k) p.layers[0].filter.at(k, 0, 0) = an[k];
    p.layers[0].bias[0] = bn;
    p.output(0, 0) = cn;
    return p;
  }

  // Channel 0/1 carry the running inner product as relu(+v), relu(-v);
  // channel 2 shifts the input left by s-1 per layer.
  Filter& f0 = p.layers[0].filter;
  for (int k = 0; k < s; ++k) {
    f0.at(k, 0, 0) = an[k];
    f0.at(k, 1, 0) = -an[k];
  }
  f0.at(s - 1, 2, 0) = 1.0;

  for (int l = 1; l < L0; ++l) {
    Filter& f = p.layers[l].filter;
    f.at(0, 0, 0) = 1.0;
    f.at(0, 0, 1) = -1.0;
    for (int k = 1; k < s; ++k) {
      const int idx = l * (s - 1) + k;
      if (idx < d) f.at(k, 0, 2) = an[idx];
    }
    if (l + 1 < L0) {
      for (int k = 0; k < s; ++k) {
        for (int j = 0; j < 3; ++j) f.at(k, 1, j) = -f.at(k, 0, j);
      }
      f.at(s - 1, 2, 2) = 1.0;
    } else {
      p.layers[l].bias[0] = bn;
    }
  }
  p.output(0, 0) = cn;
  return p;
}

namespace {

/// Copies out-channels 0..2 of `src` into `dst`, with in-channel j of `src`
/// mapped to in-channel in_offset + j of `dst`.
void copy_neuron_block(const ConvLayer& src, ConvLayer& dst, int in_offset) {
  const Filter& f = src.filter;
  for (int k = 0; k < f.s; ++k) {
    for (int jo = 0; jo < 3; ++jo) {
      for (int ji = 0; ji < f.in; ++ji) dst.filter.at(k, jo, in_offset + ji) = f.at(k, jo, ji);
    }
  }
  for (int jo = 0; jo < 3; ++jo) dst.bias[jo] = src.bias[jo];
}

struct SumStack {
  std::vector<ConvLayer> layers;  // N L0 layers, six channels
  double last_weight = 0.0;       // output weight of the final neuron block
  double scale = 0.0;             // M / R
};

/// The N L0 hidden layers that evaluate sum_i c_i relu(a_i . x + b_i) using
/// channel 3 for the input and channels 4/5 for the positive/negative sums.
/// The realized function is scale * (last_weight * ch0 + ch4 - ch5).
SumStack build_sum_stack(const ShallowNet& net, int s, double M) {
  const int d = net.d;
  const int L0 = depth_per_neuron(d, s);
  const int N = static_cast<int>(net.neurons.size());
  const double R = std::pow(3.0, 1 - L0) / N;

  CnnParams shape = CnnParams::zeros(d, s, 6, N * L0);
  SumStack stack;
  stack.layers = std::move(shape.layers);
  if (M == 0.0) return stack;
  stack.scale = M / R;

  std::vector<CnnParams> blocks;
  std::vector<double> w11(N);
  blocks.reserve(N);
  for (int i = 0; i < N; ++i) {
    const Neuron& n = net.neurons[i];
    blocks.push_back(rescale(neuron_to_cnn(n.a, n.b, n.c * R / M, s)));
    w11[i] = blocks.back().output(0, 0);
  }

  for (int l = 0; l < N * L0; ++l) {
    if (l == 0) {
      stack.layers[0].filter.at(0, 3, 0) = 1.0;
    } else {
      for (int j = 3; j < 6; ++j) stack.layers[l].filter.at(0, j, j) = 1.0;
    }
  }
  copy_neuron_block(blocks[0].layers[0], stack.layers[0], 0);
  for (int i = 0; i < N; ++i) {
    for (int j = 1; j < L0; ++j) copy_neuron_block(blocks[i].layers[j], stack.layers[i * L0 + j], 0);
    if (i + 1 == N) break;
    ConvLayer& layer = stack.layers[(i + 1) * L0];
    copy_neuron_block(blocks[i + 1].layers[0], layer, 3);
    const double c = net.neurons[i].c;
    if (c > 0.0) layer.filter.at(0, 4, 0) = w11[i];
    if (c < 0.0) layer.filter.at(0, 5, 0) = -w11[i];
  }
  stack.last_weight = w11[N - 1];
  return stack;
}

/// Smallest M for which the read-out layer of the open construction has norm
/// at least one, so that its norm is not clamped by the v 1 in kappa.
double open_scale_floor(int L0, int N) { return 1.0 / (2.0 * std::pow(3.0, L0 - 1) * N); }

void check_bound(const CompileReport& report) {
  if (!(report.kappa <= report.kappa_bound)) {
    throw PropertyFailure("compiled kappa " + std::to_string(report.kappa) + " exceeds bound " +
                          std::to_string(report.kappa_bound));
  }
}

/// Layer writing relu(f) to channel `pos` and relu(-f) to channel `neg`.
ConvLayer readout_layer(const SumStack& stack, int s, int pos, int neg) {
  ConvLayer layer(s, 6, 6);
  const double row[6] = {stack.scale * stack.last_weight, 0.0, 0.0, 0.0, stack.scale, -stack.scale};
  for (int j = 0; j < 6; ++j) {
    layer.filter.at(0, pos, j) = row[j];
    layer.filter.at(0, neg, j) = -row[j];
  }
  return layer;
}

}  // namespace

CnnParams shallow_to_cnn(const ShallowNet& net, int s, CompileReport* report) {
  validate(net);
  const int L0 = depth_per_neuron(net.d, s);
  const int N = static_cast<int>(net.neurons.size());
  const double M = shallow_norm(net);
  SumStack stack = build_sum_stack(net, s, M);
  CnnParams p;
  p.d = net.d;
  p.s = s;
  p.J = 6;
  p.layers = std::move(stack.layers);
  p.output_weights.assign(static_cast<std::size_t>(net.d) * 6, 0.0);
  p.output(0, 0) = stack.scale * stack.last_weight;
  p.output(0, 4) = stack.scale;
  p.output(0, 5) = -stack.scale;

  CompileReport r;
  r.depth = p.depth();
  r.channels = 6;
  r.L0 = L0;
  r.kappa = kappa(p);
  r.kappa_bound = std::pow(3.0, L0 + 1) * N * M;
  check_bound(r);
  if (report) *report = r;
  return p;
}

OpenNetwork shallow_to_cnn_open(const ShallowNet& net, int s, CompileReport* report) {
  validate(net);
  const int L0 = depth_per_neuron(net.d, s);
  const int N = static_cast<int>(net.neurons.size());
  const double M = std::max(shallow_norm(net), open_scale_floor(L0, N));
  SumStack stack = build_sum_stack(net, s, M);
  OpenNetwork open;
  open.d = net.d;
  open.s = s;
  open.J = 6;
  open.layers = std::move(stack.layers);
  open.layers.push_back(readout_layer(stack, s, 0, 1));

  CompileReport r;
  r.depth = static_cast<int>(open.layers.size());
  r.channels = 6;
  r.L0 = L0;
  r.kappa = open_norm(open);
  r.kappa_bound = std::pow(3.0, L0 + 1) * N * M;
  check_bound(r);
  if (report) *report = r;
  return open;
}

Grid open_forward(const OpenNetwork& net, std::span<const double> x) {
  if (static_cast<int>(x.size()) != net.d) throw ShapeError("input length does not match network");
  Grid a = Grid::column(x);
  for (const ConvLayer& layer : net.layers) {
    a = conv_apply(layer, a);
    for (double& t : a.v) t = std::max(t, 0.0);
  }
  return a;
}

double open_norm(const OpenNetwork& net) {
  double k = 1.0;
  for (const ConvLayer& layer : net.layers) k *= std::max(layer_norm(layer), 1.0);
  return k;
}

CnnParams compose_with_scalar_net(const ShallowNet& net, const ScalarNet& g, int s,
                                  CompileReport* report) {
  validate(net);
  const int L0 = depth_per_neuron(net.d, s);
  if (g.neurons.empty()) throw PreconditionError("invalid-link", "scalar net has no neurons");
  const double M0 = scalar_norm(g);
  require(std::isfinite(M0), "invalid-link", "scalar net constraint is not finite");
  const int N = static_cast<int>(net.neurons.size());
  const int K = static_cast<int>(g.neurons.size());
  const double M = std::max(shallow_norm(net), open_scale_floor(L0, N));

  CnnParams p = CnnParams::zeros(net.d, s, 6, N * L0 + K + 1);
  CompileReport r;
  r.depth = p.depth();
  r.channels = 6;
  r.L0 = L0;
  r.kappa_bound = 36.0 * std::pow(3.0, L0) * N * M * K * M0;
  if (M0 == 0.0) {
    r.kappa = kappa(p);
    check_bound(r);
    if (report) *report = r;
    return p;
  }

  SumStack stack = build_sum_stack(net, s, M);
  for (int l = 0; l < N * L0; ++l) p.layers[l] = std::move(stack.layers[l]);
  p.layers[N * L0] = readout_layer(stack, s, 1, 2);

  // g = (2 M0 / R) sum_k c_k relu(a_k t + b_k) with |a_k| + |b_k| = 1/2.
  const double R = 1.0 / K;
  std::vector<double> ck(K, 0.0);
  for (int k = 0; k < K; ++k) {
    const ScalarNeuron& n = g.neurons[k];
    const double rk = std::abs(n.a) + std::abs(n.b);
    ConvLayer& layer = p.layers[N * L0 + 1 + k];
    for (int j = 1; j < 5; ++j) layer.filter.at(0, j, j) = 1.0;
    if (rk > 0.0) {
      const double an = n.a / (2.0 * rk);
      layer.filter.at(0, 0, 1) = an;
      layer.filter.at(0, 0, 2) = -an;
      layer.bias[0] = n.b / (2.0 * rk);
      ck[k] = n.c * rk * R / M0;
    }
    if (k > 0) {
      if (ck[k - 1] > 0.0) layer.filter.at(0, 3, 0) = ck[k - 1];
      if (ck[k - 1] < 0.0) layer.filter.at(0, 4, 0) = -ck[k - 1];
    }
  }
  const double scale = 2.0 * M0 / R;
  p.output(0, 0) = scale * ck[K - 1];
  p.output(0, 3) = scale;
  p.output(0, 4) = -scale;

  r.kappa = kappa(p);
  check_bound(r);
  if (report) *report = r;
  return p;
}

}  // namespace convrates
