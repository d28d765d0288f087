// SPDX-License-Identifier: Apache-2.0
#include "convrates/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "convrates/error.hpp"
#include "convrates/tape.hpp"

namespace convrates {

namespace {

std::string dims(int a, int b) { return std::to_string(a) + " vs " + std::to_string(b); }

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double t) { return std::isfinite(t); });
}

}  // namespace

Filter::Filter(int s, int out, int in)
    : s(s), out(out), in(in), w(static_cast<std::size_t>(s) * out * in, 0.0) {
  if (s < 1 || out < 1 || in < 1) throw ShapeError("filter dimensions must be positive");
}

ConvLayer::ConvLayer(int s, int out, int in) : filter(s, out, in), bias(out, 0.0) {}

Grid Grid::column(std::span<const double> x) {
  Grid g(static_cast<int>(x.size()), 1);
  std::copy(x.begin(), x.end(), g.v.begin());
  return g;
}

CnnParams CnnParams::zeros(int d, int s, int J, int L) {
  require(d >= 2, "input-dimension", "d must be at least 2");
  require(s >= 1 && s <= d, "filter-size", "need 1 <= s <= d");
  require(J >= 1, "channel-size", "J must be positive");
  require(L >= 1, "depth", "L must be positive");
  CnnParams p;
  p.d = d;
  p.s = s;
  p.J = J;
  p.layers.reserve(L);
  p.layers.emplace_back(s, J, 1);
  for (int l = 1; l < L; ++l) p.layers.emplace_back(s, J, J);
  p.output_weights.assign(static_cast<std::size_t>(d) * J, 0.0);
  return p;
}

std::vector<std::vector<double>> conv_matrix(std::span<const double> w, int d) {
  const int s = static_cast<int>(w.size());
  if (s < 1 || s > d) {
    throw PreconditionError("filter-size", "filter length " + std::to_string(s) +
                                               " outside [1, " + std::to_string(d) + "]");
  }
  std::vector<std::vector<double>> T(d, std::vector<double>(d, 0.0));
  for (int i = 0; i < d; ++i) {
    for (int k = 0; k < s && i + k < d; ++k) T[i][i + k] = w[k];
  }
  return T;
}

Grid conv_apply(const ConvLayer& layer, const Grid& x) {
  const Filter& f = layer.filter;
  if (x.J != f.in) throw ShapeError("input channels " + dims(x.J, f.in));
  if (static_cast<int>(layer.bias.size()) != f.out) throw ShapeError("bias length");
  if (f.s > x.d) throw ShapeError("filter longer than signal");
  Grid y(x.d, f.out);
  for (int i = 0; i < x.d; ++i) {
    for (int jo = 0; jo < f.out; ++jo) {
      double acc = layer.bias[jo];
      for (int k = 0; k < f.s && i + k < x.d; ++k) {
        for (int ji = 0; ji < f.in; ++ji) acc += f.at(k, jo, ji) * x.at(i + k, ji);
      }
      y.at(i, jo) = acc;
    }
  }
  return y;
}

void validate(const CnnParams& p) {
  if (p.d < 2) throw PreconditionError("input-dimension", "d must be at least 2");
  if (p.s < 1 || p.s > p.d) throw PreconditionError("filter-size", "need 1 <= s <= d");
  if (p.J < 1) throw PreconditionError("channel-size", "J must be positive");
  if (p.layers.empty()) throw PreconditionError("depth", "network needs at least one layer");
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const ConvLayer& layer = p.layers[l];
    const int in = l == 0 ? 1 : p.J;
    const Filter& f = layer.filter;
    if (f.s != p.s || f.out != p.J || f.in != in) {
      throw ShapeError("layer " + std::to_string(l) + " filter shape");
    }
    if (f.w.size() != static_cast<std::size_t>(f.s) * f.out * f.in) {
      throw ShapeError("layer " + std::to_string(l) + " filter storage");
    }
    if (static_cast<int>(layer.bias.size()) != p.J) {
      throw ShapeError("layer " + std::to_string(l) + " bias length");
    }
    if (!all_finite(f.w) || !all_finite(layer.bias)) {
      throw PreconditionError("finite-entries", "layer " + std::to_string(l));
    }
  }
  if (p.output_weights.size() != static_cast<std::size_t>(p.d) * p.J) {
    throw ShapeError("output weights must be d x J");
  }
  if (!all_finite(p.output_weights)) throw PreconditionError("finite-entries", "output layer");
}

double cnn_forward(const CnnParams& p, std::span<const double> x) {
  validate(p);
  Tape tape;
  return tape.forward(p, x);
}

std::vector<double> cnn_forward_batch(const CnnParams& p, std::span<const double> xs) {
  validate(p);
  const int d = p.d;
  if (xs.size() % static_cast<std::size_t>(d) != 0) throw ShapeError("batch length is not a multiple of d");
  const std::size_t n = xs.size() / d;
  constexpr std::size_t kChunk = 64;
  std::vector<double> out(n), a, z, acc(kChunk);
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t B = std::min(kChunk, n - start);
    // Layout (i, j, b).
    int in = 1;
    a.assign(static_cast<std::size_t>(d) * B, 0.0);
    for (int i = 0; i < d; ++i) {
      for (std::size_t b = 0; b < B; ++b) a[i * B + b] = xs[(start + b) * d + i];
    }
    for (const ConvLayer& layer : p.layers) {
      const Filter& f = layer.filter;
      const int fo = f.out;
      z.assign(static_cast<std::size_t>(d) * fo * B, 0.0);
      for (int i = 0; i < d; ++i) {
        double* zi = z.data() + static_cast<std::size_t>(i) * fo * B;
        for (int jo = 0; jo < fo; ++jo) std::fill(zi + jo * B, zi + (jo + 1) * B, layer.bias[jo]);
        for (int k = 0; k < f.s && i + k < d; ++k) {
          const double* ak = a.data() + static_cast<std::size_t>(i + k) * in * B;
          for (int jo = 0; jo < fo; ++jo) {
            std::fill(acc.begin(), acc.begin() + B, 0.0);
            for (int ji = 0; ji < in; ++ji) {
              const double w = f.at(k, jo, ji);
              if (w == 0.0) continue;
              const double* av = ak + static_cast<std::size_t>(ji) * B;
              for (std::size_t b = 0; b < B; ++b) acc[b] += w * av[b];
            }
            double* zo = zi + static_cast<std::size_t>(jo) * B;
            for (std::size_t b = 0; b < B; ++b) zo[b] += acc[b];
          }
        }
      }
      for (double& t : z) t = std::max(t, 0.0);
      a.swap(z);
      in = fo;
    }
    for (std::size_t b = 0; b < B; ++b) out[start + b] = 0.0;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < in; ++j) {
        const double w = p.output(i, j);
        const double* av = a.data() + (static_cast<std::size_t>(i) * in + j) * B;
        for (std::size_t b = 0; b < B; ++b) out[start + b] += w * av[b];
      }
    }
  }
  return out;
}

std::vector<Grid> cnn_forward_trace(const CnnParams& p, std::span<const double> x) {
  validate(p);
  if (static_cast<int>(x.size()) != p.d) throw ShapeError("input length " + dims(static_cast<int>(x.size()), p.d));
  std::vector<Grid> trace;
  trace.reserve(p.layers.size());
  Grid a = Grid::column(x);
  for (const ConvLayer& layer : p.layers) {
    a = conv_apply(layer, a);
    for (double& t : a.v) t = std::max(t, 0.0);
    trace.push_back(a);
  }
  return trace;
}

Gradient cnn_backward(const CnnParams& p, std::span<const double> x) {
  validate(p);
  Tape tape;
  Gradient g;
  g.value = tape.forward(p, x);
  std::vector<double> flat(parameter_count(p), 0.0);
  tape.backward(p, 1.0, flat);
  g.grad = unflatten(p, flat);
  return g;
}

double layer_norm(const ConvLayer& layer) {
  const Filter& f = layer.filter;
  double best = 0.0;
  for (int jo = 0; jo < f.out; ++jo) {
    double sum = std::abs(layer.bias[jo]);
    for (int k = 0; k < f.s; ++k) {
      for (int ji = 0; ji < f.in; ++ji) sum += std::abs(f.at(k, jo, ji));
    }
    best = std::max(best, sum);
  }
  return best;
}

double l1_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double t : v) sum += std::abs(t);
  return sum;
}

double kappa(const CnnParams& p) {
  if (p.layers.empty()) throw PreconditionError("depth", "network needs at least one layer");
  double k = l1_norm(p.output_weights);
  for (const ConvLayer& layer : p.layers) k *= std::max(layer_norm(layer), 1.0);
  return k;
}

CnnParams rescale(const CnnParams& p) {
  validate(p);
  CnnParams q = p;
  double cumulative = 1.0;
  for (ConvLayer& layer : q.layers) {
    const double m = std::max(layer_norm(layer), 1.0);
    cumulative *= m;
    for (double& t : layer.filter.w) t /= m;
    for (double& t : layer.bias) t /= cumulative;
  }
  for (double& t : q.output_weights) t *= cumulative;
  return q;
}

CnnParams embed(const CnnParams& p, int J2, int L2) {
  validate(p);
  if (J2 < p.J) throw PreconditionError("embed-target", "channel size cannot shrink");
  if (L2 < p.depth()) throw PreconditionError("embed-target", "depth cannot shrink");
  CnnParams q = CnnParams::zeros(p.d, p.s, J2, L2);
  for (int l = 0; l < p.depth(); ++l) {
    const ConvLayer& src = p.layers[l];
    ConvLayer& dst = q.layers[l];
    for (int k = 0; k < p.s; ++k) {
      for (int jo = 0; jo < p.J; ++jo) {
        for (int ji = 0; ji < src.filter.in; ++ji) dst.filter.at(k, jo, ji) = src.filter.at(k, jo, ji);
      }
    }
    std::copy(src.bias.begin(), src.bias.end(), dst.bias.begin());
  }
  for (int l = p.depth(); l < L2; ++l) {
    for (int j = 0; j < J2; ++j) q.layers[l].filter.at(0, j, j) = 1.0;
  }
  for (int i = 0; i < p.d; ++i) {
    for (int j = 0; j < p.J; ++j) q.output(i, j) = p.output(i, j);
  }
  return q;
}

double truncate(double B, double v) {
  if (!(B > 0.0)) throw PreconditionError("truncation-level", "B must be positive");
  return std::clamp(v, -B, B);
}

std::size_t parameter_count(const CnnParams& p) {
  std::size_t n = p.output_weights.size();
  for (const ConvLayer& layer : p.layers) n += layer.filter.w.size() + layer.bias.size();
  return n;
}

std::vector<double> flatten(const CnnParams& p) {
  std::vector<double> theta;
  theta.reserve(parameter_count(p));
  for (const ConvLayer& layer : p.layers) {
    theta.insert(theta.end(), layer.filter.w.begin(), layer.filter.w.end());
    theta.insert(theta.end(), layer.bias.begin(), layer.bias.end());
  }
  theta.insert(theta.end(), p.output_weights.begin(), p.output_weights.end());
  return theta;
}

CnnParams unflatten(const CnnParams& shape, std::span<const double> theta) {
  if (theta.size() != parameter_count(shape)) throw ShapeError("parameter vector length");
  CnnParams q = shape;
  std::size_t pos = 0;
  auto take = [&](std::vector<double>& dst) {
    std::copy(theta.begin() + static_cast<std::ptrdiff_t>(pos),
              theta.begin() + static_cast<std::ptrdiff_t>(pos + dst.size()), dst.begin());
    pos += dst.size();
  };
  for (ConvLayer& layer : q.layers) {
    take(layer.filter.w);
    take(layer.bias);
  }
  take(q.output_weights);
  return q;
}

}  // namespace convrates
