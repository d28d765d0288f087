// SPDX-License-Identifier: Apache-2.0
#include "convrates/tape.hpp"

#include <algorithm>
#include <string>

#include "convrates/error.hpp"

namespace convrates {

double Tape::forward(const CnnParams& p, std::span<const double> x) {
  const int d = p.d;
  if (static_cast<int>(x.size()) != d) {
    throw ShapeError("input length " + std::to_string(x.size()) + " vs " + std::to_string(d));
  }
  input_.assign(x.begin(), x.end());
  pre_.resize(p.layers.size());
  const double* prev = input_.data();
  int in = 1;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const ConvLayer& layer = p.layers[l];
    const Filter& f = layer.filter;
    const int out = f.out;
    std::vector<double>& z = pre_[l];
    z.resize(static_cast<std::size_t>(d) * out);
    if (l > 0) {
      act_.resize(static_cast<std::size_t>(d) * in);
      for (std::size_t t = 0; t < act_.size(); ++t) act_[t] = std::max(prev[t], 0.0);
      prev = act_.data();
    }
    for (int i = 0; i < d; ++i) {
      double* zi = z.data() + static_cast<std::size_t>(i) * out;
      for (int jo = 0; jo < out; ++jo) zi[jo] = layer.bias[jo];
      for (int k = 0; k < f.s && i + k < d; ++k) {
        const double* a = prev + static_cast<std::size_t>(i + k) * in;
        const double* wk = f.w.data() + static_cast<std::size_t>(k) * out * in;
        for (int jo = 0; jo < out; ++jo) {
          const double* w = wk + static_cast<std::size_t>(jo) * in;
          double acc = 0.0;
          for (int ji = 0; ji < in; ++ji) acc += w[ji] * a[ji];
          zi[jo] += acc;
        }
      }
    }
    prev = z.data();
    in = out;
  }
  double value = 0.0;
  const std::vector<double>& last = pre_.back();
  for (std::size_t t = 0; t < last.size(); ++t) value += p.output_weights[t] * std::max(last[t], 0.0);
  return value;
}

void Tape::backward(const CnnParams& p, double seed, std::span<double> grad) {
  const int d = p.d;
  const int L = p.depth();
  // Offsets of each layer block inside the flattened parameter vector.
  std::vector<std::size_t> offset(L + 1, 0);
  for (int l = 0; l < L; ++l) {
    offset[l + 1] = offset[l] + p.layers[l].filter.w.size() + p.layers[l].bias.size();
  }
  const std::size_t out_offset = offset[L];
  const std::vector<double>& last = pre_.back();
  delta_.assign(last.size(), 0.0);
  for (std::size_t t = 0; t < last.size(); ++t) {
    const double a = std::max(last[t], 0.0);
    grad[out_offset + t] += seed * a;
    delta_[t] = last[t] > 0.0 ? seed * p.output_weights[t] : 0.0;
  }
  for (int l = L - 1; l >= 0; --l) {
    const ConvLayer& layer = p.layers[l];
    const Filter& f = layer.filter;
    const int out = f.out;
    const int in = f.in;
    const double* prev = l == 0 ? input_.data() : pre_[l - 1].data();
    double* gw = grad.data() + offset[l];
    double* gb = gw + f.w.size();
    if (l > 0) delta_prev_.assign(static_cast<std::size_t>(d) * in, 0.0);
    for (int i = 0; i < d; ++i) {
      const double* di = delta_.data() + static_cast<std::size_t>(i) * out;
      for (int jo = 0; jo < out; ++jo) gb[jo] += di[jo];
      for (int k = 0; k < f.s && i + k < d; ++k) {
        const double* a = prev + static_cast<std::size_t>(i + k) * in;
        const std::size_t base = static_cast<std::size_t>(k) * out * in;
        for (int jo = 0; jo < out; ++jo) {
          const double g = di[jo];
          if (g == 0.0) continue;
          const std::size_t row = base + static_cast<std::size_t>(jo) * in;
          for (int ji = 0; ji < in; ++ji) {
            const double act = l == 0 ? a[ji] : std::max(a[ji], 0.0);
            gw[row + ji] += g * act;
          }
          if (l > 0) {
            double* dp = delta_prev_.data() + static_cast<std::size_t>(i + k) * in;
            for (int ji = 0; ji < in; ++ji) dp[ji] += g * f.w[row + ji];
          }
        }
      }
    }
    if (l > 0) {
      const std::vector<double>& z = pre_[l - 1];
      for (std::size_t t = 0; t < z.size(); ++t) {
        if (!(z[t] > 0.0)) delta_prev_[t] = 0.0;
      }
      delta_.swap(delta_prev_);
    }
  }
}

}  // namespace convrates
