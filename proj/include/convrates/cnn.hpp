// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace convrates {

/// Convolution filter with entries w[k, j', j]: kernel index, out-channel,
/// in-channel. Stored flat in that index order.
struct Filter {
  int s = 1;
  int out = 1;
  int in = 1;
  std::vector<double> w;

  Filter() = default;
  Filter(int s, int out, int in);

  double& at(int k, int jo, int ji) { return w[index(k, jo, ji)]; }
  double at(int k, int jo, int ji) const { return w[index(k, jo, ji)]; }

  std::size_t index(int k, int jo, int ji) const {
    return (static_cast<std::size_t>(k) * out + jo) * in + ji;
  }
};

struct ConvLayer {
  Filter filter;
  std::vector<double> bias;

  ConvLayer() = default;
  ConvLayer(int s, int out, int in);

  int out_channels() const { return filter.out; }
  int in_channels() const { return filter.in; }
};

/// Signal of spatial length d over J channels, row-major (i, j).
struct Grid {
  int d = 0;
  int J = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(int d, int J) : d(d), J(J), v(static_cast<std::size_t>(d) * J, 0.0) {}

  double& at(int i, int j) { return v[static_cast<std::size_t>(i) * J + j]; }
  double at(int i, int j) const { return v[static_cast<std::size_t>(i) * J + j]; }

  static Grid column(std::span<const double> x);
};

/// Network f(x) = <W, relu(Conv_{L-1}(... relu(Conv_0(x))))>. Layer 0 reads a
/// single channel; later layers map J channels to J channels.
struct CnnParams {
  int d = 0;
  int s = 0;
  int J = 0;
  std::vector<ConvLayer> layers;
  std::vector<double> output_weights;  // d x J, row-major

  int depth() const { return static_cast<int>(layers.size()); }
  double& output(int i, int j) { return output_weights[static_cast<std::size_t>(i) * J + j]; }
  double output(int i, int j) const { return output_weights[static_cast<std::size_t>(i) * J + j]; }

  /// All-zero network with the given shape.
  static CnnParams zeros(int d, int s, int J, int L);
};

/// Dense d x d matrix of the one-sided padded convolution with filter w.
std::vector<std::vector<double>> conv_matrix(std::span<const double> w, int d);

Grid conv_apply(const ConvLayer& layer, const Grid& x);

/// Throws ShapeError / PreconditionError when `p` is malformed.
void validate(const CnnParams& p);

double cnn_forward(const CnnParams& p, std::span<const double> x);

/// f at each row of the n x d row-major matrix `xs`. Same arithmetic as
/// cnn_forward; zero weights are skipped, which suits compiled networks.
std::vector<double> cnn_forward_batch(const CnnParams& p, std::span<const double> xs);

/// Post-activation grids relu(Conv_l(...)) for l = 0..L-1.
std::vector<Grid> cnn_forward_trace(const CnnParams& p, std::span<const double> x);

struct Gradient {
  double value = 0.0;
  CnnParams grad;  // same shape as the parameters
};

/// Reverse-mode gradient of f(x) with respect to every parameter; relu'(0) = 0.
Gradient cnn_backward(const CnnParams& p, std::span<const double> x);

double layer_norm(const ConvLayer& layer);

double l1_norm(std::span<const double> v);

double kappa(const CnnParams& p);

/// Equivalent network whose hidden layer norms are at most one.
CnnParams rescale(const CnnParams& p);

/// Equivalent network with J2 >= J channels and L2 >= L layers.
CnnParams embed(const CnnParams& p, int J2, int L2);

/// Clamp to [-B, B]; B must be positive.
double truncate(double B, double v);

std::size_t parameter_count(const CnnParams& p);
std::vector<double> flatten(const CnnParams& p);
/// Inverse of flatten onto the shape of `shape`.
CnnParams unflatten(const CnnParams& shape, std::span<const double> theta);

}  // namespace convrates
