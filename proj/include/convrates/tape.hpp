// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "convrates/cnn.hpp"

namespace convrates {

/// Reusable forward/backward workspace. `forward` records pre-activations so a
/// following `backward` can accumulate the gradient without reallocating.
class Tape {
 public:
  double forward(const CnnParams& p, std::span<const double> x);

  /// Adds seed * d f / d theta (flatten order) into `grad`. Must follow a
  /// forward call on the same parameters.
  void backward(const CnnParams& p, double seed, std::span<double> grad);

 private:
  std::vector<double> input_;
  std::vector<std::vector<double>> pre_;  // per layer, d x J row-major
  std::vector<double> act_;               // relu of the previous layer
  std::vector<double> delta_;
  std::vector<double> delta_prev_;
};

}  // namespace convrates
