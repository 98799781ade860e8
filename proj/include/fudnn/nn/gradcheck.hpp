#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "fudnn/nn/network.hpp"
#include "fudnn/nn/tensor.hpp"

namespace fudnn::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<tensor>[index]" of the largest error
  std::size_t checked = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  // Denominator floor: rel = |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  // 0 checks every element; otherwise an evenly strided subset per tensor.
  std::size_t max_per_tensor = 0;
  std::uint64_t seed = 7;
};

double relative_error(double analytic, double numeric, double floor);

// Loss = sum(r * layer(x)) with a fixed random r; checks dL/dx and every
// parameter of the layer (train mode, dropout reseeded before each forward).
GradCheckResult grad_check_layer(Layer<double>& layer, const Tensor<double>& x,
                                 const GradCheckOptions& options = {});

// Mean softmax cross-entropy of the network's logits; checks dL/dx and all
// parameters.
GradCheckResult grad_check(Network<double>& net, const Tensor<double>& x, std::span<const int> labels,
                           const GradCheckOptions& options = {});

} // namespace fudnn::nn
