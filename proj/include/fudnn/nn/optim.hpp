#pragma once

#include <cstdint>
#include <vector>

#include "fudnn/nn/tensor.hpp"

namespace fudnn::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// Bias-corrected Adam. Moments are kept per parameter tensor in the
// parameter's precision; the update arithmetic runs in double.
template <class T>
class Adam {
 public:
  Adam(std::vector<NamedTensor<T>> params, AdamConfig config);

  void step();
  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

 private:
  std::vector<NamedTensor<T>> params_;
  AdamConfig config_;
  std::vector<std::vector<T>> m_, v_;
  std::uint64_t t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

} // namespace fudnn::nn
