#include "fudnn/nn/optim.hpp"

#include <cmath>

#include "fudnn/error.hpp"

namespace fudnn::nn {

void AdamConfig::validate() const {
  require(lr > 0.0, ErrorKind::kConfig, "learning rate must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorKind::kConfig,
          "Adam betas must be in [0, 1)");
  require(eps > 0.0, ErrorKind::kConfig, "Adam eps must be positive");
}

template <class T>
Adam<T>::Adam(std::vector<NamedTensor<T>> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  config_.validate();
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor->size(), T(0));
    v_.emplace_back(p.tensor->size(), T(0));
  }
}

template <class T>
void Adam<T>::step() {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k].tensor;
    if (!p.has_grad()) continue;
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = static_cast<double>(p.grad[i]);
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = config_.lr * (mi / c1) / (std::sqrt(vi / c2) + config_.eps);
      p.data[i] = static_cast<T>(static_cast<double>(p.data[i]) - update);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

} // namespace fudnn::nn
