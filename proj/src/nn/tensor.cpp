#include "fudnn/nn/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "fudnn/error.hpp"

namespace fudnn::nn {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s.empty() ? "scalar" : s;
}

template <class T>
Tensor<T>::Tensor(Shape s, T fill) : shape(std::move(s)), data(numel(shape), fill) {
  for (auto d : shape) require(d > 0, ErrorKind::kContract, "tensor dimensions must be positive");
}

template <class T>
Tensor<T>::Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
  validate();
}

template <class T>
bool Tensor<T>::all_finite() const {
  for (auto v : data) {
    if (!std::isfinite(v)) return false;
  }
  for (auto v : grad) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <class T>
void Tensor<T>::validate() const {
  for (auto d : shape) require(d > 0, ErrorKind::kContract, "tensor dimensions must be positive");
  require(data.size() == numel(shape), ErrorKind::kContract,
          "tensor data length " + std::to_string(data.size()) + " != shape " + to_string(shape));
  require(grad.empty() || grad.size() == data.size(), ErrorKind::kContract, "gradient length mismatch");
}

template <class T>
Tensor<T> Tensor<T>::reshaped(Shape s) const {
  require(numel(s) == data.size(), ErrorKind::kContract,
          "cannot reshape " + to_string(shape) + " to " + to_string(s));
  Tensor<T> out;
  out.shape = std::move(s);
  out.data = data;
  return out;
}

template <class T>
void glorot_uniform(std::span<T> values, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : values) v = static_cast<T>(dist(rng));
}

template struct Tensor<float>;
template struct Tensor<double>;
template void glorot_uniform<float>(std::span<float>, std::size_t, std::size_t, std::mt19937_64&);
template void glorot_uniform<double>(std::span<double>, std::size_t, std::size_t, std::mt19937_64&);

} // namespace fudnn::nn
