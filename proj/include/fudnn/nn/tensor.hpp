#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace fudnn::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

enum class Mode { kTrain, kEval };

// Dense row-major tensor. The leading axis is the batch for layer inputs.
template <class T>
struct Tensor {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient is attached

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0));
  Tensor(Shape s, std::vector<T> values);

  std::size_t size() const { return data.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }
  std::size_t rank() const { return shape.size(); }
  bool has_grad() const { return !grad.empty(); }

  void zero_grad() { grad.assign(data.size(), T(0)); }
  bool all_finite() const;
  void validate() const;
  Tensor reshaped(Shape s) const;
};

template <class T>
struct NamedTensor {
  std::string name;
  Tensor<T>* tensor = nullptr;
};

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
template <class T>
void glorot_uniform(std::span<T> values, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

// A differentiable stage. infer() is the pure eval-mode map; forward_train()
// may use batch statistics and caches what backward() needs. backward() takes
// dL/dy of the last forward_train(), accumulates parameter gradients, and
// returns dL/dx.
template <class T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  // Per-sample shapes (batch axis excluded).
  virtual Shape output_shape(const Shape& input) const = 0;

  virtual Tensor<T> infer(const Tensor<T>& x) const = 0;
  virtual Tensor<T> forward_train(const Tensor<T>& x) = 0;
  virtual Tensor<T> backward(const Tensor<T>& dy) = 0;

  virtual std::vector<NamedTensor<T>> params() { return {}; }
  virtual std::vector<NamedTensor<T>> buffers() { return {}; }
  virtual void init(std::mt19937_64& /*rng*/) {}
  virtual void reseed(std::uint64_t /*seed*/) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    return mode == Mode::kTrain ? forward_train(x) : infer(x);
  }

  // Layers that can skip dx (the first layer during training) honour this and
  // return an empty tensor from backward.
  void set_input_grad(bool on) { input_grad_ = on; }

 protected:
  bool input_grad_ = true;
};

} // namespace fudnn::nn
