#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fudnn/nn/tensor.hpp"

namespace fudnn::nn {

// Valid (unpadded) cross-correlation. x [B, Cin, H, W], weight [Cout, Cin, kh, kw].
template <class T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::size_t in_maps, std::size_t out_maps, std::size_t kh, std::size_t kw,
         std::size_t stride_h = 1, std::size_t stride_w = 1);

  std::string kind() const override { return "conv2d"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::vector<NamedTensor<T>> params() override { return {{"bias", &bias_}, {"weight", &weight_}}; }
  void init(std::mt19937_64& rng) override;

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  std::size_t cin_, cout_, kh_, kw_, sh_, sw_;
  Tensor<T> weight_, bias_;
  Tensor<T> x_;
};

// One kh x kw kernel per feature map, no cross-map mixing. x [B, C, H, W].
template <class T>
class DepthwiseConv2d final : public Layer<T> {
 public:
  DepthwiseConv2d(std::size_t maps, std::size_t kh, std::size_t kw);

  std::string kind() const override { return "depthwise_conv2d"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::vector<NamedTensor<T>> params() override { return {{"bias", &bias_}, {"weight", &weight_}}; }
  void init(std::mt19937_64& rng) override;

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  std::size_t maps_, kh_, kw_;
  Tensor<T> weight_, bias_;
  Tensor<T> x_;
};

// Per-map normalization over (batch, H, W). Running statistics follow
// r <- momentum * r + (1 - momentum) * batch_stat (unbiased variance).
template <class T>
class BatchNorm2d final : public Layer<T> {
 public:
  explicit BatchNorm2d(std::size_t maps, double momentum = 0.9, double eps = 1e-5);

  std::string kind() const override { return "batchnorm2d"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::vector<NamedTensor<T>> params() override { return {{"beta", &beta_}, {"gamma", &gamma_}}; }
  std::vector<NamedTensor<T>> buffers() override {
    return {{"running_mean", &running_mean_}, {"running_var", &running_var_}};
  }

  Tensor<T>& gamma() { return gamma_; }
  Tensor<T>& beta() { return beta_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }

 private:
  std::size_t maps_;
  double momentum_, eps_;
  Tensor<T> gamma_, beta_, running_mean_, running_var_;
  Tensor<T> xhat_;
  std::vector<double> inv_std_;
};

template <class T>
class Elu final : public Layer<T> {
 public:
  explicit Elu(double alpha = 1.0) : alpha_(alpha) {}

  std::string kind() const override { return "elu"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;

 private:
  double alpha_;
  Tensor<T> x_;
};

// Mean over kh x kw windows; trailing remainders are dropped.
template <class T>
class AvgPool2d final : public Layer<T> {
 public:
  AvgPool2d(std::size_t kh, std::size_t kw, std::size_t stride_h, std::size_t stride_w);

  std::string kind() const override { return "avgpool2d"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;

 private:
  std::size_t kh_, kw_, sh_, sw_;
  Shape in_shape_;
};

// Inverted dropout: survivors are scaled by 1 / (1 - p) in train mode.
template <class T>
class Dropout final : public Layer<T> {
 public:
  explicit Dropout(double p, std::uint64_t seed = 0);

  std::string kind() const override { return "dropout"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> infer(const Tensor<T>& x) const override { return x; }
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  void reseed(std::uint64_t seed) override { rng_.seed(seed); }

  double p() const { return p_; }

 private:
  double p_;
  std::mt19937_64 rng_;
  std::vector<T> mask_;
};

// [B, C, 1, L] -> [B, L, C]: each time step becomes one sequence element.
template <class T>
class TimeToSequence final : public Layer<T> {
 public:
  std::string kind() const override { return "time_to_sequence"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;

 private:
  Shape in_shape_;
};

template <class T>
class Flatten final : public Layer<T> {
 public:
  std::string kind() const override { return "flatten"; }
  Shape output_shape(const Shape& input) const override { return {numel(input)}; }
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;

 private:
  Shape in_shape_;
};

// Mean over the last (time) axis: [B, C, H, W] -> [B, C * H].
template <class T>
class GlobalAvgPoolTime final : public Layer<T> {
 public:
  std::string kind() const override { return "global_avgpool_time"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;

 private:
  Shape in_shape_;
};

// y = W x + b; x [B, in], weight [out, in].
template <class T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in, std::size_t out);

  std::string kind() const override { return "dense"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::vector<NamedTensor<T>> params() override { return {{"bias", &bias_}, {"weight", &weight_}}; }
  void init(std::mt19937_64& rng) override;

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  std::size_t in_, out_;
  Tensor<T> weight_, bias_;
  Tensor<T> x_;
};

// Row-wise softmax of logits [B, n].
template <class T>
Tensor<T> softmax(const Tensor<T>& logits);

template <class T>
struct LossResult {
  double loss = 0.0;   // mean over the batch
  Tensor<T> probs;
  Tensor<T> grad;      // dL/dlogits = (probs - onehot) / B
};

template <class T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

// Index of the largest entry; ties go to the lowest index.
template <class T>
std::size_t argmax(std::span<const T> row);

} // namespace fudnn::nn
