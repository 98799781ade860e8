#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fudnn/nn/tensor.hpp"

namespace fudnn::nn {

// Layer prefixes compared in the ablation. Only FuDNN multiplies its input by
// connectivity weights.
enum class Variant { kCnnI, kCnnII, kCnnIII, kFuDNN };

inline constexpr std::array<Variant, 4> kAllVariants{Variant::kCnnI, Variant::kCnnII, Variant::kCnnIII,
                                                      Variant::kFuDNN};

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);

using ShapeTrace = std::vector<std::pair<std::string, Shape>>;

struct NetworkSpec {
  std::size_t channels = 64;
  std::size_t samples = 500;
  std::size_t n_classes = 4;
  std::size_t conv1_maps = 40;
  std::size_t conv1_len = 50;
  std::size_t conv2_maps = 80;
  std::size_t conv2_len = 50;
  std::size_t pool_len = 7;
  std::size_t pool_stride = 7;
  double dropout = 0.5;
  std::size_t lstm_hidden = 100;
  double lstm_forget_bias = 1.0;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;
  Variant variant = Variant::kFuDNN;
  // Per-block output shapes the built network must realize; empty = unchecked.
  std::vector<Shape> expected_trace;

  // Full-size architecture: 64 x 500 input, 40/80 maps of 1 x 50, BiLSTM 100.
  static NetworkSpec table_one(std::size_t n_classes = 4);
  // Same layer kinds and pooling at reduced widths, for single-core training.
  static NetworkSpec desk(std::size_t n_classes = 4);
  // Tiny instance for finite-difference checks.
  static NetworkSpec gradcheck_scaled(std::size_t n_classes = 3);

  bool uses_channel_weights() const { return variant == Variant::kFuDNN; }
  Shape input_shape() const { return {1, channels, samples}; }
  void validate() const;
  NetworkSpec with_variant(Variant v) const;

  nlohmann::json to_json() const;
  static NetworkSpec from_json(const nlohmann::json& j);
};

template <class T>
class Network {
 public:
  struct Block {
    std::string name;
    std::vector<std::unique_ptr<Layer<T>>> layers;
  };

  // Builds the block stack for spec.variant, initializes parameters from
  // `seed`, and checks the realized shape trace against spec.expected_trace.
  Network(NetworkSpec spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::vector<Block>& blocks() { return blocks_; }

  // Symbolic per-block output shapes for a single sample.
  ShapeTrace shape_trace() const;
  // Per-block shapes observed while running infer() on x (batch axis dropped).
  ShapeTrace forward_trace(const Tensor<T>& x) const;

  Tensor<T> infer(const Tensor<T>& x) const;  // logits
  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  // With input_grad false the returned tensor is empty (saves the first
  // layer's dx during training).
  Tensor<T> backward(const Tensor<T>& dlogits, bool input_grad = true);

  // Trainable tensors, "<block>.<layer index>.<name>" in layer order.
  std::vector<NamedTensor<T>> params();
  // Parameters and buffers: layer order, then lexicographic name per layer.
  std::vector<NamedTensor<T>> state();
  std::size_t parameter_count();

  void zero_grad();
  void reseed_dropout(std::uint64_t seed);

 private:
  void build();

  NetworkSpec spec_;
  std::vector<Block> blocks_;
};

extern template class Network<float>;
extern template class Network<double>;

} // namespace fudnn::nn
