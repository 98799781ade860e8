#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "fudnn/nn/tensor.hpp"

namespace fudnn::nn {

// Bidirectional LSTM over x [B, L, F] -> [B, L, 2H]; per step the forward
// direction's h fills [0, H) and the backward direction's h fills [H, 2H).
// Gate rows are stacked i, f, g, o.
template <class T>
class BiLstm final : public Layer<T> {
 public:
  BiLstm(std::size_t features, std::size_t hidden, double forget_bias = 1.0);

  std::string kind() const override { return "bilstm"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::vector<NamedTensor<T>> params() override;
  void init(std::mt19937_64& rng) override;

  struct Direction {
    Tensor<T> w_ih;  // [4H, F]
    Tensor<T> w_hh;  // [4H, H]
    Tensor<T> bias;  // [4H]
  };
  Direction& direction(std::size_t d) { return dir_[d]; }
  std::size_t hidden() const { return hidden_; }

 private:
  struct Cache {
    std::vector<T> gates;  // [B, L, 4H] post-activation
    std::vector<T> cell;   // [B, L, H]
    std::vector<T> out;    // [B, L, H]
  };

  Tensor<T> run(const Tensor<T>& x, Cache* caches) const;

  std::size_t features_, hidden_;
  double forget_bias_;
  Direction dir_[2];
  Tensor<T> x_;
  Cache cache_[2];
};

} // namespace fudnn::nn
