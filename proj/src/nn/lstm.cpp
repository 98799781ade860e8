#include "fudnn/nn/lstm.hpp"

#include <algorithm>
#include <cmath>

#include "fudnn/error.hpp"

namespace fudnn::nn {

namespace {

template <class T>
T sigmoid(T z) {
  return T(1) / (T(1) + std::exp(-z));
}

// out[r] += sum_c m[r, c] * v[c]
template <class T>
void gemv_add(const T* m, std::size_t rows, std::size_t cols, const T* v, T* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* mr = m + r * cols;
    T acc = 0;
#pragma omp simd reduction(+ : acc)
    for (std::size_t c = 0; c < cols; ++c) acc += mr[c] * v[c];
    out[r] += acc;
  }
}

// out[c] += sum_r m[r, c] * v[r]
template <class T>
void gemv_t_add(const T* m, std::size_t rows, std::size_t cols, const T* v, T* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* mr = m + r * cols;
    const T vr = v[r];
#pragma omp simd
    for (std::size_t c = 0; c < cols; ++c) out[c] += mr[c] * vr;
  }
}

// g[r, c] += a[r] * b[c]
template <class T>
void outer_add(const T* a, std::size_t rows, const T* b, std::size_t cols, T* g) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T ar = a[r];
    T* gr = g + r * cols;
#pragma omp simd
    for (std::size_t c = 0; c < cols; ++c) gr[c] += ar * b[c];
  }
}

} // namespace

template <class T>
BiLstm<T>::BiLstm(std::size_t features, std::size_t hidden, double forget_bias)
    : features_(features), hidden_(hidden), forget_bias_(forget_bias) {
  require(features >= 1 && hidden >= 1, ErrorKind::kConfig, "bilstm needs positive feature and hidden sizes");
  for (auto& d : dir_) {
    d.w_ih = Tensor<T>({4 * hidden, features});
    d.w_hh = Tensor<T>({4 * hidden, hidden});
    d.bias = Tensor<T>({4 * hidden});
  }
}

template <class T>
Shape BiLstm<T>::output_shape(const Shape& in) const {
  require(in.size() == 2, ErrorKind::kContract, "bilstm: expected [L, F] input, got " + to_string(in));
  require(in[0] >= 1, ErrorKind::kContract, "bilstm: empty sequence");
  require(in[1] == features_, ErrorKind::kContract,
          "bilstm: expected " + std::to_string(features_) + " features, got " + to_string(in));
  return {in[0], 2 * hidden_};
}

template <class T>
std::vector<NamedTensor<T>> BiLstm<T>::params() {
  return {{"bwd.bias", &dir_[1].bias}, {"bwd.w_hh", &dir_[1].w_hh}, {"bwd.w_ih", &dir_[1].w_ih},
          {"fwd.bias", &dir_[0].bias}, {"fwd.w_hh", &dir_[0].w_hh}, {"fwd.w_ih", &dir_[0].w_ih}};
}

template <class T>
void BiLstm<T>::init(std::mt19937_64& rng) {
  for (auto& d : dir_) {
    glorot_uniform<T>(d.w_ih.data, features_, 4 * hidden_, rng);
    glorot_uniform<T>(d.w_hh.data, hidden_, 4 * hidden_, rng);
    std::fill(d.bias.data.begin(), d.bias.data.end(), T(0));
    std::fill(d.bias.data.begin() + static_cast<std::ptrdiff_t>(hidden_),
              d.bias.data.begin() + static_cast<std::ptrdiff_t>(2 * hidden_), static_cast<T>(forget_bias_));
  }
}

template <class T>
Tensor<T> BiLstm<T>::run(const Tensor<T>& x, Cache* caches) const {
  require(x.rank() == 3, ErrorKind::kContract, "bilstm: expected [B, L, F] input, got " + to_string(x.shape));
  output_shape({x.shape[1], x.shape[2]});
  const std::size_t b_n = x.shape[0], l_n = x.shape[1], h_n = hidden_, f_n = features_;
  Tensor<T> y({b_n, l_n, 2 * h_n});
  std::vector<T> z(4 * h_n), h(h_n), c(h_n);
  for (std::size_t d = 0; d < 2; ++d) {
    const Direction& dr = dir_[d];
    if (caches) {
      caches[d].gates.assign(b_n * l_n * 4 * h_n, T(0));
      caches[d].cell.assign(b_n * l_n * h_n, T(0));
      caches[d].out.assign(b_n * l_n * h_n, T(0));
    }
    for (std::size_t b = 0; b < b_n; ++b) {
      std::fill(h.begin(), h.end(), T(0));
      std::fill(c.begin(), c.end(), T(0));
      for (std::size_t s = 0; s < l_n; ++s) {
        const std::size_t t = d == 0 ? s : l_n - 1 - s;
        std::copy(dr.bias.data.begin(), dr.bias.data.end(), z.begin());
        gemv_add(dr.w_ih.data.data(), 4 * h_n, f_n, x.data.data() + (b * l_n + t) * f_n, z.data());
        gemv_add(dr.w_hh.data.data(), 4 * h_n, h_n, h.data(), z.data());
        for (std::size_t j = 0; j < h_n; ++j) {
          const T ig = sigmoid(z[j]);
          const T fg = sigmoid(z[h_n + j]);
          const T gg = std::tanh(z[2 * h_n + j]);
          const T og = sigmoid(z[3 * h_n + j]);
          c[j] = fg * c[j] + ig * gg;
          h[j] = og * std::tanh(c[j]);
          z[j] = ig;
          z[h_n + j] = fg;
          z[2 * h_n + j] = gg;
          z[3 * h_n + j] = og;
        }
        std::copy(h.begin(), h.end(), y.data.begin() + static_cast<std::ptrdiff_t>((b * l_n + t) * 2 * h_n + d * h_n));
        if (caches) {
          const std::size_t k = b * l_n + t;
          std::copy(z.begin(), z.end(), caches[d].gates.begin() + static_cast<std::ptrdiff_t>(k * 4 * h_n));
          std::copy(c.begin(), c.end(), caches[d].cell.begin() + static_cast<std::ptrdiff_t>(k * h_n));
          std::copy(h.begin(), h.end(), caches[d].out.begin() + static_cast<std::ptrdiff_t>(k * h_n));
        }
      }
    }
  }
  return y;
}

template <class T>
Tensor<T> BiLstm<T>::infer(const Tensor<T>& x) const {
  return run(x, nullptr);
}

template <class T>
Tensor<T> BiLstm<T>::forward_train(const Tensor<T>& x) {
  x_ = x;
  return run(x, cache_);
}

template <class T>
Tensor<T> BiLstm<T>::backward(const Tensor<T>& dy) {
  require(!x_.data.empty(), ErrorKind::kContract, "bilstm: backward before forward");
  const std::size_t b_n = x_.shape[0], l_n = x_.shape[1], h_n = hidden_, f_n = features_;
  require(dy.size() == b_n * l_n * 2 * h_n, ErrorKind::kContract, "bilstm: backward shape mismatch");
  Tensor<T> dx(x_.shape);
  std::vector<T> dz(4 * h_n), dh_next(h_n), dc_next(h_n);
  const std::vector<T> zeros(h_n, T(0));
  for (std::size_t d = 0; d < 2; ++d) {
    Direction& dr = dir_[d];
    if (!dr.w_ih.has_grad()) dr.w_ih.zero_grad();
    if (!dr.w_hh.has_grad()) dr.w_hh.zero_grad();
    if (!dr.bias.has_grad()) dr.bias.zero_grad();
    const Cache& cc = cache_[d];
    for (std::size_t b = 0; b < b_n; ++b) {
      std::fill(dh_next.begin(), dh_next.end(), T(0));
      std::fill(dc_next.begin(), dc_next.end(), T(0));
      for (std::size_t s = l_n; s-- > 0;) {
        const std::size_t t = d == 0 ? s : l_n - 1 - s;
        const std::size_t k = b * l_n + t;
        const T* g = cc.gates.data() + k * 4 * h_n;
        const T* c = cc.cell.data() + k * h_n;
        const T* c_prev = zeros.data();
        const T* h_prev = zeros.data();
        if (s > 0) {
          const std::size_t tp = d == 0 ? s - 1 : l_n - s;
          c_prev = cc.cell.data() + (b * l_n + tp) * h_n;
          h_prev = cc.out.data() + (b * l_n + tp) * h_n;
        }
        const T* dyt = dy.data.data() + k * 2 * h_n + d * h_n;
        for (std::size_t j = 0; j < h_n; ++j) {
          const T ig = g[j], fg = g[h_n + j], gg = g[2 * h_n + j], og = g[3 * h_n + j];
          const T tc = std::tanh(c[j]);
          const T dhj = dyt[j] + dh_next[j];
          const T dc = dhj * og * (T(1) - tc * tc) + dc_next[j];
          dz[j] = dc * gg * ig * (T(1) - ig);
          dz[h_n + j] = dc * c_prev[j] * fg * (T(1) - fg);
          dz[2 * h_n + j] = dc * ig * (T(1) - gg * gg);
          dz[3 * h_n + j] = dhj * tc * og * (T(1) - og);
          dc_next[j] = dc * fg;
        }
        const T* xt = x_.data.data() + k * f_n;
        outer_add(dz.data(), 4 * h_n, xt, f_n, dr.w_ih.grad.data());
        outer_add(dz.data(), 4 * h_n, h_prev, h_n, dr.w_hh.grad.data());
        for (std::size_t r = 0; r < 4 * h_n; ++r) dr.bias.grad[r] += dz[r];
        gemv_t_add(dr.w_ih.data.data(), 4 * h_n, f_n, dz.data(), dx.data.data() + k * f_n);
        std::fill(dh_next.begin(), dh_next.end(), T(0));
        gemv_t_add(dr.w_hh.data.data(), 4 * h_n, h_n, dz.data(), dh_next.data());
      }
    }
  }
  return dx;
}

template class BiLstm<float>;
template class BiLstm<double>;

} // namespace fudnn::nn
