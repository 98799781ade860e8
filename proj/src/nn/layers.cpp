#include "fudnn/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "fudnn/error.hpp"

namespace fudnn::nn {

namespace {

template <class T>
void ensure_grad(Tensor<T>& t) {
  if (!t.has_grad()) t.zero_grad();
}

void require_rank(const Shape& s, std::size_t rank, const char* who) {
  require(s.size() == rank, ErrorKind::kContract,
          std::string(who) + ": expected rank " + std::to_string(rank) + " input, got " + to_string(s));
}

// y[ho, wo] += sum_{i,j} k[i, j] * x[ho*sh + i, wo*sw + j]
template <class T>
void corr2d(const T* x, std::size_t w_in, const T* k, std::size_t kh, std::size_t kw, std::size_t sh,
            std::size_t sw, T* y, std::size_t ho_n, std::size_t wo_n) {
  for (std::size_t ho = 0; ho < ho_n; ++ho) {
    T* yrow = y + ho * wo_n;
    for (std::size_t i = 0; i < kh; ++i) {
      const T* xrow = x + (ho * sh + i) * w_in;
      for (std::size_t j = 0; j < kw; ++j) {
        const T kv = k[i * kw + j];
        const T* xs = xrow + j;
        if (sw == 1) {
#pragma omp simd
          for (std::size_t wo = 0; wo < wo_n; ++wo) yrow[wo] += kv * xs[wo];
        } else {
          for (std::size_t wo = 0; wo < wo_n; ++wo) yrow[wo] += kv * xs[wo * sw];
        }
      }
    }
  }
}

// Adjoint of corr2d: dx += k (*) dy, dk += x (*) dy.
template <class T>
void corr2d_backward(const T* x, std::size_t w_in, const T* k, std::size_t kh, std::size_t kw, std::size_t sh,
                     std::size_t sw, const T* dy, std::size_t ho_n, std::size_t wo_n, T* dx, T* dk) {
  for (std::size_t ho = 0; ho < ho_n; ++ho) {
    const T* dyrow = dy + ho * wo_n;
    for (std::size_t i = 0; i < kh; ++i) {
      const std::size_t r = (ho * sh + i) * w_in;
      const T* xrow = x + r;
      T* dxrow = dx + r;
      for (std::size_t j = 0; j < kw; ++j) {
        const T kv = k[i * kw + j];
        T acc = 0;
        if (sw == 1) {
          const T* xs = xrow + j;
          T* dxs = dxrow + j;
#pragma omp simd reduction(+ : acc)
          for (std::size_t wo = 0; wo < wo_n; ++wo) {
            acc += xs[wo] * dyrow[wo];
            dxs[wo] += kv * dyrow[wo];
          }
        } else {
          for (std::size_t wo = 0; wo < wo_n; ++wo) {
            acc += xrow[j + wo * sw] * dyrow[wo];
            dxrow[j + wo * sw] += kv * dyrow[wo];
          }
        }
        dk[i * kw + j] += acc;
      }
    }
  }
}

// dk only.
template <class T>
void corr2d_kernel_grad(const T* x, std::size_t w_in, std::size_t kh, std::size_t kw, std::size_t sh,
                        std::size_t sw, const T* dy, std::size_t ho_n, std::size_t wo_n, T* dk) {
  for (std::size_t ho = 0; ho < ho_n; ++ho) {
    const T* dyrow = dy + ho * wo_n;
    for (std::size_t i = 0; i < kh; ++i) {
      const T* xrow = x + (ho * sh + i) * w_in;
      for (std::size_t j = 0; j < kw; ++j) {
        T acc = 0;
        if (sw == 1) {
          const T* xs = xrow + j;
#pragma omp simd reduction(+ : acc)
          for (std::size_t wo = 0; wo < wo_n; ++wo) acc += xs[wo] * dyrow[wo];
        } else {
          for (std::size_t wo = 0; wo < wo_n; ++wo) acc += xrow[j + wo * sw] * dyrow[wo];
        }
        dk[i * kw + j] += acc;
      }
    }
  }
}

std::size_t valid_extent(std::size_t in, std::size_t k, std::size_t stride, const char* who) {
  require(k >= 1 && stride >= 1, ErrorKind::kContract, std::string(who) + ": kernel and stride must be >= 1");
  require(k <= in, ErrorKind::kContract,
          std::string(who) + ": kernel " + std::to_string(k) + " larger than input " + std::to_string(in));
  return (in - k) / stride + 1;
}

} // namespace

// ---- Conv2d ----

template <class T>
Conv2d<T>::Conv2d(std::size_t in_maps, std::size_t out_maps, std::size_t kh, std::size_t kw,
                  std::size_t stride_h, std::size_t stride_w)
    : cin_(in_maps), cout_(out_maps), kh_(kh), kw_(kw), sh_(stride_h), sw_(stride_w),
      weight_({out_maps, in_maps, kh, kw}), bias_({out_maps}) {}

template <class T>
Shape Conv2d<T>::output_shape(const Shape& in) const {
  require_rank(in, 3, "conv2d");
  require(in[0] == cin_, ErrorKind::kContract,
          "conv2d: expected " + std::to_string(cin_) + " input maps, got " + to_string(in));
  return {cout_, valid_extent(in[1], kh_, sh_, "conv2d"), valid_extent(in[2], kw_, sw_, "conv2d")};
}

template <class T>
void Conv2d<T>::init(std::mt19937_64& rng) {
  glorot_uniform<T>(weight_.data, cin_ * kh_ * kw_, cout_ * kh_ * kw_, rng);
  std::fill(bias_.data.begin(), bias_.data.end(), T(0));
}

template <class T>
Tensor<T> Conv2d<T>::infer(const Tensor<T>& x) const {
  require_rank(x.shape, 4, "conv2d");
  const Shape os = output_shape({x.shape[1], x.shape[2], x.shape[3]});
  const std::size_t b_n = x.shape[0], h = x.shape[2], w = x.shape[3];
  Tensor<T> y({b_n, os[0], os[1], os[2]});
  const std::size_t in_plane = h * w, out_plane = os[1] * os[2], ksz = kh_ * kw_;
  for (std::size_t b = 0; b < b_n; ++b) {
    for (std::size_t co = 0; co < cout_; ++co) {
      T* yp = y.data.data() + (b * cout_ + co) * out_plane;
      std::fill(yp, yp + out_plane, bias_.data[co]);
      for (std::size_t ci = 0; ci < cin_; ++ci) {
        corr2d(x.data.data() + (b * cin_ + ci) * in_plane, w, weight_.data.data() + (co * cin_ + ci) * ksz, kh_, kw_,
               sh_, sw_, yp, os[1], os[2]);
      }
    }
  }
  return y;
}

template <class T>
Tensor<T> Conv2d<T>::forward_train(const Tensor<T>& x) {
  x_ = x;
  return infer(x);
}

template <class T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy) {
  require(!x_.data.empty(), ErrorKind::kContract, "conv2d: backward before forward");
  ensure_grad(weight_);
  ensure_grad(bias_);
  const std::size_t b_n = x_.shape[0], h = x_.shape[2], w = x_.shape[3];
  const std::size_t ho = dy.shape[2], wo = dy.shape[3];
  Tensor<T> dx;
  if (this->input_grad_) dx = Tensor<T>(x_.shape);
  const std::size_t in_plane = h * w, out_plane = ho * wo, ksz = kh_ * kw_;
  for (std::size_t b = 0; b < b_n; ++b) {
    for (std::size_t co = 0; co < cout_; ++co) {
      const T* dyp = dy.data.data() + (b * cout_ + co) * out_plane;
      T bsum = 0;
      for (std::size_t i = 0; i < out_plane; ++i) bsum += dyp[i];
      bias_.grad[co] += bsum;
      for (std::size_t ci = 0; ci < cin_; ++ci) {
        const std::size_t xo = (b * cin_ + ci) * in_plane;
        const std::size_t ko = (co * cin_ + ci) * ksz;
        if (this->input_grad_) {
          corr2d_backward(x_.data.data() + xo, w, weight_.data.data() + ko, kh_, kw_, sh_, sw_, dyp, ho, wo,
                          dx.data.data() + xo, weight_.grad.data() + ko);
        } else {
          corr2d_kernel_grad(x_.data.data() + xo, w, kh_, kw_, sh_, sw_, dyp, ho, wo, weight_.grad.data() + ko);
        }
      }
    }
  }
  return dx;
}

// ---- DepthwiseConv2d ----

template <class T>
DepthwiseConv2d<T>::DepthwiseConv2d(std::size_t maps, std::size_t kh, std::size_t kw)
    : maps_(maps), kh_(kh), kw_(kw), weight_({maps, kh, kw}), bias_({maps}) {}

template <class T>
Shape DepthwiseConv2d<T>::output_shape(const Shape& in) const {
  require_rank(in, 3, "depthwise_conv2d");
  require(in[0] == maps_, ErrorKind::kContract,
          "depthwise_conv2d: expected " + std::to_string(maps_) + " maps, got " + to_string(in));
  return {maps_, valid_extent(in[1], kh_, 1, "depthwise_conv2d"), valid_extent(in[2], kw_, 1, "depthwise_conv2d")};
}

template <class T>
void DepthwiseConv2d<T>::init(std::mt19937_64& rng) {
  glorot_uniform<T>(weight_.data, kh_ * kw_, kh_ * kw_, rng);
  std::fill(bias_.data.begin(), bias_.data.end(), T(0));
}

template <class T>
Tensor<T> DepthwiseConv2d<T>::infer(const Tensor<T>& x) const {
  require_rank(x.shape, 4, "depthwise_conv2d");
  const Shape os = output_shape({x.shape[1], x.shape[2], x.shape[3]});
  const std::size_t b_n = x.shape[0], w = x.shape[3];
  Tensor<T> y({b_n, os[0], os[1], os[2]});
  const std::size_t in_plane = x.shape[2] * w, out_plane = os[1] * os[2];
  for (std::size_t b = 0; b < b_n; ++b) {
    for (std::size_t c = 0; c < maps_; ++c) {
      T* yp = y.data.data() + (b * maps_ + c) * out_plane;
      std::fill(yp, yp + out_plane, bias_.data[c]);
      corr2d(x.data.data() + (b * maps_ + c) * in_plane, w, weight_.data.data() + c * kh_ * kw_, kh_, kw_, 1, 1, yp,
             os[1], os[2]);
    }
  }
  return y;
}

template <class T>
Tensor<T> DepthwiseConv2d<T>::forward_train(const Tensor<T>& x) {
  x_ = x;
  return infer(x);
}

template <class T>
Tensor<T> DepthwiseConv2d<T>::backward(const Tensor<T>& dy) {
  require(!x_.data.empty(), ErrorKind::kContract, "depthwise_conv2d: backward before forward");
  ensure_grad(weight_);
  ensure_grad(bias_);
  const std::size_t b_n = x_.shape[0], w = x_.shape[3];
  const std::size_t ho = dy.shape[2], wo = dy.shape[3];
  const std::size_t in_plane = x_.shape[2] * w, out_plane = ho * wo;
  Tensor<T> dx(x_.shape);
  for (std::size_t b = 0; b < b_n; ++b) {
    for (std::size_t c = 0; c < maps_; ++c) {
      const T* dyp = dy.data.data() + (b * maps_ + c) * out_plane;
      T bsum = 0;
      for (std::size_t i = 0; i < out_plane; ++i) bsum += dyp[i];
      bias_.grad[c] += bsum;
      const std::size_t xo = (b * maps_ + c) * in_plane;
      corr2d_backward(x_.data.data() + xo, w, weight_.data.data() + c * kh_ * kw_, kh_, kw_, 1, 1, dyp, ho, wo,
                      dx.data.data() + xo, weight_.grad.data() + c * kh_ * kw_);
    }
  }
  return dx;
}

// ---- BatchNorm2d ----

template <class T>
BatchNorm2d<T>::BatchNorm2d(std::size_t maps, double momentum, double eps)
    : maps_(maps), momentum_(momentum), eps_(eps), gamma_({maps}, T(1)), beta_({maps}),
      running_mean_({maps}), running_var_({maps}, T(1)) {
  require(momentum >= 0.0 && momentum <= 1.0, ErrorKind::kConfig, "batchnorm momentum must be in [0, 1]");
  require(eps > 0.0, ErrorKind::kConfig, "batchnorm eps must be positive");
}

template <class T>
Shape BatchNorm2d<T>::output_shape(const Shape& in) const {
  require_rank(in, 3, "batchnorm2d");
  require(in[0] == maps_, ErrorKind::kContract,
          "batchnorm2d: expected " + std::to_string(maps_) + " maps, got " + to_string(in));
  return in;
}

template <class T>
Tensor<T> BatchNorm2d<T>::infer(const Tensor<T>& x) const {
  require_rank(x.shape, 4, "batchnorm2d");
  output_shape({x.shape[1], x.shape[2], x.shape[3]});
  Tensor<T> y(x.shape);
  const std::size_t plane = x.shape[2] * x.shape[3];
  for (std::size_t b = 0; b < x.shape[0]; ++b) {
    for (std::size_t c = 0; c < maps_; ++c) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(running_var_.data[c]) + eps_);
      const T scale = static_cast<T>(static_cast<double>(gamma_.data[c]) * inv);
      const T shift = static_cast<T>(static_cast<double>(beta_.data[c]) -
                                     static_cast<double>(running_mean_.data[c]) * static_cast<double>(gamma_.data[c]) * inv);
      const T* xp = x.data.data() + (b * maps_ + c) * plane;
      T* yp = y.data.data() + (b * maps_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) yp[i] = xp[i] * scale + shift;
    }
  }
  return y;
}

template <class T>
Tensor<T> BatchNorm2d<T>::forward_train(const Tensor<T>& x) {
  require_rank(x.shape, 4, "batchnorm2d");
  output_shape({x.shape[1], x.shape[2], x.shape[3]});
  const std::size_t b_n = x.shape[0];
  require(b_n >= 2, ErrorKind::kConfig, "batchnorm2d: train mode needs a batch of at least 2");
  const std::size_t plane = x.shape[2] * x.shape[3];
  const double m = static_cast<double>(b_n * plane);
  xhat_ = Tensor<T>(x.shape);
  inv_std_.assign(maps_, 0.0);
  Tensor<T> y(x.shape);
  for (std::size_t c = 0; c < maps_; ++c) {
    double mean = 0.0;
    for (std::size_t b = 0; b < b_n; ++b) {
      const T* xp = x.data.data() + (b * maps_ + c) * plane;
#pragma omp simd reduction(+ : mean)
      for (std::size_t i = 0; i < plane; ++i) mean += static_cast<double>(xp[i]);
    }
    mean /= m;
    double var = 0.0;
    for (std::size_t b = 0; b < b_n; ++b) {
      const T* xp = x.data.data() + (b * maps_ + c) * plane;
#pragma omp simd reduction(+ : var)
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = static_cast<double>(xp[i]) - mean;
        var += d * d;
      }
    }
    const double unbiased = m > 1.0 ? var / (m - 1.0) : 0.0;
    var /= m;
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[c] = inv;
    const double g = static_cast<double>(gamma_.data[c]);
    const double bt = static_cast<double>(beta_.data[c]);
    for (std::size_t b = 0; b < b_n; ++b) {
      const std::size_t off = (b * maps_ + c) * plane;
#pragma omp simd
      for (std::size_t i = 0; i < plane; ++i) {
        const double xh = (static_cast<double>(x.data[off + i]) - mean) * inv;
        xhat_.data[off + i] = static_cast<T>(xh);
        y.data[off + i] = static_cast<T>(g * xh + bt);
      }
    }
    running_mean_.data[c] = static_cast<T>(momentum_ * static_cast<double>(running_mean_.data[c]) + (1.0 - momentum_) * mean);
    running_var_.data[c] = static_cast<T>(momentum_ * static_cast<double>(running_var_.data[c]) + (1.0 - momentum_) * unbiased);
  }
  return y;
}

template <class T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& dy) {
  require(!xhat_.data.empty(), ErrorKind::kContract, "batchnorm2d: backward before forward");
  ensure_grad(gamma_);
  ensure_grad(beta_);
  const std::size_t b_n = xhat_.shape[0];
  const std::size_t plane = xhat_.shape[2] * xhat_.shape[3];
  const double m = static_cast<double>(b_n * plane);
  Tensor<T> dx(xhat_.shape);
  for (std::size_t c = 0; c < maps_; ++c) {
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (std::size_t b = 0; b < b_n; ++b) {
      const std::size_t off = (b * maps_ + c) * plane;
#pragma omp simd reduction(+ : sum_dy, sum_dy_xh)
      for (std::size_t i = 0; i < plane; ++i) {
        const double g = static_cast<double>(dy.data[off + i]);
        sum_dy += g;
        sum_dy_xh += g * static_cast<double>(xhat_.data[off + i]);
      }
    }
    gamma_.grad[c] += static_cast<T>(sum_dy_xh);
    beta_.grad[c] += static_cast<T>(sum_dy);
    const double k = static_cast<double>(gamma_.data[c]) * inv_std_[c] / m;
    for (std::size_t b = 0; b < b_n; ++b) {
      const std::size_t off = (b * maps_ + c) * plane;
#pragma omp simd
      for (std::size_t i = 0; i < plane; ++i) {
        const double g = static_cast<double>(dy.data[off + i]);
        dx.data[off + i] = static_cast<T>(k * (m * g - sum_dy - static_cast<double>(xhat_.data[off + i]) * sum_dy_xh));
      }
    }
  }
  return dx;
}

// ---- Elu ----

template <class T>
Tensor<T> Elu<T>::infer(const Tensor<T>& x) const {
  Tensor<T> y(x.shape);
  const T a = static_cast<T>(alpha_);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x.data[i];
    y.data[i] = v > T(0) ? v : a * std::expm1(v);
  }
  return y;
}

template <class T>
Tensor<T> Elu<T>::forward_train(const Tensor<T>& x) {
  x_ = x;
  return infer(x);
}

template <class T>
Tensor<T> Elu<T>::backward(const Tensor<T>& dy) {
  require(dy.size() == x_.size(), ErrorKind::kContract, "elu: backward shape mismatch");
  Tensor<T> dx(x_.shape);
  const T a = static_cast<T>(alpha_);
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const T v = x_.data[i];
    dx.data[i] = dy.data[i] * (v > T(0) ? T(1) : a * std::exp(v));
  }
  return dx;
}

// ---- AvgPool2d ----

template <class T>
AvgPool2d<T>::AvgPool2d(std::size_t kh, std::size_t kw, std::size_t stride_h, std::size_t stride_w)
    : kh_(kh), kw_(kw), sh_(stride_h), sw_(stride_w) {}

template <class T>
Shape AvgPool2d<T>::output_shape(const Shape& in) const {
  require_rank(in, 3, "avgpool2d");
  return {in[0], valid_extent(in[1], kh_, sh_, "avgpool2d"), valid_extent(in[2], kw_, sw_, "avgpool2d")};
}

template <class T>
Tensor<T> AvgPool2d<T>::infer(const Tensor<T>& x) const {
  require_rank(x.shape, 4, "avgpool2d");
  const Shape os = output_shape({x.shape[1], x.shape[2], x.shape[3]});
  Tensor<T> y({x.shape[0], os[0], os[1], os[2]});
  const std::size_t h = x.shape[2], w = x.shape[3];
  const double inv = 1.0 / static_cast<double>(kh_ * kw_);
  for (std::size_t p = 0; p < x.shape[0] * x.shape[1]; ++p) {
    const T* xp = x.data.data() + p * h * w;
    T* yp = y.data.data() + p * os[1] * os[2];
    for (std::size_t ho = 0; ho < os[1]; ++ho) {
      for (std::size_t wo = 0; wo < os[2]; ++wo) {
        double acc = 0.0;
        for (std::size_t i = 0; i < kh_; ++i) {
          const T* row = xp + (ho * sh_ + i) * w + wo * sw_;
          for (std::size_t j = 0; j < kw_; ++j) acc += static_cast<double>(row[j]);
        }
        yp[ho * os[2] + wo] = static_cast<T>(acc * inv);
      }
    }
  }
  return y;
}

template <class T>
Tensor<T> AvgPool2d<T>::forward_train(const Tensor<T>& x) {
  in_shape_ = x.shape;
  return infer(x);
}

template <class T>
Tensor<T> AvgPool2d<T>::backward(const Tensor<T>& dy) {
  require(!in_shape_.empty(), ErrorKind::kContract, "avgpool2d: backward before forward");
  Tensor<T> dx(in_shape_);
  const std::size_t h = in_shape_[2], w = in_shape_[3];
  const std::size_t ho_n = dy.shape[2], wo_n = dy.shape[3];
  const T inv = static_cast<T>(1.0 / static_cast<double>(kh_ * kw_));
  for (std::size_t p = 0; p < in_shape_[0] * in_shape_[1]; ++p) {
    T* dxp = dx.data.data() + p * h * w;
    const T* dyp = dy.data.data() + p * ho_n * wo_n;
    for (std::size_t ho = 0; ho < ho_n; ++ho) {
      for (std::size_t wo = 0; wo < wo_n; ++wo) {
        const T g = dyp[ho * wo_n + wo] * inv;
        for (std::size_t i = 0; i < kh_; ++i) {
          T* row = dxp + (ho * sh_ + i) * w + wo * sw_;
          for (std::size_t j = 0; j < kw_; ++j) row[j] += g;
        }
      }
    }
  }
  return dx;
}

// ---- Dropout ----

template <class T>
Dropout<T>::Dropout(double p, std::uint64_t seed) : p_(p), rng_(seed) {
  require(p >= 0.0 && p < 1.0, ErrorKind::kConfig, "dropout rate must be in [0, 1)");
}

template <class T>
Tensor<T> Dropout<T>::forward_train(const Tensor<T>& x) {
  mask_.assign(x.size(), T(1));
  Tensor<T> y = x;
  if (p_ == 0.0) return y;
  std::bernoulli_distribution keep(1.0 - p_);
  const T scale = static_cast<T>(1.0 / (1.0 - p_));
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = keep(rng_) ? scale : T(0);
    y.data[i] *= mask_[i];
  }
  return y;
}

template <class T>
Tensor<T> Dropout<T>::backward(const Tensor<T>& dy) {
  require(dy.size() == mask_.size(), ErrorKind::kContract, "dropout: backward shape mismatch");
  Tensor<T> dx = dy;
  dx.grad.clear();
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= mask_[i];
  return dx;
}

// ---- TimeToSequence ----

template <class T>
Shape TimeToSequence<T>::output_shape(const Shape& in) const {
  require_rank(in, 3, "time_to_sequence");
  require(in[1] == 1, ErrorKind::kContract, "time_to_sequence: spatial axis must be collapsed to 1, got " + to_string(in));
  return {in[2], in[0]};
}

template <class T>
Tensor<T> TimeToSequence<T>::infer(const Tensor<T>& x) const {
  require_rank(x.shape, 4, "time_to_sequence");
  const Shape os = output_shape({x.shape[1], x.shape[2], x.shape[3]});
  const std::size_t b_n = x.shape[0], c_n = x.shape[1], l_n = x.shape[3];
  Tensor<T> y({b_n, os[0], os[1]});
  for (std::size_t b = 0; b < b_n; ++b) {
    for (std::size_t c = 0; c < c_n; ++c) {
      for (std::size_t l = 0; l < l_n; ++l) y.data[(b * l_n + l) * c_n + c] = x.data[(b * c_n + c) * l_n + l];
    }
  }
  return y;
}

template <class T>
Tensor<T> TimeToSequence<T>::forward_train(const Tensor<T>& x) {
  in_shape_ = x.shape;
  return infer(x);
}

template <class T>
Tensor<T> TimeToSequence<T>::backward(const Tensor<T>& dy) {
  require(!in_shape_.empty(), ErrorKind::kContract, "time_to_sequence: backward before forward");
  Tensor<T> dx(in_shape_);
  const std::size_t b_n = in_shape_[0], c_n = in_shape_[1], l_n = in_shape_[3];
  for (std::size_t b = 0; b < b_n; ++b) {
    for (std::size_t c = 0; c < c_n; ++c) {
      for (std::size_t l = 0; l < l_n; ++l) dx.data[(b * c_n + c) * l_n + l] = dy.data[(b * l_n + l) * c_n + c];
    }
  }
  return dx;
}

// ---- Flatten ----

template <class T>
Tensor<T> Flatten<T>::infer(const Tensor<T>& x) const {
  require(x.rank() >= 2, ErrorKind::kContract, "flatten: input needs a batch axis");
  return x.reshaped({x.shape[0], x.size() / x.shape[0]});
}

template <class T>
Tensor<T> Flatten<T>::forward_train(const Tensor<T>& x) {
  in_shape_ = x.shape;
  return infer(x);
}

template <class T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& dy) {
  return dy.reshaped(in_shape_);
}

// ---- GlobalAvgPoolTime ----

template <class T>
Shape GlobalAvgPoolTime<T>::output_shape(const Shape& in) const {
  require_rank(in, 3, "global_avgpool_time");
  return {in[0] * in[1]};
}

template <class T>
Tensor<T> GlobalAvgPoolTime<T>::infer(const Tensor<T>& x) const {
  require_rank(x.shape, 4, "global_avgpool_time");
  const std::size_t rows = x.shape[1] * x.shape[2], w = x.shape[3];
  Tensor<T> y({x.shape[0], rows});
  for (std::size_t r = 0; r < x.shape[0] * rows; ++r) {
    double acc = 0.0;
    for (std::size_t t = 0; t < w; ++t) acc += static_cast<double>(x.data[r * w + t]);
    y.data[r] = static_cast<T>(acc / static_cast<double>(w));
  }
  return y;
}

template <class T>
Tensor<T> GlobalAvgPoolTime<T>::forward_train(const Tensor<T>& x) {
  in_shape_ = x.shape;
  return infer(x);
}

template <class T>
Tensor<T> GlobalAvgPoolTime<T>::backward(const Tensor<T>& dy) {
  require(!in_shape_.empty(), ErrorKind::kContract, "global_avgpool_time: backward before forward");
  Tensor<T> dx(in_shape_);
  const std::size_t w = in_shape_[3];
  const T inv = static_cast<T>(1.0 / static_cast<double>(w));
  for (std::size_t r = 0; r < dy.size(); ++r) {
    const T g = dy.data[r] * inv;
    for (std::size_t t = 0; t < w; ++t) dx.data[r * w + t] = g;
  }
  return dx;
}

// ---- Dense ----

template <class T>
Dense<T>::Dense(std::size_t in, std::size_t out) : in_(in), out_(out), weight_({out, in}), bias_({out}) {}

template <class T>
Shape Dense<T>::output_shape(const Shape& in) const {
  require(in.size() == 1 && in[0] == in_, ErrorKind::kContract,
          "dense: expected input of " + std::to_string(in_) + " features, got " + to_string(in));
  return {out_};
}

template <class T>
void Dense<T>::init(std::mt19937_64& rng) {
  glorot_uniform<T>(weight_.data, in_, out_, rng);
  std::fill(bias_.data.begin(), bias_.data.end(), T(0));
}

template <class T>
Tensor<T> Dense<T>::infer(const Tensor<T>& x) const {
  require_rank(x.shape, 2, "dense");
  output_shape({x.shape[1]});
  const std::size_t b_n = x.shape[0];
  Tensor<T> y({b_n, out_});
  for (std::size_t b = 0; b < b_n; ++b) {
    const T* xr = x.data.data() + b * in_;
    for (std::size_t o = 0; o < out_; ++o) {
      const T* wr = weight_.data.data() + o * in_;
      T acc = 0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t i = 0; i < in_; ++i) acc += wr[i] * xr[i];
      y.data[b * out_ + o] = acc + bias_.data[o];
    }
  }
  return y;
}

template <class T>
Tensor<T> Dense<T>::forward_train(const Tensor<T>& x) {
  x_ = x;
  return infer(x);
}

template <class T>
Tensor<T> Dense<T>::backward(const Tensor<T>& dy) {
  require(!x_.data.empty(), ErrorKind::kContract, "dense: backward before forward");
  ensure_grad(weight_);
  ensure_grad(bias_);
  const std::size_t b_n = x_.shape[0];
  Tensor<T> dx(x_.shape);
  for (std::size_t b = 0; b < b_n; ++b) {
    const T* xr = x_.data.data() + b * in_;
    T* dxr = dx.data.data() + b * in_;
    for (std::size_t o = 0; o < out_; ++o) {
      const T g = dy.data[b * out_ + o];
      bias_.grad[o] += g;
      const T* wr = weight_.data.data() + o * in_;
      T* gw = weight_.grad.data() + o * in_;
#pragma omp simd
      for (std::size_t i = 0; i < in_; ++i) {
        gw[i] += g * xr[i];
        dxr[i] += g * wr[i];
      }
    }
  }
  return dx;
}

// ---- softmax / loss ----

template <class T>
Tensor<T> softmax(const Tensor<T>& logits) {
  require_rank(logits.shape, 2, "softmax");
  Tensor<T> p(logits.shape);
  const std::size_t n = logits.shape[1];
  for (std::size_t b = 0; b < logits.shape[0]; ++b) {
    const T* z = logits.data.data() + b * n;
    const double zmax = static_cast<double>(*std::max_element(z, z + n));
    double sum = 0.0;
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) {
      e[i] = std::exp(static_cast<double>(z[i]) - zmax);
      sum += e[i];
    }
    for (std::size_t i = 0; i < n; ++i) p.data[b * n + i] = static_cast<T>(e[i] / sum);
  }
  return p;
}

template <class T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  require_rank(logits.shape, 2, "softmax_cross_entropy");
  const std::size_t b_n = logits.shape[0], n = logits.shape[1];
  require(labels.size() == b_n, ErrorKind::kContract, "softmax_cross_entropy: one label per row required");
  LossResult<T> r;
  r.probs = Tensor<T>(logits.shape);
  r.grad = Tensor<T>(logits.shape);
  double total = 0.0;
  for (std::size_t b = 0; b < b_n; ++b) {
    const int y = labels[b];
    require(y >= 0 && static_cast<std::size_t>(y) < n, ErrorKind::kContract,
            "softmax_cross_entropy: label " + std::to_string(y) + " out of range");
    const T* z = logits.data.data() + b * n;
    const double zmax = static_cast<double>(*std::max_element(z, z + n));
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::exp(static_cast<double>(z[i]) - zmax);
    const double log_sum = std::log(sum);
    for (std::size_t i = 0; i < n; ++i) {
      const double logp = static_cast<double>(z[i]) - zmax - log_sum;
      const double p = std::exp(logp);
      r.probs.data[b * n + i] = static_cast<T>(p);
      r.grad.data[b * n + i] = static_cast<T>((p - (static_cast<std::size_t>(y) == i ? 1.0 : 0.0)) / static_cast<double>(b_n));
      if (static_cast<std::size_t>(y) == i) total -= logp;
    }
  }
  r.loss = total / static_cast<double>(b_n);
  return r;
}

template <class T>
std::size_t argmax(std::span<const T> row) {
  require(!row.empty(), ErrorKind::kContract, "argmax of an empty row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

#define FUDNN_INSTANTIATE(T)                                                        \
  template class Conv2d<T>;                                                         \
  template class DepthwiseConv2d<T>;                                                \
  template class BatchNorm2d<T>;                                                    \
  template class Elu<T>;                                                            \
  template class AvgPool2d<T>;                                                      \
  template class Dropout<T>;                                                        \
  template class TimeToSequence<T>;                                                 \
  template class Flatten<T>;                                                        \
  template class GlobalAvgPoolTime<T>;                                              \
  template class Dense<T>;                                                          \
  template Tensor<T> softmax<T>(const Tensor<T>&);                                  \
  template LossResult<T> softmax_cross_entropy<T>(const Tensor<T>&, std::span<const int>); \
  template std::size_t argmax<T>(std::span<const T>);

FUDNN_INSTANTIATE(float)
FUDNN_INSTANTIATE(double)

#undef FUDNN_INSTANTIATE

} // namespace fudnn::nn
