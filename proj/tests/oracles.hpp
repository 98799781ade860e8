#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Deliberately naive: complex sums, long double accumulators, exhaustive
// enumeration.

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

// |mean exp(i(a - b))| with std::complex.
inline double plv(std::span<const double> a, std::span<const double> b) {
  std::complex<long double> s = 0;
  for (std::size_t t = 0; t < a.size(); ++t) s += std::polar<long double>(1.0L, a[t] - b[t]);
  return static_cast<double>(std::abs(s / static_cast<long double>(a.size())));
}

// phases laid out [N x K x T]; returns upper-triangular K x K (row-major).
inline std::vector<double> plv_pairwise(const std::vector<double>& phases, std::size_t n, std::size_t k,
                                        std::size_t t) {
  std::vector<double> out(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      std::complex<long double> s = 0;
      for (std::size_t seg = 0; seg < n; ++seg) {
        for (std::size_t x = 0; x < t; ++x) {
          s += std::polar<long double>(1.0L, phases[(seg * k + i) * t + x] - phases[(seg * k + j) * t + x]);
        }
      }
      out[i * k + j] = static_cast<double>(std::abs(s) / static_cast<long double>(n * t));
    }
  }
  return out;
}

inline std::vector<double> column_sums(const std::vector<double>& m, std::size_t k) {
  std::vector<double> out(k, 0.0);
  for (std::size_t col = 0; col < k; ++col) {
    long double s = 0;
    for (std::size_t row = 0; row < k; ++row) s += m[row * k + col];
    out[col] = static_cast<double>(s);
  }
  return out;
}

// r = (n Sxy - Sx Sy) / sqrt((n Sxx - Sx^2)(n Syy - Sy^2))
inline double pearson(std::span<const double> x, std::span<const double> y) {
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  const long double n = static_cast<long double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  return static_cast<double>((n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy)));
}

// Exact two-sided sign-flip p-value over all 2^n flips (observed included).
inline double sign_flip_exact(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  std::vector<double> d(n);
  long double obs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = a[i] - b[i];
    obs += d[i];
  }
  obs = std::fabs(obs / n);
  std::uint64_t count = 0;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    long double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += (mask >> i & 1) ? -d[i] : d[i];
    if (std::fabs(s / n) >= obs - 1e-12L) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(total);
}

// Lag (in samples) maximizing the full cross-correlation of y against x;
// positive means y is delayed.
inline long xcorr_peak_lag(std::span<const double> x, std::span<const double> y, long max_lag) {
  long best = 0;
  long double best_v = -1e300L;
  const long n = static_cast<long>(x.size());
  for (long lag = -max_lag; lag <= max_lag; ++lag) {
    long double s = 0;
    for (long i = 0; i < n; ++i) {
      const long j = i + lag;
      if (j >= 0 && j < n) s += static_cast<long double>(x[i]) * y[j];
    }
    if (s > best_v) {
      best_v = s;
      best = lag;
    }
  }
  return best;
}

// One Adam update of a scalar parameter, textbook form.
struct AdamScalar {
  double m = 0, v = 0;
  int t = 0;
  double step(double theta, double g, double lr = 1e-3, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return theta - lr * mh / (std::sqrt(vh) + eps);
  }
};

inline std::vector<double> tone(std::size_t n, double freq_hz, double rate_hz, double phase = 0.0, double amp = 1.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = amp * std::cos(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / rate_hz + phase);
  }
  return x;
}

} // namespace oracle
