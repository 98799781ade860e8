#include "fudnn/connectivity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include <json.hpp>

#include "fudnn/dsp.hpp"
#include "fudnn/error.hpp"

namespace fudnn {

bool PhaseTensor::channel_degenerate(std::size_t k) const {
  for (std::size_t n = 0; n < n_segments; ++n) {
    if (!degenerate[n * channels + k]) return false;
  }
  return true;
}

void PhaseTensor::validate() const {
  require(n_segments >= 1 && samples >= 1 && channels >= 1, ErrorKind::kContract, "empty phase tensor");
  require(phases.size() == n_segments * channels * samples, ErrorKind::kContract, "phase tensor size mismatch");
  require(degenerate.size() == n_segments * channels, ErrorKind::kContract, "degenerate flag size mismatch");
}

PhaseTensor extract_phases(std::span<const SignalMatrix> segments, double rate_hz,
                           const std::optional<SubbandOptions>& band) {
  require(!segments.empty(), ErrorKind::kConfig, "no segments to extract phases from");
  PhaseTensor p;
  p.n_segments = segments.size();
  p.channels = segments[0].channels;
  p.samples = segments[0].samples;
  p.rate_hz = rate_hz;
  p.phases.resize(p.n_segments * p.channels * p.samples);
  p.degenerate.resize(p.n_segments * p.channels);
  std::optional<FirFilter> filter;
  if (band) {
    filter = design_fir_bandpass(band->fir_order, band->low_hz, band->high_hz, rate_hz);
    p.band_low_hz = band->low_hz;
    p.band_high_hz = band->high_hz;
  }
  for (std::size_t n = 0; n < p.n_segments; ++n) {
    const auto& seg = segments[n];
    require(seg.channels == p.channels && seg.samples == p.samples, ErrorKind::kContract,
            "segments must share shape");
    for (std::size_t k = 0; k < p.channels; ++k) {
      auto x = seg.row_as_double(k);
      if (filter) x = filtfilt(x, *filter);
      const auto a = instantaneous_phase(x);
      std::copy(a.phase.begin(), a.phase.end(), p.phases.begin() + static_cast<std::ptrdiff_t>((n * p.channels + k) * p.samples));
      p.degenerate[n * p.channels + k] = a.degenerate ? 1 : 0;
    }
  }
  return p;
}

double plv(std::span<const double> phase_a, std::span<const double> phase_b) {
  require(phase_a.size() == phase_b.size() && !phase_a.empty(), ErrorKind::kContract,
          "phase series must be non-empty and equally long");
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < phase_a.size(); ++i) {
    const double d = phase_a[i] - phase_b[i];
    re += std::cos(d);
    im += std::sin(d);
  }
  return std::hypot(re, im) / static_cast<double>(phase_a.size());
}

PlvMatrix plv_pairwise(const PhaseTensor& phases) {
  phases.validate();
  const std::size_t k_count = phases.channels;
  for (std::size_t k = 0; k < k_count; ++k) {
    if (phases.channel_degenerate(k)) {
      fail(ErrorKind::kInvalidInput, "channel " + std::to_string(k) + " is all zero; PLV undefined");
    }
  }
  // Unit phasors per channel, laid out [K x (N*T)] for contiguous pair sums.
  const std::size_t len = phases.n_segments * phases.samples;
  std::vector<double> cs(k_count * len), sn(k_count * len);
  for (std::size_t n = 0; n < phases.n_segments; ++n) {
    for (std::size_t k = 0; k < k_count; ++k) {
      const auto s = phases.series(n, k);
      for (std::size_t t = 0; t < phases.samples; ++t) {
        cs[k * len + n * phases.samples + t] = std::cos(s[t]);
        sn[k * len + n * phases.samples + t] = std::sin(s[t]);
      }
    }
  }
  PlvMatrix out{k_count, std::vector<double>(k_count * k_count, 0.0), PlvMatrix::Kind::kUpperTriangular};
  const double inv = 1.0 / static_cast<double>(len);
  for (std::size_t a = 0; a < k_count; ++a) {
    const double* ca = cs.data() + a * len;
    const double* sa = sn.data() + a * len;
    for (std::size_t b = a + 1; b < k_count; ++b) {
      const double* cb = cs.data() + b * len;
      const double* sb = sn.data() + b * len;
      // e^{j(pa - pb)} = (ca cb + sa sb) + j (sa cb - ca sb)
      double re = 0.0, im = 0.0;
#pragma omp simd reduction(+ : re, im)
      for (std::size_t i = 0; i < len; ++i) {
        re += ca[i] * cb[i] + sa[i] * sb[i];
        im += sa[i] * cb[i] - ca[i] * sb[i];
      }
      out.at(a, b) = std::min(1.0, std::hypot(re, im) * inv);
    }
  }
  return out;
}

PlvMatrix symmetrize(const PlvMatrix& upper) {
  require(upper.kind == PlvMatrix::Kind::kUpperTriangular, ErrorKind::kContract,
          "symmetrize expects an upper-triangular PLV matrix");
  const std::size_t k = upper.size;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      require(upper.at(i, j) == 0.0, ErrorKind::kContract,
              "entry (" + std::to_string(i) + ", " + std::to_string(j) + ") outside the strict upper triangle");
    }
  }
  PlvMatrix s{k, std::vector<double>(k * k, 0.0), PlvMatrix::Kind::kSymmetric};
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) s.at(i, j) = upper.at(i, j) + upper.at(j, i);
  }
  return s;
}

std::vector<double> row_reduce(const PlvMatrix& symmetric) {
  require(symmetric.kind == PlvMatrix::Kind::kSymmetric, ErrorKind::kContract,
          "row_reduce expects a symmetric PLV matrix");
  const std::size_t k = symmetric.size;
  std::vector<double> out(k, 0.0);
  for (std::size_t col = 0; col < k; ++col) {
    for (std::size_t row = 0; row < k; ++row) out[col] += symmetric.at(row, col);
  }
  return out;
}

ChannelWeights minmax_normalize(std::span<const double> v) {
  require(v.size() >= 2, ErrorKind::kContract, "min-max normalization needs at least 2 channels");
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  ChannelWeights out;
  out.w.resize(v.size());
  if (hi == lo) {
    std::fill(out.w.begin(), out.w.end(), 1.0);
    return out;
  }
  for (std::size_t i = 0; i < v.size(); ++i) out.w[i] = (v[i] - lo) / (hi - lo);
  return out;
}

SignalMatrix apply_weights(const SignalMatrix& window, const ChannelWeights& weights) {
  require(weights.size() == window.channels, ErrorKind::kContract,
          "weight count (" + std::to_string(weights.size()) + ") != channels (" +
              std::to_string(window.channels) + ")");
  SignalMatrix out(window.channels, window.samples);
  for (std::size_t k = 0; k < window.channels; ++k) {
    const double w = weights.w[k];
    const auto in = window.row(k);
    auto dst = out.row(k);
    for (std::size_t t = 0; t < window.samples; ++t) dst[t] = static_cast<float>(w * static_cast<double>(in[t]));
  }
  return out;
}

std::vector<Edge> threshold_edges(const PlvMatrix& symmetric, double threshold) {
  require(symmetric.kind == PlvMatrix::Kind::kSymmetric, ErrorKind::kContract,
          "threshold_edges expects a symmetric PLV matrix");
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < symmetric.size; ++i) {
    for (std::size_t j = i + 1; j < symmetric.size; ++j) {
      if (symmetric.at(i, j) > threshold) edges.push_back({i, j, symmetric.at(i, j)});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.k1 != b.k1) return a.k1 < b.k1;
    return a.k2 < b.k2;
  });
  return edges;
}

double pearson_cc(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && a.size() >= 2, ErrorKind::kContract,
          "Pearson correlation needs two equally long vectors of length >= 2");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) fail(ErrorKind::kInvalidInput, "correlation undefined for a constant vector");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

ConnectivityFit fit_connectivity(std::span<const Window> windows, double rate_hz,
                                 const std::optional<SubbandOptions>& band) {
  require(!windows.empty(), ErrorKind::kConfig, "no windows to fit connectivity on");
  std::vector<SignalMatrix> segs;
  segs.reserve(windows.size());
  for (const auto& w : windows) segs.push_back(w.data);
  const auto phases = extract_phases(segs, rate_hz, band);
  ConnectivityFit fit;
  fit.symmetric = symmetrize(plv_pairwise(phases));
  fit.strength = row_reduce(fit.symmetric);
  fit.weights = minmax_normalize(fit.strength);
  return fit;
}

ChannelWeights fit_weights(std::span<const Window> train_windows, const Montage& montage, double rate_hz) {
  require(!train_windows.empty() && train_windows.front().data.channels == montage.size(), ErrorKind::kContract,
          "training windows must match the montage");
  return fit_connectivity(train_windows, rate_hz).weights;
}

void write_edges_csv(const std::filesystem::path& path, const std::vector<Edge>& edges, const Montage& montage) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::kFormat, "cannot write " + path.string());
  os << "k1_label,k2_label,value\n" << std::setprecision(10);
  for (const auto& e : edges) os << montage.labels.at(e.k1) << ',' << montage.labels.at(e.k2) << ',' << e.value << '\n';
}

void write_weights_json(const std::filesystem::path& path, const ChannelWeights& weights, const Montage& montage) {
  require(weights.size() == montage.size(), ErrorKind::kContract, "weights do not match montage");
  nlohmann::ordered_json j;
  for (std::size_t k = 0; k < weights.size(); ++k) j[montage.labels[k]] = weights.w[k];
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::kFormat, "cannot write " + path.string());
  os << j.dump(2) << '\n';
}

void write_plv_matrix_csv(const std::filesystem::path& path, const PlvMatrix& m, const Montage& montage) {
  require(m.size == montage.size(), ErrorKind::kContract, "matrix does not match montage");
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::kFormat, "cannot write " + path.string());
  os << "channel" << std::setprecision(10);
  for (const auto& l : montage.labels) os << ',' << l;
  os << '\n';
  for (std::size_t i = 0; i < m.size; ++i) {
    os << montage.labels[i];
    for (std::size_t j = 0; j < m.size; ++j) os << ',' << m.at(i, j);
    os << '\n';
  }
}

} // namespace fudnn
