#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fudnn/eeg.hpp"

namespace fudnn {

// Instantaneous phases phi_k(t, n) for N segments x K channels x T samples.
struct PhaseTensor {
  std::size_t n_segments = 0;
  std::size_t channels = 0;
  std::size_t samples = 0;
  std::vector<double> phases;          // [N x K x T]
  std::vector<unsigned char> degenerate;  // [N x K], 1 where the segment was all zero
  double rate_hz = 0.0;
  double band_low_hz = 0.0;
  double band_high_hz = 0.0;

  std::span<const double> series(std::size_t n, std::size_t k) const {
    return {phases.data() + (n * channels + k) * samples, samples};
  }
  bool channel_degenerate(std::size_t k) const;
  void validate() const;
};

// Phase extraction for every segment and channel. With `band` set, each
// channel is first band-passed (zero-phase FIR of `fir_order`) in that band.
struct SubbandOptions {
  double low_hz = 0.0;
  double high_hz = 0.0;
  int fir_order = 250;
};

PhaseTensor extract_phases(std::span<const SignalMatrix> segments, double rate_hz,
                           const std::optional<SubbandOptions>& band = std::nullopt);

struct PlvMatrix {
  enum class Kind { kUpperTriangular, kSymmetric };

  std::size_t size = 0;
  std::vector<double> values;  // row-major [K x K]
  Kind kind = Kind::kUpperTriangular;

  double at(std::size_t i, std::size_t j) const { return values[i * size + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * size + j]; }
};

struct ChannelWeights {
  std::vector<double> w;
  std::size_t size() const { return w.size(); }
};

struct Edge {
  std::size_t k1 = 0;
  std::size_t k2 = 0;
  double value = 0.0;
  bool operator==(const Edge&) const = default;
};

// Phase-locking value of two phase series: modulus of the mean unit phasor
// of their difference.
double plv(std::span<const double> phase_a, std::span<const double> phase_b);

// plv[k1, k2] for k1 < k2, averaged jointly over time bins and segments
// (1/NT). Diagonal and lower triangle are zero.
PlvMatrix plv_pairwise(const PhaseTensor& phases);

// S = plv + plv^T.
PlvMatrix symmetrize(const PlvMatrix& upper);

// Per-channel connectivity strength: column sums of S.
std::vector<double> row_reduce(const PlvMatrix& symmetric);

// (v - min) / (max - min); a constant vector maps to all ones.
ChannelWeights minmax_normalize(std::span<const double> v);

// out[k, t] = w[k] * window[k, t].
SignalMatrix apply_weights(const SignalMatrix& window, const ChannelWeights& weights);

// Unordered channel pairs with S > threshold, by descending value then index.
std::vector<Edge> threshold_edges(const PlvMatrix& symmetric, double threshold = 0.9);

// Sample Pearson correlation of two weight vectors.
double pearson_cc(std::span<const double> a, std::span<const double> b);

struct ConnectivityFit {
  PlvMatrix symmetric;
  std::vector<double> strength;
  ChannelWeights weights;
};

// Phase -> pairwise PLV -> symmetrize -> row sums -> min-max, pooled over
// all given windows regardless of class.
ConnectivityFit fit_connectivity(std::span<const Window> windows, double rate_hz,
                                 const std::optional<SubbandOptions>& band = std::nullopt);
ChannelWeights fit_weights(std::span<const Window> train_windows, const Montage& montage, double rate_hz);

void write_edges_csv(const std::filesystem::path& path, const std::vector<Edge>& edges, const Montage& montage);
void write_weights_json(const std::filesystem::path& path, const ChannelWeights& weights, const Montage& montage);
void write_plv_matrix_csv(const std::filesystem::path& path, const PlvMatrix& m, const Montage& montage);

} // namespace fudnn
