#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "fudnn/eeg.hpp"

namespace fudnn {

struct FirDesign {
  double low_hz = 0.0;  // 0 for a low-pass
  double high_hz = 0.0;
  double rate_hz = 0.0;
  int order = 0;
};

// Linear-phase FIR (Hamming-windowed sinc), order + 1 symmetric taps.
struct FirFilter {
  std::vector<double> taps;
  FirDesign design;

  std::complex<double> response(double freq_hz) const;
};

// Band-pass with exact zero gain at DC and unit peak gain inside [low, high].
FirFilter design_fir_bandpass(int order, double low_hz, double high_hz, double rate_hz);

// Low-pass with unit DC gain.
FirFilter design_fir_lowpass(int order, double cutoff_hz, double rate_hz);

// Forward-backward application with reflection padding of 3 x taps at both ends.
// Requires signal.size() > 3 * taps.
std::vector<double> filtfilt(std::span<const double> signal, const FirFilter& filter);

// Single pass of a symmetric FIR aligned on its centre tap (zero phase,
// magnitude response |H|), reflection-padded.
std::vector<double> filter_centered(std::span<const double> signal, const FirFilter& filter);

// Anti-alias low-pass (cutoff 0.45 x target) followed by integer decimation.
// Markers are re-indexed by integer division.
Recording downsample(const Recording& recording, double target_hz);
Trial downsample(const Trial& trial, double target_hz);

// Zero-phase band-pass applied to every channel.
Trial bandpass(const Trial& trial, const FirFilter& filter);

// Windows of window_s seconds stepping by window_s x (1 - overlap).
std::vector<Window> sliding_windows(const Trial& trial, double window_s = 2.0, double overlap = 0.5);

struct AnalyticPhase {
  std::vector<double> phase;      // radians in (-pi, pi]
  std::vector<double> amplitude;  // analytic envelope
  bool degenerate = false;        // all-zero input: phase is meaningless
};

// Phase of the analytic signal (FFT method: zero the negative frequencies,
// double the positive ones).
AnalyticPhase instantaneous_phase(std::span<const double> signal);

struct Spectrum {
  std::vector<double> freqs_hz;
  std::vector<double> power;  // one-sided density, unit^2 / Hz
};

// Welch PSD with Hann segments.
Spectrum psd_welch(std::span<const double> signal, double rate_hz, std::size_t seg_len,
                   double overlap = 0.5);

struct TimeFreqMap {
  std::vector<double> freqs_hz;
  std::vector<double> times_s;    // relative to imagery onset
  std::vector<double> values_db;  // [freqs x times], frequency-major

  double at(std::size_t f, std::size_t t) const { return values_db[f * times_s.size() + t]; }
};

struct ErspOptions {
  double baseline_begin_s = -0.5;
  double baseline_end_s = 0.0;
  double freq_low_hz = 0.5;
  double freq_high_hz = 50.0;
  std::size_t n_times = 400;
  double stft_window_s = 1.0;
};

// Event-related spectral perturbation of one channel across trials: trial-mean
// STFT power relative to the mean baseline power, in dB.
TimeFreqMap ersp(std::span<const Trial> trials, std::size_t channel, const ErspOptions& options = {});

// Second-order IIR notch at 60 Hz (-3 dB width 2 Hz), single causal pass.
std::vector<double> notch_60hz(std::span<const double> signal, double rate_hz);

struct PreprocessConfig {
  double target_rate_hz = 250.0;
  double band_low_hz = 0.5;
  double band_high_hz = 13.0;
  int fir_order = 30;
  bool bandpass = true;
  double window_s = 2.0;
  double overlap = 0.5;
};

// Downsample (when the rate differs from the target) and band-pass every trial.
Dataset preprocess(const Dataset& dataset, const PreprocessConfig& config);

// Sliding windows of every trial, in trial order.
WindowSet make_windows(const Dataset& dataset, double window_s, double overlap);

// Plot-ready CSV exports.
void write_spectrum_csv(const std::filesystem::path& path, const std::vector<std::string>& channel_names,
                        const std::vector<Spectrum>& spectra);
void write_ersp_csv(const std::filesystem::path& path, const TimeFreqMap& map);

} // namespace fudnn
