#include "fudnn/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

#include "fudnn/error.hpp"
#include "fudnn/fft.hpp"

namespace fudnn {

namespace {

constexpr double kPi = std::numbers::pi;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

double hamming(int n, int order) { return 0.54 - 0.46 * std::cos(2.0 * kPi * n / order); }

// Fill the second half of `taps` from the first so symmetry is bit-exact.
void mirror(std::vector<double>& taps) {
  const std::size_t n = taps.size();
  for (std::size_t i = 0; i < n / 2; ++i) taps[n - 1 - i] = taps[i];
}

void check_order(int order) {
  require(order >= 2 && order % 2 == 0, ErrorKind::kDesign,
          "FIR order must be even and >= 2 (got " + std::to_string(order) + ")");
}

// Odd reflection about the end samples: ext[-i] = 2 x[0] - x[i].
std::vector<double> reflect_pad(std::span<const double> x, std::size_t pad) {
  const std::size_t n = x.size();
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) {
    ext[pad - 1 - i] = 2.0 * x[0] - x[i + 1];
    ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];
  }
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  return ext;
}

std::vector<double> causal_fir(const std::vector<double>& x, const std::vector<double>& h) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    const std::size_t kmax = std::min(h.size() - 1, n);
    double acc = 0.0;
    for (std::size_t k = 0; k <= kmax; ++k) acc += h[k] * x[n - k];
    y[n] = acc;
  }
  return y;
}

std::vector<double> periodic_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

std::size_t decimation_factor(double rate_hz, double target_hz) {
  require(target_hz > 0.0 && rate_hz > 0.0, ErrorKind::kConfig, "rates must be positive");
  const double ratio = rate_hz / target_hz;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9) {
    fail(ErrorKind::kConfig, "downsampling " + std::to_string(rate_hz) + " Hz to " +
                                 std::to_string(target_hz) + " Hz is not an integer factor");
  }
  return static_cast<std::size_t>(rounded);
}

SignalMatrix decimate_matrix(const SignalMatrix& in, double rate_hz, std::size_t factor, double target_hz) {
  const FirFilter aa = design_fir_lowpass(static_cast<int>(32 * factor), 0.45 * target_hz, rate_hz);
  const std::size_t out_len = (in.samples + factor - 1) / factor;
  SignalMatrix out(in.channels, out_len);
  for (std::size_t k = 0; k < in.channels; ++k) {
    const auto filtered = filter_centered(in.row_as_double(k), aa);
    auto row = out.row(k);
    for (std::size_t i = 0; i < out_len; ++i) row[i] = static_cast<float>(filtered[i * factor]);
  }
  return out;
}

} // namespace

std::complex<double> FirFilter::response(double freq_hz) const {
  std::complex<double> acc = 0.0;
  const double w = -2.0 * kPi * freq_hz / design.rate_hz;
  for (std::size_t k = 0; k < taps.size(); ++k) acc += taps[k] * std::polar(1.0, w * static_cast<double>(k));
  return acc;
}

FirFilter design_fir_bandpass(int order, double low_hz, double high_hz, double rate_hz) {
  check_order(order);
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < rate_hz / 2.0)) {
    fail(ErrorKind::kDesign, "band [" + std::to_string(low_hz) + ", " + std::to_string(high_hz) +
                                 "] Hz must satisfy 0 < low < high < " + std::to_string(rate_hz / 2.0));
  }
  const int half = order / 2;
  std::vector<double> h(static_cast<std::size_t>(order + 1));
  std::vector<double> w(h.size());
  const double fl = low_hz / rate_hz;
  const double fh = high_hz / rate_hz;
  double sum_h = 0.0;
  double sum_w = 0.0;
  for (int n = 0; n <= order; ++n) {
    const double m = n - half;
    w[static_cast<std::size_t>(n)] = hamming(n, order);
    h[static_cast<std::size_t>(n)] = (2.0 * fh * sinc(2.0 * fh * m) - 2.0 * fl * sinc(2.0 * fl * m)) * w[static_cast<std::size_t>(n)];
    sum_h += h[static_cast<std::size_t>(n)];
    sum_w += w[static_cast<std::size_t>(n)];
  }
  // Project out the DC component: a short band-pass otherwise leaks most of DC.
  const double c = sum_h / sum_w;
  for (std::size_t i = 0; i < h.size(); ++i) h[i] -= c * w[i];
  mirror(h);

  FirFilter f{h, {low_hz, high_hz, rate_hz, order}};
  double peak = 0.0;
  constexpr int kGrid = 256;
  for (int i = 0; i <= kGrid; ++i) {
    const double fq = low_hz + (high_hz - low_hz) * i / kGrid;
    peak = std::max(peak, std::abs(f.response(fq)));
  }
  require(peak > 0.0, ErrorKind::kDesign, "degenerate band-pass design");
  for (double& t : f.taps) t /= peak;
  mirror(f.taps);
  return f;
}

FirFilter design_fir_lowpass(int order, double cutoff_hz, double rate_hz) {
  check_order(order);
  require(cutoff_hz > 0.0 && cutoff_hz < rate_hz / 2.0, ErrorKind::kDesign, "low-pass cutoff outside (0, Nyquist)");
  const int half = order / 2;
  const double fc = cutoff_hz / rate_hz;
  std::vector<double> h(static_cast<std::size_t>(order + 1));
  double sum = 0.0;
  for (int n = 0; n <= order; ++n) {
    h[static_cast<std::size_t>(n)] = 2.0 * fc * sinc(2.0 * fc * (n - half)) * hamming(n, order);
    sum += h[static_cast<std::size_t>(n)];
  }
  for (double& t : h) t /= sum;
  mirror(h);
  return {h, {0.0, cutoff_hz, rate_hz, order}};
}

std::vector<double> filtfilt(std::span<const double> signal, const FirFilter& filter) {
  const std::size_t pad = 3 * filter.taps.size();
  if (signal.size() <= pad) {
    fail(ErrorKind::kLength, "filtfilt needs more than " + std::to_string(pad) + " samples (got " +
                                 std::to_string(signal.size()) + ")");
  }
  auto ext = reflect_pad(signal, pad);
  auto y = causal_fir(ext, filter.taps);
  std::reverse(y.begin(), y.end());
  y = causal_fir(y, filter.taps);
  std::reverse(y.begin(), y.end());
  return {y.begin() + static_cast<std::ptrdiff_t>(pad), y.begin() + static_cast<std::ptrdiff_t>(pad + signal.size())};
}

std::vector<double> filter_centered(std::span<const double> signal, const FirFilter& filter) {
  const std::size_t half = filter.taps.size() / 2;
  if (signal.size() <= half + 1) {
    fail(ErrorKind::kLength, "signal shorter than half the filter length");
  }
  const auto ext = reflect_pad(signal, half);
  std::vector<double> y(signal.size());
  const auto& h = filter.taps;
  for (std::size_t n = 0; n < signal.size(); ++n) {
    double acc = 0.0;
    // ext[n + half] is signal[n]; the kernel is symmetric so orientation is moot.
    for (std::size_t k = 0; k < h.size(); ++k) acc += h[k] * ext[n + k];
    y[n] = acc;
  }
  return y;
}

Recording downsample(const Recording& recording, double target_hz) {
  const std::size_t factor = decimation_factor(recording.rate_hz, target_hz);
  if (factor == 1) return recording;
  Recording out;
  out.montage = recording.montage;
  out.rate_hz = target_hz;
  out.samples = decimate_matrix(recording.samples, recording.rate_hz, factor, target_hz);
  for (const auto& m : recording.markers) out.markers.push_back({m.sample / factor, m.code});
  return out;
}

Trial downsample(const Trial& trial, double target_hz) {
  const std::size_t factor = decimation_factor(trial.rate_hz, target_hz);
  if (factor == 1) return trial;
  Trial out = trial;
  out.rate_hz = target_hz;
  out.data = decimate_matrix(trial.data, trial.rate_hz, factor, target_hz);
  return out;
}

Trial bandpass(const Trial& trial, const FirFilter& filter) {
  require(std::abs(filter.design.rate_hz - trial.rate_hz) < 1e-9, ErrorKind::kContract,
          "filter designed for a different sampling rate");
  Trial out = trial;
  for (std::size_t k = 0; k < trial.data.channels; ++k) {
    out.data.set_row(k, filtfilt(trial.data.row_as_double(k), filter));
  }
  return out;
}

std::vector<Window> sliding_windows(const Trial& trial, double window_s, double overlap) {
  require(overlap >= 0.0 && overlap < 1.0, ErrorKind::kConfig, "overlap must lie in [0, 1)");
  require(window_s > 0.0, ErrorKind::kConfig, "window length must be positive");
  const auto width = static_cast<std::size_t>(std::llround(window_s * trial.rate_hz));
  const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(width) * (1.0 - overlap))));
  require(width >= 1 && width <= trial.data.samples, ErrorKind::kRange,
          "window of " + std::to_string(width) + " samples does not fit a trial of " +
              std::to_string(trial.data.samples));
  const std::size_t count = (trial.data.samples - width) / step + 1;
  std::vector<Window> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Window w;
    w.trial_id = trial.trial_id;
    w.subject_id = trial.subject_id;
    w.label = trial.label;
    w.start = i * step;
    w.data = trial.data.slice(w.start, width);
    out.push_back(std::move(w));
  }
  return out;
}

AnalyticPhase instantaneous_phase(std::span<const double> signal) {
  const std::size_t n = signal.size();
  require(n >= 8, ErrorKind::kLength, "instantaneous phase needs at least 8 samples");
  std::vector<std::complex<double>> x(signal.begin(), signal.end());
  auto spec = fft(x);
  // h[0] = h[n/2] = 1 (even n), 2 for positive frequencies, 0 for negative ones.
  for (std::size_t k = 1; k < n; ++k) {
    if (2 * k < n) {
      spec[k] *= 2.0;
    } else if (2 * k > n) {
      spec[k] = 0.0;
    }
  }
  const auto z = ifft(spec);
  AnalyticPhase out;
  out.phase.resize(n);
  out.amplitude.resize(n);
  double max_abs = 0.0;
  for (double v : signal) max_abs = std::max(max_abs, std::abs(v));
  out.degenerate = (max_abs == 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double p = std::arg(z[i]);
    if (p <= -kPi) p = kPi;
    out.phase[i] = p;
    out.amplitude[i] = std::abs(z[i]);
  }
  return out;
}

Spectrum psd_welch(std::span<const double> signal, double rate_hz, std::size_t seg_len, double overlap) {
  require(seg_len >= 2, ErrorKind::kLength, "Welch segment must hold at least 2 samples");
  if (seg_len > signal.size()) {
    fail(ErrorKind::kLength, "Welch segment (" + std::to_string(seg_len) + ") longer than signal (" +
                                 std::to_string(signal.size()) + ")");
  }
  require(overlap >= 0.0 && overlap < 1.0, ErrorKind::kConfig, "overlap must lie in [0, 1)");
  const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(seg_len) * (1.0 - overlap))));
  const auto win = periodic_hann(seg_len);
  double win_power = 0.0;
  for (double v : win) win_power += v * v;

  const std::size_t n_bins = seg_len / 2 + 1;
  Spectrum out;
  out.freqs_hz.resize(n_bins);
  out.power.assign(n_bins, 0.0);
  for (std::size_t k = 0; k < n_bins; ++k) out.freqs_hz[k] = static_cast<double>(k) * rate_hz / static_cast<double>(seg_len);

  std::vector<double> seg(seg_len);
  std::size_t n_segs = 0;
  for (std::size_t start = 0; start + seg_len <= signal.size(); start += step) {
    for (std::size_t i = 0; i < seg_len; ++i) seg[i] = signal[start + i] * win[i];
    const auto spec = rfft(seg);
    for (std::size_t k = 0; k < n_bins; ++k) out.power[k] += std::norm(spec[k]);
    ++n_segs;
  }
  const double scale = 1.0 / (rate_hz * win_power * static_cast<double>(n_segs));
  for (std::size_t k = 0; k < n_bins; ++k) {
    const bool edge = (k == 0) || (seg_len % 2 == 0 && k == n_bins - 1);
    out.power[k] *= scale * (edge ? 1.0 : 2.0);
  }
  return out;
}

TimeFreqMap ersp(std::span<const Trial> trials, std::size_t channel, const ErspOptions& options) {
  require(!trials.empty(), ErrorKind::kConfig, "ERSP needs at least one trial");
  require(options.n_times >= 2, ErrorKind::kConfig, "ERSP needs at least 2 output time points");
  require(options.baseline_begin_s < options.baseline_end_s, ErrorKind::kConfig, "empty baseline interval");
  const double rate = trials[0].rate_hz;
  const std::size_t n_samples = trials[0].data.samples;
  for (const auto& t : trials) {
    require(t.rate_hz == rate && t.data.samples == n_samples, ErrorKind::kContract,
            "ERSP trials must share rate and length");
    require(channel < t.data.channels, ErrorKind::kRange, "channel index out of range");
    if (t.onset_s + options.baseline_begin_s < -1e-9) {
      fail(ErrorKind::kRange, "trial " + std::to_string(t.trial_id) + " holds " + std::to_string(t.onset_s) +
                                  " s before onset; baseline needs " + std::to_string(-options.baseline_begin_s));
    }
  }
  const double onset_s = trials[0].onset_s;
  const auto win = static_cast<std::size_t>(std::llround(options.stft_window_s * rate));
  require(win >= 8 && win < n_samples, ErrorKind::kLength, "trials shorter than one STFT window");
  const std::size_t nfft = 2 * win;
  const std::size_t span = n_samples - win;
  const std::size_t hop = std::max<std::size_t>(1, span / (options.n_times - 1));
  const std::size_t n_frames = span / hop + 1;

  std::vector<std::size_t> bins;
  TimeFreqMap out;
  for (std::size_t k = 0; k <= nfft / 2; ++k) {
    const double f = static_cast<double>(k) * rate / static_cast<double>(nfft);
    if (f >= options.freq_low_hz - 1e-12 && f <= options.freq_high_hz + 1e-12) {
      bins.push_back(k);
      out.freqs_hz.push_back(f);
    }
  }
  require(!bins.empty(), ErrorKind::kConfig, "no frequency bins inside the requested range");

  std::vector<double> frame_time(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    frame_time[i] = (static_cast<double>(i * hop) + static_cast<double>(win) / 2.0) / rate - onset_s;
  }

  const auto hann = periodic_hann(win);
  std::vector<double> power(bins.size() * n_frames, 0.0);
  std::vector<double> seg(nfft, 0.0);
  for (const auto& trial : trials) {
    const auto row = trial.data.row(channel);
    for (std::size_t i = 0; i < n_frames; ++i) {
      std::fill(seg.begin(), seg.end(), 0.0);
      for (std::size_t j = 0; j < win; ++j) seg[j] = static_cast<double>(row[i * hop + j]) * hann[j];
      const auto spec = rfft(seg);
      for (std::size_t b = 0; b < bins.size(); ++b) power[b * n_frames + i] += std::norm(spec[bins[b]]);
    }
  }

  std::vector<std::size_t> base_frames;
  for (std::size_t i = 0; i < n_frames; ++i) {
    if (frame_time[i] >= options.baseline_begin_s - 1e-9 && frame_time[i] <= options.baseline_end_s + 1e-9) {
      base_frames.push_back(i);
    }
  }
  if (base_frames.empty()) fail(ErrorKind::kRange, "no STFT frame falls inside the baseline interval");

  std::vector<double> db(power.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    double base = 0.0;
    for (std::size_t i : base_frames) base += power[b * n_frames + i];
    base /= static_cast<double>(base_frames.size());
    require(base > 0.0, ErrorKind::kNumeric, "zero baseline power at " + std::to_string(out.freqs_hz[b]) + " Hz");
    for (std::size_t i = 0; i < n_frames; ++i) {
      const double p = power[b * n_frames + i];
      require(p > 0.0, ErrorKind::kNumeric, "zero power in ERSP frame");
      db[b * n_frames + i] = 10.0 * std::log10(p / base);
    }
  }

  // Linear resampling of the frame axis onto n_times evenly spaced points.
  const std::size_t nt = options.n_times;
  out.times_s.resize(nt);
  out.values_db.resize(bins.size() * nt);
  const double t0 = frame_time.front();
  const double t1 = frame_time.back();
  for (std::size_t j = 0; j < nt; ++j) {
    const double t = n_frames == 1 ? t0 : t0 + (t1 - t0) * static_cast<double>(j) / static_cast<double>(nt - 1);
    out.times_s[j] = t;
    const double pos = n_frames == 1 ? 0.0 : (t - t0) / (t1 - t0) * static_cast<double>(n_frames - 1);
    const auto i0 = std::min(static_cast<std::size_t>(pos), n_frames - 1);
    const std::size_t i1 = std::min(i0 + 1, n_frames - 1);
    const double frac = pos - static_cast<double>(i0);
    for (std::size_t b = 0; b < bins.size(); ++b) {
      out.values_db[b * nt + j] = (1.0 - frac) * db[b * n_frames + i0] + frac * db[b * n_frames + i1];
    }
  }
  return out;
}

std::vector<double> notch_60hz(std::span<const double> signal, double rate_hz) {
  if (rate_hz <= 120.0) fail(ErrorKind::kDesign, "60 Hz notch needs a sampling rate above 120 Hz");
  const double w0 = 2.0 * kPi * 60.0 / rate_hz;
  const double q = 60.0 / 2.0;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = 1.0 / a0;
  const double b1 = -2.0 * std::cos(w0) / a0;
  const double b2 = 1.0 / a0;
  const double a1 = -2.0 * std::cos(w0) / a0;
  const double a2 = (1.0 - alpha) / a0;
  std::vector<double> y(signal.size());
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
  for (std::size_t n = 0; n < signal.size(); ++n) {
    const double x0 = signal[n];
    const double y0 = b0 * x0 + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    y[n] = y0;
    x2 = x1;
    x1 = x0;
    y2 = y1;
    y1 = y0;
  }
  return y;
}

Dataset preprocess(const Dataset& dataset, const PreprocessConfig& config) {
  Dataset out{dataset.subject_id, dataset.montage, {}};
  out.trials.reserve(dataset.trials.size());
  std::optional<FirFilter> filter;
  if (config.bandpass) {
    filter = design_fir_bandpass(config.fir_order, config.band_low_hz, config.band_high_hz, config.target_rate_hz);
  }
  for (const auto& t : dataset.trials) {
    Trial d = t.rate_hz == config.target_rate_hz ? t : downsample(t, config.target_rate_hz);
    if (filter) d = bandpass(d, *filter);
    out.trials.push_back(std::move(d));
  }
  return out;
}

WindowSet make_windows(const Dataset& dataset, double window_s, double overlap) {
  WindowSet ws{dataset.subject_id, dataset.montage, dataset.rate_hz(), {}};
  for (const auto& t : dataset.trials) {
    auto w = sliding_windows(t, window_s, overlap);
    std::move(w.begin(), w.end(), std::back_inserter(ws.windows));
  }
  return ws;
}

void write_spectrum_csv(const std::filesystem::path& path, const std::vector<std::string>& channel_names,
                        const std::vector<Spectrum>& spectra) {
  require(channel_names.size() == spectra.size() && !spectra.empty(), ErrorKind::kContract,
          "one spectrum per channel name required");
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::kFormat, "cannot write " + path.string());
  os << "freq_hz";
  for (const auto& n : channel_names) os << ',' << n;
  os << '\n' << std::setprecision(10);
  for (std::size_t k = 0; k < spectra[0].freqs_hz.size(); ++k) {
    os << spectra[0].freqs_hz[k];
    for (const auto& s : spectra) os << ',' << s.power[k];
    os << '\n';
  }
}

void write_ersp_csv(const std::filesystem::path& path, const TimeFreqMap& map) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::kFormat, "cannot write " + path.string());
  os << "freq_hz" << std::setprecision(10);
  for (double t : map.times_s) os << ',' << t;
  os << '\n';
  for (std::size_t f = 0; f < map.freqs_hz.size(); ++f) {
    os << map.freqs_hz[f];
    for (std::size_t t = 0; t < map.times_s.size(); ++t) os << ',' << map.at(f, t);
    os << '\n';
  }
}

} // namespace fudnn
