#include <doctest.h>

#include <algorithm>
#include <random>

#include "fudnn/dsp.hpp"
#include "fudnn/error.hpp"
#include "oracles.hpp"

using namespace fudnn;

namespace {

double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

Trial make_trial(std::size_t k, double seconds, double rate, std::uint64_t seed) {
  Trial t;
  t.rate_hz = rate;
  t.data = SignalMatrix(k, static_cast<std::size_t>(seconds * rate));
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd;
  for (auto& v : t.data.data) v = nd(rng);
  return t;
}

} // namespace

TEST_SUITE("dsp") {
  TEST_CASE("band-pass design: zero DC, symmetric taps, unit peak in band") {
    const auto f = design_fir_bandpass(30, 0.5, 13.0, 250.0);
    REQUIRE(f.taps.size() == 31);
    double dc = 0.0;
    for (double h : f.taps) dc += h;
    CHECK(std::abs(dc) < 1e-12);
    for (std::size_t i = 0; i < f.taps.size(); ++i) CHECK(f.taps[i] == f.taps[f.taps.size() - 1 - i]);
    double peak = 0.0;
    for (double fr = 0.5; fr <= 13.0; fr += 0.01) peak = std::max(peak, std::abs(f.response(fr)));
    CHECK(peak == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(f.response(60.0)) < 0.05);
  }

  TEST_CASE("design rejects bands outside Nyquist") {
    CHECK_THROWS_AS(design_fir_bandpass(30, 0.5, 130.0, 250.0), Error);
    CHECK_THROWS_AS(design_fir_bandpass(30, 13.0, 0.5, 250.0), Error);
  }

  TEST_CASE("filtfilt has zero lag on a pure tone") {
    const auto f = design_fir_bandpass(30, 0.5, 13.0, 250.0);
    for (double freq : {5.0, 8.0, 10.0, 12.0}) {
      const auto x = oracle::tone(1250, freq, 250.0, 0.3);
      const auto y = filtfilt(x, f);
      CHECK(oracle::xcorr_peak_lag(x, y, 20) == 0);
    }
    // Slow tones: compare away from the edges.
    for (double freq : {1.0, 2.0, 3.0}) {
      const auto x = oracle::tone(1250, freq, 250.0, 1.0);
      const auto y = filtfilt(x, f);
      const std::span<const double> xi(x.data() + 125, 1000), yi(y.data() + 125, 1000);
      CHECK(oracle::xcorr_peak_lag(xi, yi, 20) == 0);
    }
  }

  TEST_CASE("filtfilt commutes with time reversal") {
    const auto f = design_fir_bandpass(30, 0.5, 13.0, 250.0);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    std::vector<double> x(1000);
    for (auto& v : x) v = nd(rng);
    auto y = filtfilt(x, f);
    std::vector<double> xr(x.rbegin(), x.rend());
    auto yr = filtfilt(xr, f);
    std::reverse(yr.begin(), yr.end());
    const double scale = max_abs(y);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(y[i] - yr[i]) <= 1e-9 * scale);
  }

  TEST_CASE("DC rejection through forward-backward band-pass") {
    const auto f = design_fir_bandpass(30, 0.5, 13.0, 250.0);
    std::vector<double> dc(1250, 5.0);
    const auto y = filtfilt(dc, f);
    CHECK(max_abs(y) / 5.0 <= 0.05);
  }

  TEST_CASE("filtfilt needs enough samples") {
    const auto f = design_fir_bandpass(30, 0.5, 13.0, 250.0);
    std::vector<double> x(50, 1.0);
    CHECK_THROWS_AS(filtfilt(x, f), Error);
  }

  TEST_CASE("single-pass magnitude squared equals the forward-backward gain") {
    const auto f = design_fir_bandpass(30, 0.5, 13.0, 250.0);
    const auto x = oracle::tone(2500, 10.0, 250.0);
    const auto y = filtfilt(x, f);
    const double g = std::norm(f.response(10.0));
    // Compare amplitudes away from the edges.
    double amp = 0.0;
    for (std::size_t i = 500; i < 2000; ++i) amp = std::max(amp, std::abs(y[i]));
    CHECK(amp == doctest::Approx(g).epsilon(1e-3));
  }

  TEST_CASE("downsample 1000 -> 250 Hz keeps a 10 Hz tone and drops 200 Hz") {
    Trial t;
    t.rate_hz = 1000.0;
    t.data = SignalMatrix(2, 5000);
    const auto a = oracle::tone(5000, 10.0, 1000.0);
    const auto b = oracle::tone(5000, 200.0, 1000.0);
    t.data.set_row(0, a);
    t.data.set_row(1, b);
    const auto d = downsample(t, 250.0);
    CHECK(d.rate_hz == 250.0);
    REQUIRE(d.data.samples == 1250);
    const auto r0 = d.data.row_as_double(0);
    const auto r1 = d.data.row_as_double(1);
    const auto ref = oracle::tone(1250, 10.0, 250.0);
    for (std::size_t i = 100; i < 1150; ++i) CHECK(std::abs(r0[i] - ref[i]) < 0.02);
    CHECK(max_abs(std::span<const double>(r1).subspan(100, 1050)) < 0.02);
    CHECK_THROWS_AS(downsample(t, 300.0), Error);
  }

  TEST_CASE("sliding windows: 4 per 5 s trial, 800 per 200 trials") {
    Dataset ds;
    ds.subject_id = "S1";
    ds.montage = Montage::default_64();
    for (int i = 0; i < 200; ++i) {
      Trial t;
      t.rate_hz = 250.0;
      t.data = SignalMatrix(2, 1250);
      t.trial_id = i;
      t.label = kAllClasses[static_cast<std::size_t>(i % 4)];
      ds.trials.push_back(std::move(t));
    }
    const auto w = sliding_windows(ds.trials[0]);
    REQUIRE(w.size() == 4);
    CHECK(w[0].start == 0);
    CHECK(w[1].start == 250);
    CHECK(w[3].start == 750);
    CHECK(w[3].data.samples == 500);
    CHECK(make_windows(ds, 2.0, 0.5).windows.size() == 800);
  }

  TEST_CASE("window contents are slices of the trial") {
    auto t = make_trial(3, 5.0, 250.0, 4);
    t.trial_id = 9;
    const auto w = sliding_windows(t, 2.0, 0.5);
    for (const auto& x : w) {
      CHECK(x.trial_id == 9);
      for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t i = 0; i < x.data.samples; i += 37) CHECK(x.data.at(k, i) == t.data.at(k, x.start + i));
      }
    }
    CHECK_THROWS_AS(sliding_windows(t, 6.0, 0.5), Error);
    CHECK_THROWS_AS(sliding_windows(t, 2.0, 1.0), Error);
  }

  TEST_CASE("analytic phase of a cosine advances linearly") {
    const auto x = oracle::tone(1000, 10.0, 250.0, 0.5);
    const auto a = instantaneous_phase(x);
    CHECK_FALSE(a.degenerate);
    for (std::size_t i = 100; i < 900; i += 25) {
      const double expected = std::remainder(2.0 * std::numbers::pi * 10.0 * static_cast<double>(i) / 250.0 + 0.5,
                                             2.0 * std::numbers::pi);
      CHECK(std::abs(std::remainder(a.phase[i] - expected, 2.0 * std::numbers::pi)) < 1e-6);
      CHECK(a.amplitude[i] == doctest::Approx(1.0).epsilon(1e-6));
    }
    std::vector<double> zeros(64, 0.0);
    CHECK(instantaneous_phase(zeros).degenerate);
  }

  TEST_CASE("Welch PSD peaks at the tone and integrates to the variance") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(0.0, 0.1);
    auto x = oracle::tone(5000, 11.0, 250.0, 0.0, 2.0);
    for (auto& v : x) v += nd(rng);
    const auto s = psd_welch(x, 250.0, 250);
    const auto it = std::max_element(s.power.begin(), s.power.end());
    CHECK(s.freqs_hz[static_cast<std::size_t>(it - s.power.begin())] == doctest::Approx(11.0));
    double area = 0.0;
    const double df = s.freqs_hz[1] - s.freqs_hz[0];
    for (double p : s.power) area += p * df;
    CHECK(area == doctest::Approx(2.0 + 0.01).epsilon(0.05));
  }

  TEST_CASE("ERSP shows a power increase after onset") {
    std::vector<Trial> trials;
    std::mt19937_64 rng(12);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 20; ++i) {
      Trial t;
      t.rate_hz = 250.0;
      t.onset_s = 1.0;
      t.data = SignalMatrix(1, 1000);
      std::vector<double> x(1000);
      for (std::size_t s = 0; s < 1000; ++s) {
        x[s] = nd(rng) * 0.5;
        if (s >= 250) x[s] += 3.0 * std::cos(2.0 * std::numbers::pi * 10.0 * static_cast<double>(s) / 250.0);
      }
      t.data.set_row(0, x);
      trials.push_back(std::move(t));
    }
    ErspOptions opt;
    opt.freq_high_hz = 30.0;
    opt.n_times = 50;
    opt.stft_window_s = 0.5;
    const auto m = ersp(trials, 0, opt);
    std::size_t f10 = 0;
    for (std::size_t f = 0; f < m.freqs_hz.size(); ++f) {
      if (std::abs(m.freqs_hz[f] - 10.0) < std::abs(m.freqs_hz[f10] - 10.0)) f10 = f;
    }
    double late = -1e9;
    for (std::size_t t = 0; t < m.times_s.size(); ++t) {
      if (m.times_s[t] > 1.0) late = std::max(late, m.at(f10, t));
    }
    CHECK(late > 10.0);
  }

  TEST_CASE("60 Hz notch removes the line and keeps 10 Hz") {
    auto x = oracle::tone(5000, 60.0, 1000.0);
    const auto alpha = oracle::tone(5000, 10.0, 1000.0);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += alpha[i];
    const auto y = notch_60hz(x, 1000.0);
    double err = 0.0;
    for (std::size_t i = 3000; i < 5000; ++i) err = std::max(err, std::abs(y[i] - alpha[i]));
    CHECK(err < 0.1);
  }

  TEST_CASE("preprocess downsamples and filters every trial") {
    Dataset ds;
    ds.subject_id = "S1";
    ds.montage.labels = {"Fz", "Oz"};
    for (int i = 0; i < 4; ++i) {
      auto t = make_trial(2, 5.0, 1000.0, static_cast<std::uint64_t>(i));
      t.trial_id = i;
      t.subject_id = "S1";
      ds.trials.push_back(std::move(t));
    }
    const auto pp = preprocess(ds, PreprocessConfig{});
    REQUIRE(pp.trials.size() == 4);
    for (const auto& t : pp.trials) {
      CHECK(t.rate_hz == 250.0);
      CHECK(t.data.samples == 1250);
      CHECK(t.data.all_finite());
    }
    CHECK(make_windows(pp, 2.0, 0.5).windows.size() == 16);
  }
}
