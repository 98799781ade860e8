#include "fudnn/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "fudnn/error.hpp"
#include "fudnn/fft.hpp"
#include "fudnn/random.hpp"

namespace fudnn {

std::string_view to_string(CarrierBand band) {
  return band == CarrierBand::kDelta ? "delta" : "alpha";
}

CarrierBand parse_carrier_band(std::string_view text) {
  if (text == "delta") return CarrierBand::kDelta;
  if (text == "alpha") return CarrierBand::kAlpha;
  fail(ErrorKind::kConfig, "unknown carrier band '" + std::string(text) + "' (expected delta or alpha)");
}

BandRange analysis_band(CarrierBand band) {
  return band == CarrierBand::kDelta ? BandRange{0.5, 4.0} : BandRange{8.0, 13.0};
}

BandRange carrier_range(CarrierBand band) {
  return band == CarrierBand::kDelta ? BandRange{1.5, 3.5} : BandRange{9.0, 12.0};
}

std::vector<std::string> frontal_group() { return {"Fp1", "Fp2", "AF7", "AF8", "AF3", "AF4", "AFz", "Fz"}; }
std::vector<std::string> occipital_group() { return {"O1", "O2", "Oz", "POz", "PO3", "PO4", "PO7", "Iz"}; }
std::vector<std::string> left_central_group() { return {"FC5", "FC3", "C5", "C3", "C1", "CP5", "CP3", "T7"}; }
std::vector<std::string> right_central_group() { return {"FC6", "FC4", "C6", "C4", "C2", "CP6", "CP4", "T8"}; }

SynthSpec SynthSpec::defaults() {
  SynthSpec s;
  s.sources = {
      {ClassLabel::PP, frontal_group(), CarrierBand::kDelta, 1.0},
      {ClassLabel::PW, occipital_group(), CarrierBand::kAlpha, 1.0},
      {ClassLabel::OD, left_central_group(), CarrierBand::kAlpha, 1.0},
      {ClassLabel::EF, right_central_group(), CarrierBand::kAlpha, 1.0},
  };
  return s;
}

void SynthSpec::validate(const Montage& montage) const {
  require(n_subjects >= 1, ErrorKind::kConfig, "n_subjects must be >= 1");
  require(trials_per_class >= 1, ErrorKind::kConfig, "trials_per_class must be >= 1");
  require(rate_hz > 0.0 && duration_s > 0.0 && pre_s >= 0.0, ErrorKind::kConfig,
          "rate, duration and lead-in must be positive");
  require(source_amplitude_uv >= 0.0 && noise_sd_uv >= 0.0 && jitter_sd >= 0.0, ErrorKind::kConfig,
          "amplitudes and jitter must be non-negative");
  require(!classes.empty(), ErrorKind::kConfig, "at least one class is required");
  require(std::set<ClassLabel>(classes.begin(), classes.end()).size() == classes.size(), ErrorKind::kConfig,
          "duplicate class in synth spec");
  for (const auto& src : sources) {
    require(src.coupling >= 0.0 && src.coupling <= 1.0, ErrorKind::kConfig, "coupling must be in [0, 1]");
    require(!src.channels.empty(), ErrorKind::kConfig, "source group is empty");
    for (const auto& ch : src.channels) {
      require(montage.index_of(ch).has_value(), ErrorKind::kConfig, "source channel '" + ch + "' not in montage");
    }
    require(carrier_range(src.band).high_hz < rate_hz / 2.0, ErrorKind::kConfig, "carrier above Nyquist");
  }
}

nlohmann::json SynthSpec::to_json() const {
  nlohmann::ordered_json j;
  j["n_subjects"] = n_subjects;
  j["trials_per_class"] = trials_per_class;
  j["rate_hz"] = rate_hz;
  j["duration_s"] = duration_s;
  j["pre_s"] = pre_s;
  j["source_amplitude_uv"] = source_amplitude_uv;
  j["noise_sd_uv"] = noise_sd_uv;
  j["jitter_sd"] = jitter_sd;
  j["pink_noise"] = pink_noise;
  j["seed"] = seed;
  std::vector<std::string> cls;
  for (auto c : classes) cls.emplace_back(fudnn::to_string(c));
  j["classes"] = cls;
  auto src = nlohmann::ordered_json::array();
  for (const auto& s : sources) {
    nlohmann::ordered_json e;
    e["label"] = std::string(fudnn::to_string(s.label));
    e["channels"] = s.channels;
    e["band"] = std::string(fudnn::to_string(s.band));
    e["coupling"] = s.coupling;
    src.push_back(e);
  }
  j["sources"] = src;
  return j;
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  SynthSpec s = defaults();
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("n_subjects", s.n_subjects);
    get("trials_per_class", s.trials_per_class);
    get("rate_hz", s.rate_hz);
    get("duration_s", s.duration_s);
    get("pre_s", s.pre_s);
    get("source_amplitude_uv", s.source_amplitude_uv);
    get("noise_sd_uv", s.noise_sd_uv);
    get("jitter_sd", s.jitter_sd);
    get("pink_noise", s.pink_noise);
    get("seed", s.seed);
    if (j.contains("classes")) {
      s.classes.clear();
      for (const auto& c : j.at("classes")) s.classes.push_back(parse_class_label(c.get<std::string>()));
    }
    if (j.contains("sources")) {
      s.sources.clear();
      for (const auto& e : j.at("sources")) {
        SourceDef d;
        d.label = parse_class_label(e.at("label").get<std::string>());
        d.channels = e.at("channels").get<std::vector<std::string>>();
        d.band = parse_carrier_band(e.at("band").get<std::string>());
        d.coupling = e.value("coupling", 1.0);
        s.sources.push_back(std::move(d));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("synth spec: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, std::string("synth spec: ") + e.what());
  }
  s.validate(Montage::default_64());
  return s;
}

namespace {

// White Gaussian noise, optionally shaped to a 1/f power spectrum with the
// same standard deviation.
std::vector<double> noise_series(std::size_t n, double sd, bool pink, double rate_hz, std::mt19937_64& rng) {
  std::vector<double> x(n, 0.0);
  if (sd == 0.0) return x;
  std::normal_distribution<double> nd(0.0, sd);
  for (auto& v : x) v = nd(rng);
  if (!pink || n < 4) return x;
  std::vector<std::complex<double>> c(x.begin(), x.end());
  auto spec = fft(c);
  for (std::size_t j = 0; j < n; ++j) {
    const double f = static_cast<double>(std::min(j, n - j)) * rate_hz / static_cast<double>(n);
    spec[j] *= j == 0 ? 0.0 : 1.0 / std::sqrt(f);
  }
  const auto back = ifft(spec);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = back[i].real();
    ss += x[i] * x[i];
  }
  const double scale = ss > 0.0 ? sd / std::sqrt(ss / static_cast<double>(n)) : 0.0;
  for (auto& v : x) v *= scale;
  return x;
}

struct ActiveSource {
  double freq_hz;
  double phase;
};

ActiveSource draw_source(const SourceDef& src, std::mt19937_64& rng) {
  const auto cr = carrier_range(src.band);
  std::uniform_real_distribution<double> fd(cr.low_hz, cr.high_hz);
  std::uniform_real_distribution<double> pd(0.0, 2.0 * std::numbers::pi);
  const double f = fd(rng);
  return {f, pd(rng)};
}

} // namespace

std::vector<Dataset> generate(const SynthSpec& spec) {
  const Montage montage = Montage::default_64();
  spec.validate(montage);
  const auto pre = static_cast<std::size_t>(std::llround(spec.pre_s * spec.rate_hz));
  const auto len = static_cast<std::size_t>(std::llround(spec.duration_s * spec.rate_hz));
  require(len >= 1, ErrorKind::kConfig, "trial duration shorter than one sample");

  std::vector<std::vector<std::size_t>> source_channels;
  for (const auto& src : spec.sources) {
    std::vector<std::size_t> idx;
    for (const auto& ch : src.channels) idx.push_back(*montage.index_of(ch));
    source_channels.push_back(std::move(idx));
  }

  std::vector<Dataset> out;
  for (int s = 0; s < spec.n_subjects; ++s) {
    const std::uint64_t subj_seed = derive_seed(spec.seed, {1, static_cast<std::uint64_t>(s)});
    std::mt19937_64 srng(subj_seed);
    std::normal_distribution<double> jitter(0.0, 1.0);
    std::vector<double> gain(montage.size());
    for (auto& g : gain) g = std::max(0.0, 1.0 + spec.jitter_sd * jitter(srng));

    std::vector<ClassLabel> order;
    for (auto c : spec.classes) order.insert(order.end(), static_cast<std::size_t>(spec.trials_per_class), c);
    std::shuffle(order.begin(), order.end(), srng);

    Dataset ds;
    ds.subject_id = "S" + std::to_string(s + 1);
    ds.montage = montage;
    for (std::size_t i = 0; i < order.size(); ++i) {
      std::mt19937_64 trng(derive_seed(subj_seed, {2, i}));
      Trial t;
      t.label = order[i];
      t.rate_hz = spec.rate_hz;
      t.subject_id = ds.subject_id;
      t.trial_id = static_cast<int>(i);
      t.onset_s = static_cast<double>(pre) / spec.rate_hz;
      t.data = SignalMatrix(montage.size(), pre + len);

      std::vector<double> acc(montage.size() * (pre + len), 0.0);
      for (std::size_t si = 0; si < spec.sources.size(); ++si) {
        const auto& src = spec.sources[si];
        if (src.label != t.label) continue;
        const auto a = draw_source(src, trng);
        const double w = 2.0 * std::numbers::pi * a.freq_hz / spec.rate_hz;
        for (auto k : source_channels[si]) {
          const double amp = src.coupling * spec.source_amplitude_uv * gain[k];
          double* row = acc.data() + k * (pre + len) + pre;
          for (std::size_t n = 0; n < len; ++n) row[n] += amp * std::cos(w * static_cast<double>(n) + a.phase);
        }
      }
      for (std::size_t k = 0; k < montage.size(); ++k) {
        const auto noise = noise_series(pre + len, spec.noise_sd_uv, spec.pink_noise, spec.rate_hz, trng);
        double* row = acc.data() + k * (pre + len);
        for (std::size_t n = 0; n < pre + len; ++n) t.data.at(k, n) = static_cast<float>(row[n] + noise[n]);
      }
      ds.trials.push_back(std::move(t));
    }
    out.push_back(std::move(ds));
  }
  return out;
}

double oracle_separability(const SynthSpec& spec, std::size_t draws, std::uint64_t seed) {
  const Montage montage = Montage::default_64();
  spec.validate(montage);
  require(draws >= spec.classes.size(), ErrorKind::kConfig, "need at least one draw per class");
  const auto len = static_cast<std::size_t>(std::llround(spec.duration_s * spec.rate_hz));
  const std::size_t n_src = spec.sources.size();
  const std::size_t n_cls = spec.classes.size();

  std::vector<std::vector<std::size_t>> groups;
  std::set<std::size_t> seen;
  bool disjoint = true;
  for (const auto& src : spec.sources) {
    std::vector<std::size_t> idx;
    for (const auto& ch : src.channels) {
      const std::size_t k = *montage.index_of(ch);
      idx.push_back(k);
      disjoint = seen.insert(k).second && disjoint;
    }
    groups.push_back(std::move(idx));
  }

  // Per-source band-limited log power of the group-mean signal.
  auto features = [&](ClassLabel label, std::mt19937_64& rng) {
    std::vector<std::vector<double>> mean(n_src, std::vector<double>(len, 0.0));
    for (std::size_t si = 0; si < n_src; ++si) {
      const auto& src = spec.sources[si];
      if (src.label != label) continue;
      const auto a = draw_source(src, rng);
      const double w = 2.0 * std::numbers::pi * a.freq_hz / spec.rate_hz;
      const double amp = src.coupling * spec.source_amplitude_uv;
      // Every group containing an active channel sees the oscillator in
      // proportion to its overlap.
      for (std::size_t g = 0; g < n_src; ++g) {
        std::size_t shared = 0;
        for (auto k : groups[g]) shared += std::count(groups[si].begin(), groups[si].end(), k);
        if (shared == 0) continue;
        const double frac = static_cast<double>(shared) / static_cast<double>(groups[g].size());
        for (std::size_t n = 0; n < len; ++n) mean[g][n] += frac * amp * std::cos(w * static_cast<double>(n) + a.phase);
      }
    }
    if (disjoint) {
      // The mean of m iid noise channels is the same process scaled by 1/sqrt(m).
      for (std::size_t g = 0; g < n_src; ++g) {
        const double sd = spec.noise_sd_uv / std::sqrt(static_cast<double>(groups[g].size()));
        const auto nz = noise_series(len, sd, spec.pink_noise, spec.rate_hz, rng);
        for (std::size_t n = 0; n < len; ++n) mean[g][n] += nz[n];
      }
    } else {
      std::map<std::size_t, std::vector<double>> per_channel;
      for (auto k : seen) per_channel[k] = noise_series(len, spec.noise_sd_uv, spec.pink_noise, spec.rate_hz, rng);
      for (std::size_t g = 0; g < n_src; ++g) {
        const double inv = 1.0 / static_cast<double>(groups[g].size());
        for (auto k : groups[g]) {
          for (std::size_t n = 0; n < len; ++n) mean[g][n] += inv * per_channel[k][n];
        }
      }
    }
    std::vector<double> f(n_src);
    for (std::size_t g = 0; g < n_src; ++g) {
      const auto spec_g = rfft(mean[g]);
      const auto band = analysis_band(spec.sources[g].band);
      double p = 0.0;
      for (std::size_t j = 0; j < spec_g.size(); ++j) {
        const double fj = static_cast<double>(j) * spec.rate_hz / static_cast<double>(len);
        if (fj >= band.low_hz && fj <= band.high_hz) p += std::norm(spec_g[j]);
      }
      f[g] = std::log(p / static_cast<double>(len) + 1e-12);
    }
    return f;
  };

  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> templ(n_cls, std::vector<double>(n_src, 0.0));
  std::vector<std::size_t> counts(n_cls, 0);
  for (std::size_t d = 0; d < draws; ++d) {
    const std::size_t c = d % n_cls;
    const auto f = features(spec.classes[c], rng);
    for (std::size_t g = 0; g < n_src; ++g) templ[c][g] += f[g];
    ++counts[c];
  }
  for (std::size_t c = 0; c < n_cls; ++c) {
    for (auto& v : templ[c]) v /= static_cast<double>(counts[c]);
  }
  std::size_t correct = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    const std::size_t c = d % n_cls;
    const auto f = features(spec.classes[c], rng);
    std::size_t best = 0;
    double best_d = 0.0;
    for (std::size_t k = 0; k < n_cls; ++k) {
      double dist = 0.0;
      for (std::size_t g = 0; g < n_src; ++g) dist += (f[g] - templ[k][g]) * (f[g] - templ[k][g]);
      if (k == 0 || dist < best_d) {
        best = k;
        best_d = dist;
      }
    }
    if (best == c) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(draws);
}

} // namespace fudnn
