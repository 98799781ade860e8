#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <cmath>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fudnn/connectivity.hpp"
#include "fudnn/dsp.hpp"
#include "fudnn/eeg.hpp"
#include "fudnn/eegc.hpp"
#include "fudnn/error.hpp"
#include "fudnn/experiment.hpp"
#include "fudnn/nn/checkpoint.hpp"
#include "fudnn/nn/gradcheck.hpp"
#include "fudnn/parallel.hpp"
#include "fudnn/random.hpp"
#include "fudnn/report.hpp"
#include "fudnn/synthgen.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using namespace fudnn;

namespace {

std::vector<std::string> g_argv;
std::optional<int> g_threads;

void note(const std::string& s) { std::cerr << s << '\n'; }

std::pair<double, double> parse_band(const std::string& text) {
  const auto colon = text.find(':');
  require(colon != std::string::npos, ErrorKind::kConfig, "band must be LOW:HIGH, got '" + text + "'");
  try {
    return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
  } catch (const std::logic_error&) {
    fail(ErrorKind::kConfig, "band must be LOW:HIGH, got '" + text + "'");
  }
}

fs::path prepare_out(const fs::path& out) {
  fs::create_directories(out);
  return out;
}

cli::RunManifest manifest_for(const std::string& cmd) {
  cli::RunManifest m(cmd, g_argv);
  m.set_threads(resolve_threads(g_threads));
  return m;
}

Dataset load_dataset_any(const fs::path& path) {
  require(fs::exists(path), ErrorKind::kFormat, "no such file: " + path.string());
  require(peek_eegc_kind(path) == EegcKind::kDataset, ErrorKind::kFormat,
          path.string() + ": expected an epoched dataset (run preprocess first)");
  return load_dataset(path);
}

// ---- synth ----

struct SynthOpts {
  std::string spec_file, out;
  std::optional<int> subjects, trials_per_class;
  std::optional<std::uint64_t> seed;
  std::optional<double> rate, noise, amplitude, pre, jitter;
  bool pink = false;
};

void cmd_synth(const SynthOpts& o) {
  auto man = manifest_for("synth");
  SynthSpec spec = SynthSpec::defaults();
  if (!o.spec_file.empty()) {
    man.add_input(o.spec_file);
    spec = SynthSpec::from_json(read_json(o.spec_file));
  }
  if (o.subjects) spec.n_subjects = *o.subjects;
  if (o.trials_per_class) spec.trials_per_class = *o.trials_per_class;
  if (o.seed) spec.seed = *o.seed;
  if (o.rate) spec.rate_hz = *o.rate;
  if (o.noise) spec.noise_sd_uv = *o.noise;
  if (o.amplitude) spec.source_amplitude_uv = *o.amplitude;
  if (o.pre) spec.pre_s = *o.pre;
  if (o.jitter) spec.jitter_sd = *o.jitter;
  if (o.pink) spec.pink_noise = true;
  spec.validate(Montage::default_64());
  const auto out = prepare_out(o.out);
  const auto subjects = generate(spec);
  for (const auto& ds : subjects) {
    save_eegc(ds, out / (ds.subject_id + ".eegc"));
    note("wrote " + (out / (ds.subject_id + ".eegc")).string() + " (" + std::to_string(ds.trials.size()) + " trials)");
  }
  write_json(out / "synth_spec.json", spec.to_json());
  man.set_config(spec.to_json());
  man.add_seed("synth", spec.seed);
  man.write(out);
}

// ---- preprocess ----

struct PreprocessOpts {
  std::vector<std::string> inputs;
  std::string out, band = "0.5:13", sidecar, epoch = "0:5", labels = "1:PP,2:PW,3:OD,4:EF";
  double rate = 250.0, window = 2.0, overlap = 0.5;
  int order = 30;
  bool no_bandpass = false;
};

std::map<int, ClassLabel> parse_label_map(const std::string& text) {
  std::map<int, ClassLabel> m;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    require(colon != std::string::npos, ErrorKind::kConfig, "label map entries are CODE:LABEL, got '" + item + "'");
    try {
      m[std::stoi(item.substr(0, colon))] = parse_class_label(item.substr(colon + 1));
    } catch (const std::logic_error&) {
      fail(ErrorKind::kConfig, "bad label map entry '" + item + "'");
    }
  }
  return m;
}

void cmd_preprocess(const PreprocessOpts& o) {
  auto man = manifest_for("preprocess");
  PreprocessConfig cfg;
  std::tie(cfg.band_low_hz, cfg.band_high_hz) = parse_band(o.band);
  cfg.target_rate_hz = o.rate;
  cfg.fir_order = o.order;
  cfg.bandpass = !o.no_bandpass;
  cfg.window_s = o.window;
  cfg.overlap = o.overlap;
  const auto [ep_off, ep_len] = parse_band(o.epoch);
  const auto label_map = parse_label_map(o.labels);
  const auto out = prepare_out(o.out);
  for (const auto& in_s : o.inputs) {
    const fs::path in(in_s);
    require(fs::exists(in), ErrorKind::kFormat, "no such file: " + in.string());
    man.add_input(in);
    Dataset ds;
    const std::string stem = in.stem().string();
    if (in.extension() == ".csv") {
      const fs::path side = o.sidecar.empty() ? fs::path(in).replace_extension(".json") : fs::path(o.sidecar);
      man.add_input(side);
      const auto imp = import_csv(in, side);
      ds.subject_id = stem;
      ds.montage = imp.recording.montage;
      ds.trials = epoch(imp.recording, ep_off, ep_len, imp.label_map.empty() ? label_map : imp.label_map, stem);
    } else {
      switch (peek_eegc_kind(in)) {
        case EegcKind::kDataset: ds = load_dataset(in); break;
        case EegcKind::kRecording: {
          const auto rec = load_recording(in);
          ds.subject_id = stem;
          ds.montage = rec.montage;
          ds.trials = epoch(rec, ep_off, ep_len, label_map, stem);
          break;
        }
        case EegcKind::kWindows: fail(ErrorKind::kFormat, in.string() + ": already windowed");
      }
    }
    const Dataset pp = preprocess(ds, cfg);
    const WindowSet ws = make_windows(pp, cfg.window_s, cfg.overlap);
    save_eegc(pp, out / (stem + ".eegc"));
    save_eegc(ws, out / (stem + ".windows.eegc"));
    note(stem + ": " + std::to_string(pp.trials.size()) + " trials at " + fmt_double(pp.rate_hz(), 1) + " Hz -> " +
         std::to_string(ws.windows.size()) + " windows");
  }
  man.set_config({{"target_rate_hz", cfg.target_rate_hz},
                  {"band_hz", {cfg.band_low_hz, cfg.band_high_hz}},
                  {"fir_order", cfg.fir_order},
                  {"bandpass", cfg.bandpass},
                  {"window_s", cfg.window_s},
                  {"overlap", cfg.overlap},
                  {"epoch", {ep_off, ep_len}}});
  man.write(out);
}

// ---- plv ----

struct PlvOpts {
  std::string input, out, band;
  double threshold = 0.9, window = 2.0, overlap = 0.5;
};

void cmd_plv(const PlvOpts& o) {
  auto man = manifest_for("plv");
  man.add_input(o.input);
  WindowSet ws;
  if (peek_eegc_kind(o.input) == EegcKind::kWindows) {
    ws = load_windows(o.input);
  } else {
    ws = make_windows(load_dataset_any(o.input), o.window, o.overlap);
  }
  require(!ws.windows.empty(), ErrorKind::kInvalidInput, "no windows in " + o.input);
  std::optional<SubbandOptions> band;
  if (!o.band.empty()) {
    const auto [lo, hi] = parse_band(o.band);
    band = SubbandOptions{lo, hi};
  }
  const auto out = prepare_out(o.out);
  auto emit = [&](const std::string& tag, std::span<const Window> w) {
    const auto fit = fit_connectivity(w, ws.rate_hz, band);
    write_plv_matrix_csv(out / ("plv_" + tag + ".csv"), fit.symmetric, ws.montage);
    write_edges_csv(out / ("edges_" + tag + ".csv"), threshold_edges(fit.symmetric, o.threshold), ws.montage);
    write_weights_json(out / ("weights_" + tag + ".json"), fit.weights, ws.montage);
  };
  for (auto c : kAllClasses) {
    std::vector<Window> cw;
    for (const auto& w : ws.windows) {
      if (w.label == c) cw.push_back(w);
    }
    if (!cw.empty()) emit(std::string(to_string(c)), cw);
  }
  emit("all", ws.windows);
  man.set_config({{"threshold", o.threshold}, {"band", o.band.empty() ? "none" : o.band}});
  man.write(out);
}

// ---- shared experiment config ----

struct ExpOpts {
  std::string input, config, out, variant, network;
  std::optional<int> epochs, folds, class_set;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  bool shuffle = false;
};

void add_exp_options(CLI::App* sub, ExpOpts& o) {
  sub->add_option("--config", o.config, "experiment config JSON")->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, "output directory")->required();
  sub->add_option("--variant", o.variant, "CNN-I | CNN-II | CNN-III | FuDNN");
  sub->add_option("--network", o.network, "desk | table_one");
  sub->add_option("--epochs", o.epochs);
  sub->add_option("--folds", o.folds);
  sub->add_option("--class-set", o.class_set, "2, 3 or 4");
  sub->add_option("--seed", o.seed);
  sub->add_option("--lr", o.lr);
  sub->add_flag("--shuffle-labels", o.shuffle, "null control: permute trial labels before splitting");
}

ExperimentConfig build_config(const ExpOpts& o, cli::RunManifest& man) {
  ExperimentConfig cfg;
  if (!o.config.empty()) {
    man.add_input(o.config);
    cfg = ExperimentConfig::from_json(read_json(o.config), cfg);
  }
  if (!o.network.empty()) {
    if (o.network == "desk") cfg.network = nn::NetworkSpec::desk();
    else if (o.network == "table_one") cfg.network = nn::NetworkSpec::table_one();
    else fail(ErrorKind::kConfig, "--network must be desk or table_one");
  }
  if (!o.variant.empty()) cfg.variant = nn::parse_variant(o.variant);
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.folds) cfg.folds = *o.folds;
  if (o.class_set) cfg.class_set = *o.class_set;
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.train.seed = *o.seed;
  }
  if (o.lr) cfg.train.adam.lr = *o.lr;
  if (o.shuffle) cfg.shuffle_labels = true;
  cfg.threads = resolve_threads(g_threads);
  cfg.validate();
  man.set_config(cfg.to_json());
  man.add_seed("experiment", cfg.seed);
  return cfg;
}

Progress progress_printer() {
  return [](const std::string& s) { note(s); };
}

// ---- train ----

void cmd_train(const ExpOpts& o, bool no_cv) {
  auto man = manifest_for("train");
  man.add_input(o.input);
  const auto cfg = build_config(o, man);
  const Dataset ds = load_dataset_any(o.input);
  const auto out = prepare_out(o.out);
  if (!no_cv) {
    const auto m = run_subject_dependent(ds, cfg, progress_printer());
    const std::vector<Metrics> ms{m};
    write_results_csv(out / "results.csv", ms);
    write_json(out / "summary.json", summary_json(ms));
    write_confusion_csv(out / "confusion.csv", m, cfg.classes());
    note(std::string(nn::to_string(m.variant)) + " mean accuracy " + fmt_double(m.mean, 4) + " (sd " +
         fmt_double(m.sd, 4) + ")");
  }
  // Final model on every trial of the configured classes.
  Dataset all = filter_classes(ds, cfg.classes());
  if (cfg.shuffle_labels) all = shuffle_labels(all, derive_seed(cfg.seed, {0x5u}));
  const auto windows = make_windows(all, cfg.window_s, cfg.overlap).windows;
  const auto spec = cfg.network_for(cfg.variant);
  std::optional<ChannelWeights> weights;
  if (spec.uses_channel_weights()) weights = fit_weights(windows, all.montage, all.rate_hz());
  const std::uint64_t final_seed = derive_seed(cfg.seed, {0xf1a1});
  man.add_seed("final_model", final_seed);
  nn::Classifier clf(spec, cfg.classes(), weights, final_seed);
  nn::TrainConfig tc = cfg.train;
  tc.seed = derive_seed(final_seed, {0x7a1});
  const auto history = clf.fit(windows, tc, [](const nn::EpochStats& e) {
    note("final model epoch " + std::to_string(e.epoch) + " loss " + fmt_double(e.loss, 4) + " train acc " +
         fmt_double(e.accuracy, 4));
  });
  write_history_csv(out / "history.csv", history);
  nn::save_checkpoint(out / "model", clf, tc);
  man.write(out);
}

// ---- eval ----

struct EvalOpts {
  std::string model, data, out;
  double overlap = 0.5;
};

void cmd_eval(const EvalOpts& o) {
  auto man = manifest_for("eval");
  man.add_input(o.model);
  man.add_input(o.data);
  const auto clf = nn::load_checkpoint(o.model);
  WindowSet ws;
  if (peek_eegc_kind(o.data) == EegcKind::kWindows) {
    ws = load_windows(o.data);
  } else {
    const Dataset ds = load_dataset_any(o.data);
    ws = make_windows(ds, static_cast<double>(clf.spec().samples) / ds.rate_hz(), o.overlap);
  }
  std::vector<Window> windows;
  for (auto& w : ws.windows) {
    if (std::find(clf.classes().begin(), clf.classes().end(), w.label) != clf.classes().end()) {
      windows.push_back(std::move(w));
    }
  }
  require(!windows.empty(), ErrorKind::kInvalidInput, "no windows of the model's classes in " + o.data);
  const auto ev = clf.evaluate(windows);
  const auto out = prepare_out(o.out);
  write_predictions_csv(out / "predictions.csv", windows, ev, clf.classes());
  std::vector<std::string> names;
  for (auto c : clf.classes()) names.emplace_back(to_string(c));
  write_json(out / "metrics.json",
             {{"accuracy", ev.accuracy}, {"windows", windows.size()}, {"classes", names}, {"confusion", ev.confusion}});
  note("accuracy " + fmt_double(ev.accuracy, 4) + " on " + std::to_string(windows.size()) + " windows");
  man.write(out);
}

// ---- ablation ----

void cmd_ablation(const ExpOpts& o, int n_perm) {
  auto man = manifest_for("ablation");
  man.add_input(o.input);
  const auto cfg = build_config(o, man);
  const Dataset ds = load_dataset_any(o.input);
  const auto out = prepare_out(o.out);
  const auto ms = run_ablation(ds, cfg, progress_printer(), n_perm);
  write_results_csv(out / "results.csv", ms);
  write_json(out / "summary.json", summary_json(ms));
  for (const auto& m : ms) note(std::string(nn::to_string(m.variant)) + " " + fmt_double(m.mean, 4));
  man.write(out);
}

// ---- loso ----

void cmd_loso(const ExpOpts& o, const std::string& target) {
  auto man = manifest_for("loso");
  const auto cfg = build_config(o, man);
  require(fs::is_directory(o.input), ErrorKind::kFormat, o.input + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(o.input)) {
    if (e.path().extension() == ".eegc" && peek_eegc_kind(e.path()) == EegcKind::kDataset) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  require(files.size() >= 2, ErrorKind::kFormat, "LOSO needs at least two subject datasets in " + o.input);
  std::vector<Dataset> subjects;
  for (const auto& f : files) {
    man.add_input(f);
    subjects.push_back(load_dataset(f));
  }
  std::vector<std::string> targets;
  if (target == "all") {
    for (const auto& s : subjects) targets.push_back(s.subject_id);
  } else {
    targets.push_back(target);
  }
  const auto out = prepare_out(o.out);
  std::vector<Metrics> ms;
  nlohmann::json detail = nlohmann::json::array();
  for (const auto& t : targets) {
    auto r = run_loso(subjects, t, cfg, progress_printer());
    detail.push_back({{"target", t},
                      {"train_subjects", r.train_subjects},
                      {"train_windows", r.train_windows},
                      {"test_windows", r.test_windows},
                      {"accuracy", r.metrics.mean}});
    ms.push_back(std::move(r.metrics));
  }
  write_results_csv(out / "results.csv", ms);
  write_json(out / "summary.json", {{"targets", detail}, {"metrics", summary_json(ms)}});
  man.write(out);
}

// ---- analyze ----

struct AnalyzeOpts {
  std::string input, out, channels;
  bool psd = false, ersp = false;
  double seg_s = 1.0, baseline_s = 0.5;
};

std::vector<std::size_t> channel_indices(const Montage& m, const std::string& list) {
  std::vector<std::size_t> idx;
  if (list.empty()) {
    for (std::size_t k = 0; k < m.size(); ++k) idx.push_back(k);
    return idx;
  }
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    const auto k = m.index_of(name);
    require(k.has_value(), ErrorKind::kMapping, "unknown channel '" + name + "'");
    idx.push_back(*k);
  }
  return idx;
}

void cmd_analyze(const AnalyzeOpts& o) {
  require(o.psd != o.ersp, ErrorKind::kConfig, "choose exactly one of --psd or --ersp");
  auto man = manifest_for("analyze");
  man.add_input(o.input);
  const Dataset ds = load_dataset_any(o.input);
  const auto out = prepare_out(o.out);
  const double rate = ds.rate_hz();
  for (auto c : kAllClasses) {
    std::vector<Trial> trials;
    for (const auto& t : ds.trials) {
      if (t.label == c) trials.push_back(t);
    }
    if (trials.empty()) continue;
    const std::string tag(to_string(c));
    if (o.psd) {
      const auto chans = channel_indices(ds.montage, o.channels);
      const auto seg = static_cast<std::size_t>(std::lround(o.seg_s * rate));
      std::vector<std::string> names;
      std::vector<Spectrum> spectra;
      for (auto k : chans) {
        Spectrum mean;
        for (const auto& t : trials) {
          const auto s = psd_welch(t.data.row_as_double(k), rate, seg);
          if (mean.power.empty()) mean = s;
          else for (std::size_t i = 0; i < s.power.size(); ++i) mean.power[i] += s.power[i];
        }
        for (auto& p : mean.power) p /= static_cast<double>(trials.size());
        names.push_back(ds.montage.labels[k]);
        spectra.push_back(std::move(mean));
      }
      write_spectrum_csv(out / ("psd_" + tag + ".csv"), names, spectra);
    } else {
      const auto chans = channel_indices(ds.montage, o.channels.empty() ? "Fz,Oz" : o.channels);
      ErspOptions opt;
      opt.baseline_begin_s = -o.baseline_s;
      opt.baseline_end_s = 0.0;
      opt.stft_window_s = o.seg_s;
      opt.freq_high_hz = std::min(opt.freq_high_hz, rate / 2.0);
      for (auto k : chans) {
        write_ersp_csv(out / ("ersp_" + tag + "_" + ds.montage.labels[k] + ".csv"), ersp(trials, k, opt));
      }
    }
  }
  man.set_config({{"mode", o.psd ? "psd" : "ersp"}, {"segment_s", o.seg_s}, {"channels", o.channels}});
  man.write(out);
}

// ---- gradcheck ----

struct GradOpts {
  std::string config;
  double tol = 1e-4;
  std::uint64_t seed = 7;
};

void cmd_gradcheck(const GradOpts& o) {
  nn::NetworkSpec spec = nn::NetworkSpec::gradcheck_scaled();
  if (!o.config.empty()) {
    nlohmann::json merged = spec.to_json();
    merged.merge_patch(read_json(o.config));
    spec = nn::NetworkSpec::from_json(merged);
  }
  double worst = 0.0;
  for (auto v : nn::kAllVariants) {
    const auto s = spec.with_variant(v);
    nn::Network<double> net(s, o.seed);
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> nd;
    const std::size_t batch = 3;
    nn::Shape shape{batch};
    for (auto d : s.input_shape()) shape.push_back(d);
    nn::Tensor<double> x(shape);
    for (auto& v2 : x.data) v2 = nd(rng);
    std::vector<int> labels;
    for (std::size_t b = 0; b < batch; ++b) labels.push_back(static_cast<int>(b % s.n_classes));
    nn::GradCheckOptions opt;
    opt.seed = o.seed;
    const auto r = nn::grad_check(net, x, labels, opt);
    std::printf("%-8s checked %6zu  max relative error %.3e  (%s)\n", std::string(nn::to_string(v)).c_str(),
                r.checked, r.max_rel_error, r.worst.c_str());
    worst = std::max(worst, r.max_rel_error);
  }
  std::printf("max relative error %.3e (tolerance %.1e)\n", worst, o.tol);
  require(worst < o.tol, ErrorKind::kNumeric, "gradient check failed");
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::kNumeric: return 3;
    case ErrorKind::kConfig:
    case ErrorKind::kDesign:
    case ErrorKind::kContract: return 4;
    default: return 2;
  }
}

} // namespace

int main(int argc, char** argv) {
  g_argv.assign(argv, argv + argc);
  CLI::App app{"FuDNN EEG decoding toolkit"};
  app.set_version_flag("--version", FUDNN_VERSION);
  app.require_subcommand(1);
  app.add_option("--threads", g_threads, "worker cap (default: FUDNN_THREADS or 1)");
  std::function<void()> run;

  SynthOpts so;
  auto* synth = app.add_subcommand("synth", "generate synthetic subjects as EEGC datasets");
  synth->add_option("--spec", so.spec_file, "SynthSpec JSON")->check(CLI::ExistingFile);
  synth->add_option("--out", so.out)->required();
  synth->add_option("--subjects", so.subjects);
  synth->add_option("--trials-per-class", so.trials_per_class);
  synth->add_option("--seed", so.seed);
  synth->add_option("--rate", so.rate);
  synth->add_option("--noise", so.noise, "noise sd (uV)");
  synth->add_option("--amplitude", so.amplitude, "source amplitude (uV)");
  synth->add_option("--pre", so.pre, "noise-only lead-in (s)");
  synth->add_option("--jitter", so.jitter);
  synth->add_flag("--pink", so.pink);
  synth->callback([&] { run = [&] { cmd_synth(so); }; });

  PreprocessOpts po;
  auto* pre = app.add_subcommand("preprocess", "downsample, band-pass and window");
  pre->add_option("inputs", po.inputs, "EEGC dataset/recording or CSV")->required();
  pre->add_option("--out", po.out)->required();
  pre->add_option("--band", po.band, "LOW:HIGH Hz")->capture_default_str();
  pre->add_option("--rate", po.rate)->capture_default_str();
  pre->add_option("--window", po.window)->capture_default_str();
  pre->add_option("--overlap", po.overlap)->capture_default_str();
  pre->add_option("--order", po.order, "FIR order")->capture_default_str();
  pre->add_flag("--no-bandpass", po.no_bandpass);
  pre->add_option("--epoch", po.epoch, "OFFSET:LENGTH s for continuous input")->capture_default_str();
  pre->add_option("--labels", po.labels, "CODE:LABEL,... for continuous input")->capture_default_str();
  pre->add_option("--sidecar", po.sidecar, "JSON sidecar for CSV input");
  pre->callback([&] { run = [&] { cmd_preprocess(po); }; });

  PlvOpts plo;
  auto* plv = app.add_subcommand("plv", "functional connectivity, edges and channel weights");
  plv->add_option("input", plo.input)->required()->check(CLI::ExistingFile);
  plv->add_option("--out", plo.out)->required();
  plv->add_option("--band", plo.band, "optional LOW:HIGH sub-band");
  plv->add_option("--threshold", plo.threshold)->capture_default_str();
  plv->callback([&] { run = [&] { cmd_plv(plo); }; });

  ExpOpts to;
  bool no_cv = false;
  auto* train = app.add_subcommand("train", "k-fold evaluation and a final checkpoint");
  train->add_option("input", to.input)->required()->check(CLI::ExistingFile);
  add_exp_options(train, to);
  train->add_flag("--no-cv", no_cv, "skip cross-validation");
  train->callback([&] { run = [&] { cmd_train(to, no_cv); }; });

  EvalOpts eo;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--model", eo.model)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--data", eo.data)->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eo.out)->required();
  eval->add_option("--overlap", eo.overlap)->capture_default_str();
  eval->callback([&] { run = [&] { cmd_eval(eo); }; });

  ExpOpts ao;
  int n_perm = 10000;
  auto* abl = app.add_subcommand("ablation", "CNN-I/II/III vs FuDNN on identical folds");
  abl->add_option("input", ao.input)->required()->check(CLI::ExistingFile);
  add_exp_options(abl, ao);
  abl->add_option("--perm", n_perm, "permutations")->capture_default_str();
  abl->callback([&] { run = [&] { cmd_ablation(ao, n_perm); }; });

  ExpOpts lo;
  std::string target;
  auto* loso = app.add_subcommand("loso", "leave-one-subject-out");
  loso->add_option("input", lo.input, "directory of subject datasets")->required()->check(CLI::ExistingDirectory);
  add_exp_options(loso, lo);
  loso->add_option("--target", target, "subject id or 'all'")->required();
  loso->callback([&] { run = [&] { cmd_loso(lo, target); }; });

  AnalyzeOpts an;
  auto* ana = app.add_subcommand("analyze", "per-class PSD or ERSP as CSV");
  ana->add_option("input", an.input)->required()->check(CLI::ExistingFile);
  ana->add_option("--out", an.out)->required();
  ana->add_flag("--psd", an.psd);
  ana->add_flag("--ersp", an.ersp);
  ana->add_option("--channels", an.channels, "comma-separated labels");
  ana->add_option("--segment", an.seg_s, "Welch / STFT segment (s)")->capture_default_str();
  ana->add_option("--baseline", an.baseline_s, "ERSP baseline before onset (s)")->capture_default_str();
  ana->callback([&] { run = [&] { cmd_analyze(an); }; });

  GradOpts go;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of the scaled network");
  grad->add_option("--config", go.config, "NetworkSpec JSON overrides")->check(CLI::ExistingFile);
  grad->add_option("--tol", go.tol)->capture_default_str();
  grad->add_option("--seed", go.seed)->capture_default_str();
  grad->callback([&] { run = [&] { cmd_gradcheck(go); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    run();
    return 0;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error (format): " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error (io): " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
