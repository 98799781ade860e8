#include "fudnn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <type_traits>

#include "fudnn/error.hpp"
#include "fudnn/parallel.hpp"
#include "fudnn/random.hpp"

namespace fudnn {

nn::NetworkSpec ExperimentConfig::network_for(nn::Variant v) const {
  nn::NetworkSpec s = network.with_variant(v);
  s.n_classes = static_cast<std::size_t>(class_set);
  if (!s.expected_trace.empty()) s.expected_trace.back() = {s.n_classes};
  return s;
}

void ExperimentConfig::validate() const {
  class_subset(class_set);
  require(folds >= 2, ErrorKind::kConfig, "folds must be >= 2");
  require(window_s > 0.0 && overlap >= 0.0 && overlap < 1.0, ErrorKind::kConfig, "invalid window settings");
  require(threads >= 1, ErrorKind::kConfig, "threads must be >= 1");
  network.validate();
  train.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["class_set"] = class_set;
  j["folds"] = folds;
  j["seed"] = seed;
  j["variant"] = std::string(nn::to_string(variant));
  j["window_s"] = window_s;
  j["overlap"] = overlap;
  j["shuffle_labels"] = shuffle_labels;
  j["network"] = network.to_json();
  j["train"] = train.to_json();
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, ExperimentConfig c) {
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("class_set", c.class_set);
    get("folds", c.folds);
    get("seed", c.seed);
    get("window_s", c.window_s);
    get("overlap", c.overlap);
    get("shuffle_labels", c.shuffle_labels);
    if (j.contains("variant")) c.variant = nn::parse_variant(j.at("variant").get<std::string>());
    if (j.contains("network")) {
      const auto& n = j.at("network");
      if (n.is_string()) {
        const auto name = n.get<std::string>();
        if (name == "table_one") c.network = nn::NetworkSpec::table_one();
        else if (name == "desk") c.network = nn::NetworkSpec::desk();
        else fail(ErrorKind::kConfig, "unknown network preset '" + name + "' (table_one or desk)");
      } else {
        nlohmann::json merged = c.network.to_json();
        merged.merge_patch(n);
        c.network = nn::NetworkSpec::from_json(merged);
      }
    }
    if (j.contains("train")) {
      nlohmann::json merged = c.train.to_json();
      merged.merge_patch(j.at("train"));
      c.train = nn::TrainConfig::from_json(merged);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) { return from_json(j, ExperimentConfig{}); }

std::vector<FoldSplit> make_folds(const Dataset& dataset, int k, std::uint64_t seed) {
  require(k >= 2, ErrorKind::kConfig, "k must be >= 2");
  std::mt19937_64 rng(seed);
  std::vector<int> fold_of(dataset.trials.size(), -1);
  for (ClassLabel c : kAllClasses) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < dataset.trials.size(); ++i) {
      if (dataset.trials[i].label == c) idx.push_back(i);
    }
    if (idx.empty()) continue;
    require(idx.size() >= static_cast<std::size_t>(k), ErrorKind::kConfig,
            "k = " + std::to_string(k) + " exceeds the " + std::to_string(idx.size()) + " trials of class " +
                std::string(to_string(c)));
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i) fold_of[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    for (int f = 0; f < k; ++f) {
      (fold_of[i] == f ? folds[static_cast<std::size_t>(f)].test : folds[static_cast<std::size_t>(f)].train).push_back(i);
    }
  }
  return folds;
}

std::vector<double> Metrics::accuracies() const {
  std::vector<double> a;
  for (const auto& f : folds) a.push_back(f.accuracy);
  return a;
}

void summarize(Metrics& m) {
  const auto acc = m.accuracies();
  const double n = static_cast<double>(acc.size());
  m.mean = acc.empty() ? 0.0 : std::accumulate(acc.begin(), acc.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : acc) ss += (a - m.mean) * (a - m.mean);
  m.sd = acc.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  m.confusion.clear();
  for (const auto& f : m.folds) {
    if (m.confusion.empty()) m.confusion.assign(f.confusion.size(), std::vector<int>(f.confusion.size(), 0));
    for (std::size_t i = 0; i < f.confusion.size(); ++i) {
      for (std::size_t j = 0; j < f.confusion[i].size(); ++j) m.confusion[i][j] += f.confusion[i][j];
    }
  }
}

Dataset shuffle_labels(const Dataset& dataset, std::uint64_t seed) {
  std::vector<ClassLabel> labels;
  for (const auto& t : dataset.trials) labels.push_back(t.label);
  std::mt19937_64 rng(seed);
  std::shuffle(labels.begin(), labels.end(), rng);
  Dataset out = dataset;
  for (std::size_t i = 0; i < out.trials.size(); ++i) out.trials[i].label = labels[i];
  return out;
}

std::vector<Window> windows_for(const Dataset& dataset, std::span<const std::size_t> trial_indices,
                                double window_s, double overlap) {
  std::vector<Window> out;
  for (auto i : trial_indices) {
    auto w = sliding_windows(dataset.trials.at(i), window_s, overlap);
    for (auto& x : w) out.push_back(std::move(x));
  }
  return out;
}

void audit_disjoint(std::span<const Window> train, std::span<const Window> test) {
  std::set<std::pair<std::string, int>> test_ids;
  for (const auto& w : test) test_ids.emplace(w.subject_id, w.trial_id);
  for (const auto& w : train) {
    require(!test_ids.count({w.subject_id, w.trial_id}), ErrorKind::kContract,
            "leakage: trial " + w.subject_id + "/" + std::to_string(w.trial_id) + " is in both train and test");
  }
}

namespace {

std::uint64_t variant_code(nn::Variant v) { return static_cast<std::uint64_t>(v) + 1; }

FoldResult train_and_test(const nn::NetworkSpec& spec, const std::vector<ClassLabel>& classes,
                          std::vector<Window> train_w, const std::vector<Window>& test_w, const Montage& montage,
                          double rate_hz, const nn::TrainConfig& base_train, std::uint64_t stream_seed) {
  audit_disjoint(train_w, test_w);
  FoldResult r;
  r.train_windows = train_w.size();
  r.test_windows = test_w.size();
  std::optional<ChannelWeights> weights;
  if (spec.uses_channel_weights()) {
    weights = fit_weights(train_w, montage, rate_hz);
    r.channel_weights = weights->w;
  }
  nn::Classifier clf(spec, classes, weights, derive_seed(stream_seed, {0x1417}));
  nn::TrainConfig tc = base_train;
  tc.seed = derive_seed(stream_seed, {0x7a1});
  {
    const auto samples = clf.prepare(train_w);
    std::vector<Window>().swap(train_w);
    clf.fit(samples, tc);
  }
  const auto ev = clf.evaluate(test_w);
  r.accuracy = ev.accuracy;
  r.confusion = ev.confusion;
  std::set<int> ids;
  for (const auto& w : test_w) ids.insert(w.trial_id);
  r.test_trials.assign(ids.begin(), ids.end());
  return r;
}

Dataset prepared(const Dataset& dataset, const ExperimentConfig& config) {
  const auto classes = config.classes();
  Dataset ds = filter_classes(dataset, classes);
  require(!ds.trials.empty(), ErrorKind::kConfig, "no trials of the configured classes");
  ds.validate();
  if (config.shuffle_labels) ds = shuffle_labels(ds, derive_seed(config.seed, {0x5u}));
  return ds;
}

Metrics run_variant(const Dataset& ds, const std::vector<FoldSplit>& folds, const ExperimentConfig& config,
                    nn::Variant variant, const Progress& progress) {
  const auto classes = config.classes();
  const auto spec = config.network_for(variant);
  Metrics m;
  m.subject = ds.subject_id;
  m.variant = variant;
  m.class_set = config.class_set;
  m.folds.resize(folds.size());
  parallel_for(folds.size(), config.threads, [&](std::size_t f) {
    auto train_w = windows_for(ds, folds[f].train, config.window_s, config.overlap);
    const auto test_w = windows_for(ds, folds[f].test, config.window_s, config.overlap);
    const std::uint64_t stream = derive_seed(config.seed, {f, variant_code(variant)});
    m.folds[f] = train_and_test(spec, classes, std::move(train_w), test_w, ds.montage, ds.rate_hz(), config.train,
                                stream);
    m.folds[f].fold = static_cast<int>(f);
    if (progress) {
      progress(ds.subject_id + " " + std::string(nn::to_string(variant)) + " fold " + std::to_string(f + 1) + "/" +
               std::to_string(folds.size()) + " accuracy " + std::to_string(m.folds[f].accuracy));
    }
  });
  summarize(m);
  return m;
}

} // namespace

Metrics run_subject_dependent(const Dataset& dataset, const ExperimentConfig& config, const Progress& progress) {
  config.validate();
  const Dataset ds = prepared(dataset, config);
  const auto folds = make_folds(ds, config.folds, config.seed);
  return run_variant(ds, folds, config, config.variant, progress);
}

std::vector<Metrics> run_ablation(const Dataset& dataset, const ExperimentConfig& config, const Progress& progress,
                                  int n_perm) {
  config.validate();
  const Dataset ds = prepared(dataset, config);
  const auto folds = make_folds(ds, config.folds, config.seed);
  std::vector<Metrics> out;
  for (auto v : nn::kAllVariants) out.push_back(run_variant(ds, folds, config, v, progress));
  auto& full = out.back();
  for (std::size_t i = 0; i + 1 < out.size(); ++i) {
    full.p_values[std::string(nn::to_string(out[i].variant))] =
        permutation_test(full.accuracies(), out[i].accuracies(), n_perm, derive_seed(config.seed, {0x9e, i}));
  }
  return out;
}

LosoResult run_loso(std::span<const Dataset> subjects, const std::string& target, const ExperimentConfig& config,
                    const Progress& progress) {
  config.validate();
  const auto classes = config.classes();
  std::vector<Window> train_w, test_w;
  LosoResult res;
  const Dataset* target_ds = nullptr;
  for (const auto& subj : subjects) {
    const Dataset ds = prepared(subj, config);
    std::vector<std::size_t> all(ds.trials.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    auto w = windows_for(ds, all, config.window_s, config.overlap);
    if (subj.subject_id == target) {
      require(target_ds == nullptr, ErrorKind::kConfig, "duplicate subject id " + target);
      target_ds = &subj;
      test_w = std::move(w);
    } else {
      res.train_subjects.push_back(subj.subject_id);
      for (auto& x : w) train_w.push_back(std::move(x));
    }
  }
  require(target_ds != nullptr, ErrorKind::kConfig, "target subject '" + target + "' not found");
  require(!train_w.empty(), ErrorKind::kConfig, "LOSO needs at least one training subject");
  res.train_windows = train_w.size();
  res.test_windows = test_w.size();
  const auto spec = config.network_for(config.variant);
  std::uint64_t target_index = 0;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (subjects[i].subject_id == target) target_index = i;
  }
  const std::uint64_t stream = derive_seed(config.seed, {0x1050, target_index, variant_code(config.variant)});
  Metrics m;
  m.subject = target;
  m.variant = config.variant;
  m.class_set = config.class_set;
  m.folds.push_back(train_and_test(spec, classes, std::move(train_w), test_w, target_ds->montage,
                                   target_ds->rate_hz(), config.train, stream));
  if (progress) progress("LOSO target " + target + " accuracy " + std::to_string(m.folds[0].accuracy));
  summarize(m);
  res.metrics = std::move(m);
  return res;
}

double permutation_test(std::span<const double> a, std::span<const double> b, int n_perm, std::uint64_t seed) {
  require(a.size() == b.size(), ErrorKind::kContract, "permutation test needs paired samples of equal length");
  require(!a.empty(), ErrorKind::kContract, "permutation test needs at least one pair");
  require(n_perm >= 1, ErrorKind::kConfig, "n_perm must be >= 1");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double n = static_cast<double>(d.size());
  const double observed = std::abs(std::accumulate(d.begin(), d.end(), 0.0) / n);
  // Guard against flips that reproduce the observed statistic up to rounding.
  const double tol = 1e-12 * std::max(1.0, observed);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution flip(0.5);
  long count = 0;
  for (int p = 0; p < n_perm; ++p) {
    double s = 0.0;
    for (double v : d) s += flip(rng) ? -v : v;
    if (std::abs(s / n) >= observed - tol) ++count;
  }
  return static_cast<double>(1 + count) / static_cast<double>(n_perm + 1);
}

} // namespace fudnn
