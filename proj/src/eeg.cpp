#include "fudnn/eeg.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "fudnn/error.hpp"

namespace fudnn {

std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::PP: return "PP";
    case ClassLabel::PW: return "PW";
    case ClassLabel::OD: return "OD";
    case ClassLabel::EF: return "EF";
  }
  return "??";
}

ClassLabel parse_class_label(std::string_view text) {
  for (ClassLabel c : kAllClasses) {
    if (to_string(c) == text) return c;
  }
  fail(ErrorKind::kMapping, "unknown class label '" + std::string(text) + "'");
}

std::vector<ClassLabel> class_subset(int n_classes) {
  switch (n_classes) {
    case 2: return {ClassLabel::PW, ClassLabel::EF};
    case 3: return {ClassLabel::PW, ClassLabel::OD, ClassLabel::EF};
    case 4: return {ClassLabel::PP, ClassLabel::PW, ClassLabel::OD, ClassLabel::EF};
    default: break;
  }
  fail(ErrorKind::kConfig, "class set must be 2, 3 or 4 (got " + std::to_string(n_classes) + ")");
}

Montage Montage::default_64() {
  Montage m;
  m.labels = {"Fp1", "Fp2", "AF7", "AF5", "AF3", "AFz", "AF4", "AF6", "AF8",  "F7",   "F5",
              "F3",  "F1",  "Fz",  "F2",  "F4",  "F6",  "F8",  "FT7", "FC5",  "FC3",  "FC1",
              "FC2", "FC4", "FC6", "FT8", "T7",  "C5",  "C3",  "C1",  "Cz",   "C2",   "C4",
              "C6",  "T8",  "TP9", "TP7", "CP5", "CP3", "CP1", "CPz", "CP2",  "CP4",  "CP6",
              "TP8", "TP10", "P7", "P5",  "P3",  "P1",  "Pz",  "P2",  "P4",   "P6",   "P8",
              "PO7", "PO3", "POz", "PO4", "PO8", "O1",  "Oz",  "O2",  "Iz"};
  m.reference_note = "reference FCz, ground Fpz";
  return m;
}

std::optional<std::size_t> Montage::index_of(std::string_view label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels.begin());
}

void Montage::validate() const {
  require(labels.size() >= 2, ErrorKind::kConfig, "montage needs at least 2 channels");
  std::set<std::string> seen(labels.begin(), labels.end());
  require(seen.size() == labels.size(), ErrorKind::kConfig, "montage labels must be unique");
}

std::vector<double> SignalMatrix::row_as_double(std::size_t k) const {
  auto r = row(k);
  return {r.begin(), r.end()};
}

void SignalMatrix::set_row(std::size_t k, std::span<const double> values) {
  require(values.size() == samples, ErrorKind::kContract, "row length mismatch");
  auto r = row(k);
  for (std::size_t t = 0; t < samples; ++t) r[t] = static_cast<float>(values[t]);
}

SignalMatrix SignalMatrix::slice(std::size_t start, std::size_t length) const {
  require(start + length <= samples, ErrorKind::kRange, "slice exceeds signal length");
  SignalMatrix out(channels, length);
  for (std::size_t k = 0; k < channels; ++k) {
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(k * samples + start), length,
                out.data.begin() + static_cast<std::ptrdiff_t>(k * length));
  }
  return out;
}

bool SignalMatrix::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v); });
}

void Recording::validate() const {
  montage.validate();
  require(rate_hz > 0.0, ErrorKind::kConfig, "sampling rate must be positive");
  require(samples.channels == montage.size(), ErrorKind::kContract,
          "sample rows (" + std::to_string(samples.channels) + ") != montage size (" +
              std::to_string(montage.size()) + ")");
  require(samples.all_finite(), ErrorKind::kNumeric, "recording contains non-finite samples");
  for (std::size_t i = 0; i < markers.size(); ++i) {
    require(markers[i].sample < samples.samples, ErrorKind::kRange, "marker beyond recording end");
    if (i > 0) {
      require(markers[i - 1].sample <= markers[i].sample, ErrorKind::kFormat,
              "markers must be sorted by sample index");
    }
  }
}

std::size_t Dataset::count(ClassLabel label) const {
  return static_cast<std::size_t>(
      std::count_if(trials.begin(), trials.end(), [&](const Trial& t) { return t.label == label; }));
}

void Dataset::validate() const {
  montage.validate();
  std::set<int> ids;
  for (const auto& t : trials) {
    require(t.data.channels == montage.size(), ErrorKind::kContract, "trial channel count != montage");
    require(t.rate_hz == trials.front().rate_hz, ErrorKind::kContract, "trials differ in rate");
    require(ids.insert(t.trial_id).second, ErrorKind::kContract,
            "duplicate trial id " + std::to_string(t.trial_id));
    require(t.data.all_finite(), ErrorKind::kNumeric, "trial contains non-finite samples");
  }
}

namespace {

Trial cut_trial(const Recording& rec, const Marker& marker, double offset_s, double length_s,
                ClassLabel label, const std::string& subject_id, int trial_id) {
  const auto offset = static_cast<long long>(std::llround(offset_s * rec.rate_hz));
  const auto length = static_cast<long long>(std::llround(length_s * rec.rate_hz));
  const long long start = static_cast<long long>(marker.sample) + offset;
  if (start < 0 || start + length > static_cast<long long>(rec.samples.samples)) {
    fail(ErrorKind::kRange, "epoch window [" + std::to_string(start) + ", " +
                                std::to_string(start + length) + ") outside recording of " +
                                std::to_string(rec.samples.samples) + " samples");
  }
  Trial t;
  t.label = label;
  t.data = rec.samples.slice(static_cast<std::size_t>(start), static_cast<std::size_t>(length));
  t.rate_hz = rec.rate_hz;
  t.subject_id = subject_id;
  t.trial_id = trial_id;
  t.onset_s = offset_s < 0.0 ? -offset_s : 0.0;
  return t;
}

} // namespace

std::vector<Trial> epoch(const Recording& recording, int event_code, double offset_s,
                         double length_s, const std::map<int, ClassLabel>& label_map,
                         const std::string& subject_id) {
  auto it = label_map.find(event_code);
  if (it == label_map.end()) {
    fail(ErrorKind::kMapping, "event code " + std::to_string(event_code) + " has no class label");
  }
  require(length_s > 0.0, ErrorKind::kConfig, "epoch length must be positive");
  std::vector<Trial> out;
  int next_id = 0;
  for (const auto& m : recording.markers) {
    if (m.code != event_code) continue;
    out.push_back(cut_trial(recording, m, offset_s, length_s, it->second, subject_id, next_id++));
  }
  return out;
}

std::vector<Trial> epoch(const Recording& recording, double offset_s, double length_s,
                         const std::map<int, ClassLabel>& label_map,
                         const std::string& subject_id) {
  require(length_s > 0.0, ErrorKind::kConfig, "epoch length must be positive");
  std::vector<Trial> out;
  int next_id = 0;
  for (const auto& m : recording.markers) {
    auto it = label_map.find(m.code);
    if (it == label_map.end()) continue;
    out.push_back(cut_trial(recording, m, offset_s, length_s, it->second, subject_id, next_id++));
  }
  return out;
}

std::pair<Dataset, Dataset> split_trials(const Dataset& dataset, double fraction,
                                         std::uint64_t seed) {
  require(fraction > 0.0 && fraction < 1.0, ErrorKind::kConfig, "split fraction must be in (0, 1)");
  std::mt19937_64 rng(seed);
  std::vector<char> is_train(dataset.trials.size(), 0);
  for (ClassLabel c : kAllClasses) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < dataset.trials.size(); ++i) {
      if (dataset.trials[i].label == c) idx.push_back(i);
    }
    if (idx.empty()) continue;
    const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    if (n_train == 0 || n_train >= idx.size()) {
      fail(ErrorKind::kConfig, "class " + std::string(to_string(c)) + " has " +
                                   std::to_string(idx.size()) +
                                   " trials; too few for a non-empty train/test split");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < n_train; ++i) is_train[idx[i]] = 1;
  }
  Dataset train{dataset.subject_id, dataset.montage, {}};
  Dataset test{dataset.subject_id, dataset.montage, {}};
  for (std::size_t i = 0; i < dataset.trials.size(); ++i) {
    (is_train[i] ? train : test).trials.push_back(dataset.trials[i]);
  }
  return {std::move(train), std::move(test)};
}

Dataset filter_classes(const Dataset& dataset, std::span<const ClassLabel> labels) {
  Dataset out{dataset.subject_id, dataset.montage, {}};
  for (const auto& t : dataset.trials) {
    if (std::find(labels.begin(), labels.end(), t.label) != labels.end()) out.trials.push_back(t);
  }
  return out;
}

} // namespace fudnn
