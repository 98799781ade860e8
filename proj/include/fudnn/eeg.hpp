#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fudnn {

// Visual motion imagery classes: picking up a phone, pouring water, opening a
// door, eating food.
enum class ClassLabel : std::uint8_t { PP = 0, PW = 1, OD = 2, EF = 3 };

inline constexpr std::array<ClassLabel, 4> kAllClasses{ClassLabel::PP, ClassLabel::PW,
                                                        ClassLabel::OD, ClassLabel::EF};

std::string_view to_string(ClassLabel label);
ClassLabel parse_class_label(std::string_view text);

// Fixed class subsets: 2 -> {PW, EF}, 3 -> {PW, OD, EF}, 4 -> all four.
// The position in the returned list is the network's output index.
std::vector<ClassLabel> class_subset(int n_classes);

struct Montage {
  std::vector<std::string> labels;
  std::string reference_note;

  // 64-channel 10-20 montage used throughout (reference FCz, ground Fpz).
  static Montage default_64();

  std::size_t size() const { return labels.size(); }
  std::optional<std::size_t> index_of(std::string_view label) const;
  void validate() const;

  bool operator==(const Montage&) const = default;
};

// Channel-major [channels x samples] block of microvolt samples.
struct SignalMatrix {
  std::size_t channels = 0;
  std::size_t samples = 0;
  std::vector<float> data;

  SignalMatrix() = default;
  SignalMatrix(std::size_t k, std::size_t t) : channels(k), samples(t), data(k * t, 0.0f) {}

  float& at(std::size_t k, std::size_t t) { return data[k * samples + t]; }
  float at(std::size_t k, std::size_t t) const { return data[k * samples + t]; }
  std::span<float> row(std::size_t k) { return {data.data() + k * samples, samples}; }
  std::span<const float> row(std::size_t k) const { return {data.data() + k * samples, samples}; }

  std::vector<double> row_as_double(std::size_t k) const;
  void set_row(std::size_t k, std::span<const double> values);
  SignalMatrix slice(std::size_t start, std::size_t length) const;
  bool all_finite() const;

  bool operator==(const SignalMatrix&) const = default;
};

struct Marker {
  std::size_t sample = 0;
  int code = 0;
  bool operator==(const Marker&) const = default;
};

struct Recording {
  Montage montage;
  double rate_hz = 0.0;
  SignalMatrix samples;
  std::vector<Marker> markers;

  void validate() const;
};

struct Trial {
  ClassLabel label = ClassLabel::PP;
  SignalMatrix data;
  double rate_hz = 0.0;
  std::string subject_id;
  int trial_id = 0;
  // Seconds of pre-onset data at the start of `data` (the epoch began at -onset_s).
  double onset_s = 0.0;

  double duration_s() const { return static_cast<double>(data.samples) / rate_hz; }
};

struct Dataset {
  std::string subject_id;
  Montage montage;
  std::vector<Trial> trials;

  double rate_hz() const { return trials.empty() ? 0.0 : trials.front().rate_hz; }
  std::size_t count(ClassLabel label) const;
  void validate() const;
};

// Fixed-length segment cut from a trial by sliding-window augmentation.
struct Window {
  int trial_id = 0;
  std::string subject_id;
  ClassLabel label = ClassLabel::PP;
  std::size_t start = 0; // first sample index within the source trial
  SignalMatrix data;
};

struct WindowSet {
  std::string subject_id;
  Montage montage;
  double rate_hz = 0.0;
  std::vector<Window> windows;
};

// Cut one trial per marker with code `event_code`, covering
// [marker + offset_s, marker + offset_s + length_s). A negative offset keeps
// pre-onset data and is recorded as Trial::onset_s.
std::vector<Trial> epoch(const Recording& recording, int event_code, double offset_s,
                         double length_s, const std::map<int, ClassLabel>& label_map,
                         const std::string& subject_id = {});

// Same, for every marker whose code appears in `label_map`.
std::vector<Trial> epoch(const Recording& recording, double offset_s, double length_s,
                         const std::map<int, ClassLabel>& label_map,
                         const std::string& subject_id = {});

// Stratified trial-level split; `fraction` of each class goes to train.
std::pair<Dataset, Dataset> split_trials(const Dataset& dataset, double fraction,
                                         std::uint64_t seed);

// Keep only trials whose label is in `labels` (order of trials preserved).
Dataset filter_classes(const Dataset& dataset, std::span<const ClassLabel> labels);

} // namespace fudnn
