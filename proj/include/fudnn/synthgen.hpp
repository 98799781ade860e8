#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fudnn/eeg.hpp"

namespace fudnn {

enum class CarrierBand { kDelta, kAlpha };

std::string_view to_string(CarrierBand band);
CarrierBand parse_carrier_band(std::string_view text);

// Analysis band (delta 0.5-4 Hz, alpha 8-13 Hz) and the narrower range the
// per-trial carrier frequency is drawn from.
struct BandRange {
  double low_hz;
  double high_hz;
};
BandRange analysis_band(CarrierBand band);
BandRange carrier_range(CarrierBand band);

// One class-specific coherent oscillator shared (same phase) by a channel group.
struct SourceDef {
  ClassLabel label = ClassLabel::PP;
  std::vector<std::string> channels;
  CarrierBand band = CarrierBand::kAlpha;
  double coupling = 1.0;  // amplitude of the shared oscillator relative to source_amplitude_uv
};

struct SynthSpec {
  int n_subjects = 1;
  int trials_per_class = 50;
  double rate_hz = 250.0;
  double duration_s = 5.0;
  double pre_s = 0.0;  // noise-only lead-in before imagery onset
  double source_amplitude_uv = 10.0;
  double noise_sd_uv = 10.0;
  double jitter_sd = 0.1;  // per-subject, per-channel gain jitter
  bool pink_noise = false;
  std::uint64_t seed = 1;
  std::vector<ClassLabel> classes{kAllClasses.begin(), kAllClasses.end()};
  std::vector<SourceDef> sources;

  // Four classes on four disjoint 8-channel groups: PP frontal delta, PW
  // occipital alpha, OD left-central alpha, EF right-central alpha.
  static SynthSpec defaults();

  void validate(const Montage& montage) const;
  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

// Channel groups used by the default spec.
std::vector<std::string> frontal_group();
std::vector<std::string> occipital_group();
std::vector<std::string> left_central_group();
std::vector<std::string> right_central_group();

// One dataset per subject ("S1", "S2", ...), trials in a seeded shuffled
// class order with ids 0..n-1. Deterministic per spec.
std::vector<Dataset> generate(const SynthSpec& spec);

// Monte-Carlo accuracy of a band-power template classifier that knows the
// generative model: features are log band powers of every source group's
// mean signal; templates are class means; prediction is the nearest
// template (ties to the lowest class index).
double oracle_separability(const SynthSpec& spec, std::size_t draws = 10000, std::uint64_t seed = 99);

} // namespace fudnn
