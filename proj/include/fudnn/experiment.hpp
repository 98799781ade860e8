#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fudnn/connectivity.hpp"
#include "fudnn/dsp.hpp"
#include "fudnn/eeg.hpp"
#include "fudnn/nn/classifier.hpp"
#include "fudnn/nn/network.hpp"

namespace fudnn {

struct ExperimentConfig {
  int class_set = 4;
  int folds = 5;
  std::uint64_t seed = 1;
  // Layer widths; n_classes and variant are overridden from class_set/variant.
  nn::NetworkSpec network = nn::NetworkSpec::desk();
  nn::TrainConfig train = nn::TrainConfig::desk();
  nn::Variant variant = nn::Variant::kFuDNN;
  double window_s = 2.0;
  double overlap = 0.5;
  // Null control: permute trial labels (seeded) before splitting.
  bool shuffle_labels = false;
  std::size_t threads = 1;

  std::vector<ClassLabel> classes() const { return class_subset(class_set); }
  nn::NetworkSpec network_for(nn::Variant v) const;
  void validate() const;
  nlohmann::json to_json() const;
  // Keys absent from `j` keep the values already in `base`.
  static ExperimentConfig from_json(const nlohmann::json& j, ExperimentConfig base);
  static ExperimentConfig from_json(const nlohmann::json& j);
};

// Trial indices (into Dataset::trials) of one fold; both lists ascending.
struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Stratified trial-level k-fold: within each class the trials are shuffled
// (seeded) and dealt round-robin to folds.
std::vector<FoldSplit> make_folds(const Dataset& dataset, int k, std::uint64_t seed);

struct FoldResult {
  int fold = 0;
  double accuracy = 0.0;
  std::vector<std::vector<int>> confusion;
  std::size_t train_windows = 0;
  std::size_t test_windows = 0;
  std::vector<int> test_trials;
  std::vector<double> channel_weights;  // empty unless the variant uses them
};

struct Metrics {
  std::string subject;
  nn::Variant variant = nn::Variant::kFuDNN;
  int class_set = 4;
  std::vector<FoldResult> folds;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation over folds
  std::vector<std::vector<int>> confusion;  // summed over folds
  std::map<std::string, double> p_values;   // comparator variant -> p

  std::vector<double> accuracies() const;
};

// Fills mean, sd and the summed confusion from `folds`.
void summarize(Metrics& m);

// Labels permuted across trials with a seeded shuffle (class counts kept).
Dataset shuffle_labels(const Dataset& dataset, std::uint64_t seed);

// Windows of the given trials; throws a contract error if any window's
// trial id is in `forbidden`.
std::vector<Window> windows_for(const Dataset& dataset, std::span<const std::size_t> trial_indices,
                                double window_s, double overlap);
void audit_disjoint(std::span<const Window> train, std::span<const Window> test);

using Progress = std::function<void(const std::string&)>;

// Per fold: windows after splitting, connectivity weights from the training
// windows (FuDNN only), train, test.
Metrics run_subject_dependent(const Dataset& dataset, const ExperimentConfig& config, const Progress& progress = {});

// All four variants on identical folds and seeds; FuDNN's p-values against
// each other variant are attached to the FuDNN entry.
std::vector<Metrics> run_ablation(const Dataset& dataset, const ExperimentConfig& config,
                                  const Progress& progress = {}, int n_perm = 10000);

struct LosoResult {
  Metrics metrics;
  std::size_t train_windows = 0;
  std::size_t test_windows = 0;
  std::vector<std::string> train_subjects;
};

// Train on every subject but `target` (weights fit on the pooled training
// windows), test on all of the target's windows.
LosoResult run_loso(std::span<const Dataset> subjects, const std::string& target, const ExperimentConfig& config,
                    const Progress& progress = {});

// Two-sided sign-flip test on the mean paired difference;
// p = (1 + #{|mean_flipped| >= |mean_observed|}) / (n_perm + 1).
double permutation_test(std::span<const double> a, std::span<const double> b, int n_perm = 10000,
                        std::uint64_t seed = 0);

} // namespace fudnn
