#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fudnn/connectivity.hpp"
#include "fudnn/eeg.hpp"
#include "fudnn/nn/network.hpp"
#include "fudnn/nn/optim.hpp"

namespace fudnn::nn {

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 0;

  // Schedule paired with NetworkSpec::desk(): the narrow network converges in
  // a few epochs at a larger step.
  static TrainConfig desk();

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Network-ready copy of a window list: x is [N, 1, K, T] with connectivity
// weights already multiplied in; y holds class indices into `classes`.
struct SampleSet {
  std::size_t channels = 0;
  std::size_t samples = 0;
  std::vector<float> x;
  std::vector<int> y;
  std::vector<int> trial_ids;
  std::vector<std::string> subject_ids;

  std::size_t size() const { return y.size(); }
  Tensor<float> batch(std::span<const std::size_t> indices) const;
};

SampleSet make_samples(std::span<const Window> windows, std::span<const ClassLabel> classes,
                       const ChannelWeights* weights);

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct Evaluation {
  std::vector<int> truth;
  std::vector<int> predicted;
  double accuracy = 0.0;
  std::vector<std::vector<int>> confusion;  // [truth][predicted]
};

// Batches of `batch_size` in a seeded shuffled order; a trailing batch of one
// sample is merged into the previous batch (batch norm needs two).
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::mt19937_64& rng);

EpochStats train_epoch(Network<float>& net, Adam<float>& optimizer, const SampleSet& data,
                       std::size_t batch_size, std::mt19937_64& rng);

Evaluation evaluate(const Network<float>& net, const SampleSet& data, std::size_t n_classes);

// A network together with its class list and (for FuDNN) frozen channel weights.
class Classifier {
 public:
  Classifier(NetworkSpec spec, std::vector<ClassLabel> classes, std::optional<ChannelWeights> weights,
             std::uint64_t seed);

  std::vector<EpochStats> fit(std::span<const Window> train, const TrainConfig& config,
                              const std::function<void(const EpochStats&)>& on_epoch = {});
  std::vector<EpochStats> fit(const SampleSet& train, const TrainConfig& config,
                              const std::function<void(const EpochStats&)>& on_epoch = {});
  Evaluation evaluate(std::span<const Window> windows) const;
  SampleSet prepare(std::span<const Window> windows) const;

  const NetworkSpec& spec() const { return net_.spec(); }
  const std::vector<ClassLabel>& classes() const { return classes_; }
  const std::optional<ChannelWeights>& weights() const { return weights_; }
  Network<float>& network() { return net_; }
  const Network<float>& network() const { return net_; }
  std::uint64_t seed() const { return seed_; }
  int epochs_trained() const { return epochs_trained_; }
  void set_epochs_trained(int e) { epochs_trained_ = e; }

 private:
  std::vector<ClassLabel> classes_;
  std::optional<ChannelWeights> weights_;
  Network<float> net_;
  std::uint64_t seed_;
  int epochs_trained_ = 0;
};

} // namespace fudnn::nn
