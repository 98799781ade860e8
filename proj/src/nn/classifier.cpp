#include "fudnn/nn/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fudnn/error.hpp"
#include "fudnn/nn/layers.hpp"
#include "fudnn/random.hpp"

namespace fudnn::nn {

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.epochs = 5;
  c.adam.lr = 1e-2;
  return c;
}

void TrainConfig::validate() const {
  require(epochs >= 0, ErrorKind::kConfig, "epochs must be non-negative");
  require(batch_size >= 2, ErrorKind::kConfig, "batch size must be at least 2");
  adam.validate();
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["lr"] = adam.lr;
  j["beta1"] = adam.beta1;
  j["beta2"] = adam.beta2;
  j["adam_eps"] = adam.eps;
  j["seed"] = seed;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("lr", c.adam.lr);
    get("beta1", c.adam.beta1);
    get("beta2", c.adam.beta2);
    get("adam_eps", c.adam.eps);
    get("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

Tensor<float> SampleSet::batch(std::span<const std::size_t> indices) const {
  const std::size_t per = channels * samples;
  Tensor<float> t({indices.size(), 1, channels, samples});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(indices[i] * per), per,
                t.data.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return t;
}

SampleSet make_samples(std::span<const Window> windows, std::span<const ClassLabel> classes,
                       const ChannelWeights* weights) {
  require(!windows.empty(), ErrorKind::kConfig, "no windows");
  SampleSet s;
  s.channels = windows.front().data.channels;
  s.samples = windows.front().data.samples;
  if (weights) {
    require(weights->size() == s.channels, ErrorKind::kContract, "channel weights do not match window channels");
  }
  const std::size_t per = s.channels * s.samples;
  s.x.resize(windows.size() * per);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    require(w.data.channels == s.channels && w.data.samples == s.samples, ErrorKind::kContract,
            "windows must share one shape");
    const auto it = std::find(classes.begin(), classes.end(), w.label);
    require(it != classes.end(), ErrorKind::kConfig,
            "window label " + std::string(to_string(w.label)) + " is not in the configured class set");
    s.y.push_back(static_cast<int>(it - classes.begin()));
    s.trial_ids.push_back(w.trial_id);
    s.subject_ids.push_back(w.subject_id);
    float* dst = s.x.data() + i * per;
    if (weights) {
      const auto weighted = apply_weights(w.data, *weights);
      std::copy(weighted.data.begin(), weighted.data.end(), dst);
    } else {
      std::copy(w.data.data.begin(), w.data.data.end(), dst);
    }
  }
  return s;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::mt19937_64& rng) {
  require(batch_size >= 2, ErrorKind::kConfig, "batch size must be at least 2");
  require(n >= 2, ErrorKind::kConfig, "training needs at least 2 samples");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

EpochStats train_epoch(Network<float>& net, Adam<float>& optimizer, const SampleSet& data,
                       std::size_t batch_size, std::mt19937_64& rng) {
  EpochStats st;
  std::size_t correct = 0;
  double loss_sum = 0.0;
  const std::size_t n_classes = net.spec().n_classes;
  for (const auto& idx : make_batches(data.size(), batch_size, rng)) {
    const auto x = data.batch(idx);
    std::vector<int> labels(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = data.y[idx[i]];
    net.zero_grad();
    const auto logits = net.forward(x, Mode::kTrain);
    const auto lr = softmax_cross_entropy(logits, labels);
    require(std::isfinite(lr.loss), ErrorKind::kNumeric, "non-finite training loss");
    net.backward(lr.grad, false);
    optimizer.step();
    loss_sum += lr.loss * static_cast<double>(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto row = std::span<const float>(logits.data).subspan(i * n_classes, n_classes);
      if (static_cast<int>(argmax(row)) == labels[i]) ++correct;
    }
  }
  st.loss = loss_sum / static_cast<double>(data.size());
  st.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return st;
}

Evaluation evaluate(const Network<float>& net, const SampleSet& data, std::size_t n_classes) {
  Evaluation ev;
  ev.confusion.assign(n_classes, std::vector<int>(n_classes, 0));
  constexpr std::size_t kChunk = 64;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    std::vector<std::size_t> idx(std::min(kChunk, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto logits = net.infer(data.batch(idx));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto row = std::span<const float>(logits.data).subspan(i * n_classes, n_classes);
      for (float v : row) require(std::isfinite(v), ErrorKind::kNumeric, "non-finite network output");
      const int pred = static_cast<int>(argmax(row));
      const int truth = data.y[idx[i]];
      ev.predicted.push_back(pred);
      ev.truth.push_back(truth);
      ++ev.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
      if (pred == truth) ++correct;
    }
  }
  ev.accuracy = data.size() ? static_cast<double>(correct) / static_cast<double>(data.size()) : 0.0;
  return ev;
}

Classifier::Classifier(NetworkSpec spec, std::vector<ClassLabel> classes, std::optional<ChannelWeights> weights,
                       std::uint64_t seed)
    : classes_(std::move(classes)), weights_(std::move(weights)), net_(std::move(spec), seed), seed_(seed) {
  require(classes_.size() == net_.spec().n_classes, ErrorKind::kConfig,
          "class list size does not match the network's output width");
  require(!net_.spec().uses_channel_weights() || weights_.has_value(), ErrorKind::kConfig,
          "FuDNN needs channel weights");
  require(net_.spec().uses_channel_weights() || !weights_.has_value(), ErrorKind::kConfig,
          "channel weights are only applied by FuDNN");
}

SampleSet Classifier::prepare(std::span<const Window> windows) const {
  return make_samples(windows, classes_, weights_ ? &*weights_ : nullptr);
}

std::vector<EpochStats> Classifier::fit(std::span<const Window> train, const TrainConfig& config,
                                        const std::function<void(const EpochStats&)>& on_epoch) {
  return fit(prepare(train), config, on_epoch);
}

std::vector<EpochStats> Classifier::fit(const SampleSet& train, const TrainConfig& config,
                                        const std::function<void(const EpochStats&)>& on_epoch) {
  config.validate();
  require(train.channels == net_.spec().channels && train.samples == net_.spec().samples, ErrorKind::kContract,
          "training windows do not match the network input");
  Adam<float> opt(net_.params(), config.adam);
  std::mt19937_64 rng(derive_seed(config.seed, {0x5affu}));
  net_.reseed_dropout(derive_seed(config.seed, {0xd20u}));
  std::vector<EpochStats> history;
  for (int e = 0; e < config.epochs; ++e) {
    auto st = train_epoch(net_, opt, train, config.batch_size, rng);
    st.epoch = ++epochs_trained_;
    history.push_back(st);
    if (on_epoch) on_epoch(st);
  }
  return history;
}

Evaluation Classifier::evaluate(std::span<const Window> windows) const {
  return nn::evaluate(net_, prepare(windows), classes_.size());
}

} // namespace fudnn::nn
