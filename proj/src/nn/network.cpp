#include "fudnn/nn/network.hpp"

#include <algorithm>
#include <random>

#include "fudnn/error.hpp"
#include "fudnn/nn/layers.hpp"
#include "fudnn/nn/lstm.hpp"
#include "fudnn/random.hpp"

namespace fudnn::nn {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kCnnI: return "CNN-I";
    case Variant::kCnnII: return "CNN-II";
    case Variant::kCnnIII: return "CNN-III";
    case Variant::kFuDNN: return "FuDNN";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  for (auto v : kAllVariants) {
    if (to_string(v) == text) return v;
  }
  fail(ErrorKind::kConfig, "unknown network variant '" + std::string(text) + "'");
}

NetworkSpec NetworkSpec::table_one(std::size_t n_classes) {
  NetworkSpec s;
  s.n_classes = n_classes;
  s.expected_trace = {{40, 64, 451}, {80, 64, 402}, {80, 64, 57}, {80, 1, 57},
                      {80, 1, 8},    {8, 200},      {1600},       {n_classes}};
  return s;
}

NetworkSpec NetworkSpec::desk(std::size_t n_classes) {
  NetworkSpec s;
  s.n_classes = n_classes;
  s.conv1_maps = 4;
  s.conv1_len = 11;
  s.conv2_maps = 4;
  s.conv2_len = 5;
  s.lstm_hidden = 8;
  return s;
}

NetworkSpec NetworkSpec::gradcheck_scaled(std::size_t n_classes) {
  NetworkSpec s;
  s.channels = 4;
  s.samples = 40;
  s.n_classes = n_classes;
  s.conv1_maps = 2;
  s.conv1_len = 5;
  s.conv2_maps = 3;
  s.conv2_len = 5;
  s.pool_len = 3;
  s.pool_stride = 3;
  s.lstm_hidden = 3;
  return s;
}

void NetworkSpec::validate() const {
  require(channels >= 1 && samples >= 1, ErrorKind::kConfig, "network input must be non-empty");
  require(n_classes >= 2, ErrorKind::kConfig, "network needs at least 2 classes");
  require(conv1_maps >= 1 && conv2_maps >= 1 && lstm_hidden >= 1, ErrorKind::kConfig,
          "feature map and hidden counts must be positive");
  require(conv1_len >= 1 && conv2_len >= 1 && pool_len >= 1 && pool_stride >= 1, ErrorKind::kConfig,
          "kernel and pool sizes must be positive");
  require(dropout >= 0.0 && dropout < 1.0, ErrorKind::kConfig, "dropout must be in [0, 1)");
  require(bn_momentum >= 0.0 && bn_momentum <= 1.0 && bn_eps > 0.0, ErrorKind::kConfig,
          "invalid batchnorm parameters");
}

NetworkSpec NetworkSpec::with_variant(Variant v) const {
  NetworkSpec s = *this;
  s.variant = v;
  if (v != Variant::kFuDNN) s.expected_trace.clear();
  return s;
}

nlohmann::json NetworkSpec::to_json() const {
  nlohmann::ordered_json j;
  j["variant"] = std::string(to_string(variant));
  j["channels"] = channels;
  j["samples"] = samples;
  j["n_classes"] = n_classes;
  j["conv1_maps"] = conv1_maps;
  j["conv1_len"] = conv1_len;
  j["conv2_maps"] = conv2_maps;
  j["conv2_len"] = conv2_len;
  j["pool_len"] = pool_len;
  j["pool_stride"] = pool_stride;
  j["dropout"] = dropout;
  j["lstm_hidden"] = lstm_hidden;
  j["lstm_forget_bias"] = lstm_forget_bias;
  j["bn_momentum"] = bn_momentum;
  j["bn_eps"] = bn_eps;
  j["expected_trace"] = expected_trace;
  return j;
}

NetworkSpec NetworkSpec::from_json(const nlohmann::json& j) {
  NetworkSpec s;
  try {
    if (j.contains("variant")) s.variant = parse_variant(j.at("variant").get<std::string>());
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("channels", s.channels);
    get("samples", s.samples);
    get("n_classes", s.n_classes);
    get("conv1_maps", s.conv1_maps);
    get("conv1_len", s.conv1_len);
    get("conv2_maps", s.conv2_maps);
    get("conv2_len", s.conv2_len);
    get("pool_len", s.pool_len);
    get("pool_stride", s.pool_stride);
    get("dropout", s.dropout);
    get("lstm_hidden", s.lstm_hidden);
    get("lstm_forget_bias", s.lstm_forget_bias);
    get("bn_momentum", s.bn_momentum);
    get("bn_eps", s.bn_eps);
    get("expected_trace", s.expected_trace);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("network spec: ") + e.what());
  }
  s.validate();
  return s;
}

template <class T>
Network<T>::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  build();
  const auto trace = shape_trace();
  if (!spec_.expected_trace.empty()) {
    std::string got, want;
    for (const auto& [name, shape] : trace) got += " " + name + "=" + to_string(shape);
    for (const auto& shape : spec_.expected_trace) want += " " + to_string(shape);
    bool ok = trace.size() == spec_.expected_trace.size();
    for (std::size_t i = 0; ok && i < trace.size(); ++i) ok = trace[i].second == spec_.expected_trace[i];
    require(ok, ErrorKind::kContract, "shape trace mismatch: built" + got + "; expected" + want);
  }
  std::mt19937_64 rng(seed);
  std::uint64_t dropout_index = 0;
  for (auto& b : blocks_) {
    for (auto& l : b.layers) {
      l->init(rng);
      l->reseed(derive_seed(seed, {0xd20u, dropout_index++}));
    }
  }
}

template <class T>
void Network<T>::build() {
  const auto& s = spec_;
  auto block = [&](std::string name) -> Block& {
    blocks_.push_back(Block{std::move(name), {}});
    return blocks_.back();
  };
  auto add = [](Block& b, auto layer) { b.layers.push_back(std::move(layer)); };

  auto& conv1 = block("conv1");
  add(conv1, std::make_unique<Conv2d<T>>(1, s.conv1_maps, 1, s.conv1_len));
  add(conv1, std::make_unique<BatchNorm2d<T>>(s.conv1_maps, s.bn_momentum, s.bn_eps));
  std::size_t maps = s.conv1_maps;

  if (s.variant != Variant::kCnnI) {
    auto& conv2 = block("conv2");
    add(conv2, std::make_unique<Conv2d<T>>(s.conv1_maps, s.conv2_maps, 1, s.conv2_len));
    add(conv2, std::make_unique<BatchNorm2d<T>>(s.conv2_maps, s.bn_momentum, s.bn_eps));
    add(conv2, std::make_unique<Elu<T>>());
    maps = s.conv2_maps;
  }

  auto& pool1 = block("pool1");
  add(pool1, std::make_unique<AvgPool2d<T>>(1, s.pool_len, 1, s.pool_stride));
  add(pool1, std::make_unique<Dropout<T>>(s.dropout));

  if (s.variant == Variant::kCnnIII || s.variant == Variant::kFuDNN) {
    auto& dw = block("depthwise");
    add(dw, std::make_unique<DepthwiseConv2d<T>>(maps, s.channels, 1));
    add(dw, std::make_unique<BatchNorm2d<T>>(maps, s.bn_momentum, s.bn_eps));
    add(dw, std::make_unique<Elu<T>>());
  }

  // Feed a symbolic shape through what exists so far to size the head.
  auto current_shape = [&]() {
    Shape sh = s.input_shape();
    for (const auto& b : blocks_) {
      for (const auto& l : b.layers) sh = l->output_shape(sh);
    }
    return sh;
  };

  if (s.variant == Variant::kFuDNN) {
    auto& pool2 = block("pool2");
    add(pool2, std::make_unique<AvgPool2d<T>>(1, s.pool_len, 1, s.pool_stride));
    add(pool2, std::make_unique<Dropout<T>>(s.dropout));
    auto& lstm = block("bilstm");
    add(lstm, std::make_unique<TimeToSequence<T>>());
    add(lstm, std::make_unique<BiLstm<T>>(maps, s.lstm_hidden, s.lstm_forget_bias));
    auto& flat = block("flatten");
    add(flat, std::make_unique<Flatten<T>>());
  } else {
    auto& head = block("head_pool");
    add(head, std::make_unique<GlobalAvgPoolTime<T>>());
  }
  const Shape feat = current_shape();
  auto& dense = block("dense");
  add(dense, std::make_unique<Dense<T>>(numel(feat), s.n_classes));
}

template <class T>
ShapeTrace Network<T>::shape_trace() const {
  ShapeTrace trace;
  Shape sh = spec_.input_shape();
  for (const auto& b : blocks_) {
    for (const auto& l : b.layers) sh = l->output_shape(sh);
    trace.emplace_back(b.name, sh);
  }
  return trace;
}

template <class T>
ShapeTrace Network<T>::forward_trace(const Tensor<T>& x) const {
  ShapeTrace trace;
  Tensor<T> h = x;
  for (const auto& b : blocks_) {
    for (const auto& l : b.layers) h = l->infer(h);
    trace.emplace_back(b.name, Shape(h.shape.begin() + 1, h.shape.end()));
  }
  return trace;
}

template <class T>
Tensor<T> Network<T>::infer(const Tensor<T>& x) const {
  Tensor<T> h = x;
  for (const auto& b : blocks_) {
    for (const auto& l : b.layers) h = l->infer(h);
  }
  return h;
}

template <class T>
Tensor<T> Network<T>::forward(const Tensor<T>& x, Mode mode) {
  if (mode == Mode::kEval) return infer(x);
  Tensor<T> h = x;
  for (auto& b : blocks_) {
    for (auto& l : b.layers) h = l->forward_train(h);
  }
  return h;
}

template <class T>
Tensor<T> Network<T>::backward(const Tensor<T>& dlogits, bool input_grad) {
  blocks_.front().layers.front()->set_input_grad(input_grad);
  Tensor<T> g = dlogits;
  for (auto b = blocks_.rbegin(); b != blocks_.rend(); ++b) {
    for (auto l = b->layers.rbegin(); l != b->layers.rend(); ++l) g = (*l)->backward(g);
  }
  return g;
}

template <class T>
std::vector<NamedTensor<T>> Network<T>::params() {
  std::vector<NamedTensor<T>> out;
  for (auto& b : blocks_) {
    for (std::size_t i = 0; i < b.layers.size(); ++i) {
      for (auto& p : b.layers[i]->params()) {
        out.push_back({b.name + "." + std::to_string(i) + "." + p.name, p.tensor});
      }
    }
  }
  return out;
}

template <class T>
std::vector<NamedTensor<T>> Network<T>::state() {
  std::vector<NamedTensor<T>> out;
  for (auto& b : blocks_) {
    for (std::size_t i = 0; i < b.layers.size(); ++i) {
      auto items = b.layers[i]->params();
      for (auto& buf : b.layers[i]->buffers()) items.push_back(buf);
      std::sort(items.begin(), items.end(), [](const auto& a, const auto& c) { return a.name < c.name; });
      for (auto& p : items) out.push_back({b.name + "." + std::to_string(i) + "." + p.name, p.tensor});
    }
  }
  return out;
}

template <class T>
std::size_t Network<T>::parameter_count() {
  std::size_t n = 0;
  for (auto& p : params()) n += p.tensor->size();
  return n;
}

template <class T>
void Network<T>::zero_grad() {
  for (auto& p : params()) p.tensor->zero_grad();
}

template <class T>
void Network<T>::reseed_dropout(std::uint64_t seed) {
  std::uint64_t i = 0;
  for (auto& b : blocks_) {
    for (auto& l : b.layers) l->reseed(derive_seed(seed, {0xd20u, i++}));
  }
}

template class Network<float>;
template class Network<double>;

} // namespace fudnn::nn
