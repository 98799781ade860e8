#include <doctest.h>

#include <functional>
#include <memory>
#include <random>

#include "fudnn/error.hpp"
#include "fudnn/nn/checkpoint.hpp"
#include "fudnn/nn/classifier.hpp"
#include "fudnn/nn/gradcheck.hpp"
#include "fudnn/nn/layers.hpp"
#include "fudnn/nn/lstm.hpp"
#include "fudnn/nn/network.hpp"
#include "fudnn/nn/optim.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace fudnn;
using namespace fudnn::nn;

namespace {

Tensor<double> randn(Shape s, std::uint64_t seed, double sd = 1.0) {
  Tensor<double> t(std::move(s));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sd);
  for (auto& v : t.data) v = nd(rng);
  return t;
}

template <class L>
double check_layer(L& layer, const Shape& in, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  layer.init(rng);
  const auto x = randn(in, seed + 100);
  return grad_check_layer(layer, x).max_rel_error;
}

// Delegates to an inner layer but returns a scaled input gradient.
class CorruptBackward final : public Layer<double> {
 public:
  CorruptBackward(std::unique_ptr<Layer<double>> inner, double scale) : inner_(std::move(inner)), scale_(scale) {}
  std::string kind() const override { return "corrupt"; }
  Shape output_shape(const Shape& in) const override { return inner_->output_shape(in); }
  Tensor<double> infer(const Tensor<double>& x) const override { return inner_->infer(x); }
  Tensor<double> forward_train(const Tensor<double>& x) override { return inner_->forward_train(x); }
  Tensor<double> backward(const Tensor<double>& dy) override {
    auto dx = inner_->backward(dy);
    for (auto& v : dx.data) v *= scale_;
    return dx;
  }
  std::vector<NamedTensor<double>> params() override { return inner_->params(); }
  void init(std::mt19937_64& rng) override { inner_->init(rng); }

 private:
  std::unique_ptr<Layer<double>> inner_;
  double scale_;
};

} // namespace

TEST_SUITE("nn") {
  TEST_CASE("full-size network realizes the reference shape trace") {
    const auto spec = NetworkSpec::table_one(4);
    Network<float> net(spec, 1);
    const std::vector<Shape> expected{{40, 64, 451}, {80, 64, 402}, {80, 64, 57}, {80, 1, 57},
                                      {80, 1, 8},    {8, 200},      {1600},       {4}};
    const auto trace = net.shape_trace();
    REQUIRE(trace.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(trace[i].second == expected[i]);
  }

  TEST_CASE("observed trace equals the symbolic trace for every variant") {
    for (auto v : kAllVariants) {
      const auto spec = NetworkSpec::desk(3).with_variant(v);
      Network<float> net(spec, 2);
      Tensor<float> x({2, 1, 64, 500}, 0.5f);
      const auto a = net.shape_trace();
      const auto b = net.forward_trace(x);
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].first == b[i].first);
        CHECK(a[i].second == b[i].second);
      }
      CHECK(a.back().second == Shape{3});
    }
  }

  TEST_CASE("variants differ only in their layer stack") {
    const std::vector<std::vector<std::string>> blocks{
        {"conv1", "pool1", "head_pool", "dense"},
        {"conv1", "conv2", "pool1", "head_pool", "dense"},
        {"conv1", "conv2", "pool1", "depthwise", "head_pool", "dense"},
        {"conv1", "conv2", "pool1", "depthwise", "pool2", "bilstm", "flatten", "dense"}};
    for (std::size_t i = 0; i < 4; ++i) {
      Network<float> net(NetworkSpec::desk().with_variant(kAllVariants[i]), 1);
      std::vector<std::string> names;
      for (const auto& b : net.blocks()) names.push_back(b.name);
      CHECK(names == blocks[i]);
    }
    CHECK(NetworkSpec::desk().with_variant(Variant::kFuDNN).uses_channel_weights());
    CHECK_FALSE(NetworkSpec::desk().with_variant(Variant::kCnnIII).uses_channel_weights());
  }

  TEST_CASE("a trace mismatch is rejected at construction") {
    auto spec = NetworkSpec::table_one(4);
    spec.expected_trace[0] = {40, 64, 450};
    CHECK_THROWS_AS(Network<float>(spec, 1), Error);
  }

  TEST_CASE("zero input gives finite probabilities summing to one") {
    Network<float> net(NetworkSpec::table_one(4), 3);
    Tensor<float> x({1, 1, 64, 500});
    const auto p = softmax(net.infer(x));
    double s = 0.0;
    for (float v : p.data) {
      CHECK(std::isfinite(v));
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("layer gradient checks") {
    SUBCASE("conv2d") {
      Conv2d<double> l(2, 3, 2, 3);
      CHECK(check_layer(l, {2, 2, 4, 7}) < 1e-4);
      Conv2d<double> s(1, 2, 1, 3, 1, 2);
      CHECK(check_layer(s, {2, 1, 2, 9}) < 1e-4);
    }
    SUBCASE("depthwise") {
      DepthwiseConv2d<double> l(3, 4, 1);
      CHECK(check_layer(l, {2, 3, 4, 5}) < 1e-4);
    }
    SUBCASE("batchnorm") {
      BatchNorm2d<double> l(2);
      CHECK(check_layer(l, {3, 2, 2, 4}) < 1e-4);
    }
    SUBCASE("elu") {
      Elu<double> l;
      CHECK(check_layer(l, {2, 2, 3, 3}) < 1e-4);
    }
    SUBCASE("avgpool") {
      AvgPool2d<double> l(1, 3, 1, 3);
      CHECK(check_layer(l, {2, 2, 2, 10}) < 1e-4);
    }
    SUBCASE("dropout") {
      Dropout<double> l(0.5, 9);
      CHECK(check_layer(l, {2, 2, 2, 6}) < 1e-4);
    }
    SUBCASE("time to sequence / flatten / global pool") {
      TimeToSequence<double> a;
      CHECK(check_layer(a, {2, 3, 1, 5}) < 1e-4);
      Flatten<double> b;
      CHECK(check_layer(b, {2, 3, 4}) < 1e-4);
      GlobalAvgPoolTime<double> c;
      CHECK(check_layer(c, {2, 3, 2, 5}) < 1e-4);
    }
    SUBCASE("dense") {
      Dense<double> l(6, 4);
      CHECK(check_layer(l, {3, 6}) < 1e-4);
    }
    SUBCASE("bilstm") {
      BiLstm<double> l(3, 4);
      CHECK(check_layer(l, {2, 5, 3}) < 1e-4);
    }
  }

  TEST_CASE("scaled full stack passes the gradient check for every variant") {
    for (auto v : kAllVariants) {
      const auto spec = NetworkSpec::gradcheck_scaled(3).with_variant(v);
      Network<double> net(spec, 4);
      Shape s{3};
      for (auto d : spec.input_shape()) s.push_back(d);
      const auto x = randn(s, 5);
      const std::vector<int> labels{0, 1, 2};
      const auto r = grad_check(net, x, labels);
      INFO(to_string(v), " worst ", r.worst);
      CHECK(r.max_rel_error < 1e-4);
      CHECK(r.checked > 100);
    }
  }

  TEST_CASE("corrupted backward is caught") {
    CorruptBackward bad(std::make_unique<Dense<double>>(5, 3), 1.5);
    CHECK(check_layer(bad, {2, 5}) > 1e-2);
  }

  TEST_CASE("batchnorm statistics and modes") {
    BatchNorm2d<double> bn(2, 0.9, 1e-5);
    auto x = randn({4, 2, 3, 5}, 3, 2.0);
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] += 7.0;
    const auto y = bn.forward_train(x);
    for (std::size_t c = 0; c < 2; ++c) {
      double m = 0.0, v = 0.0;
      for (std::size_t b = 0; b < 4; ++b) {
        for (std::size_t i = 0; i < 15; ++i) m += y.data[(b * 2 + c) * 15 + i];
      }
      m /= 60.0;
      for (std::size_t b = 0; b < 4; ++b) {
        for (std::size_t i = 0; i < 15; ++i) v += std::pow(y.data[(b * 2 + c) * 15 + i] - m, 2);
      }
      v /= 60.0;
      CHECK(std::abs(m) < 1e-12);
      CHECK(v == doctest::Approx(1.0).epsilon(1e-4));
    }
    // running_mean moved 10% of the way from 0 to the batch mean (~7).
    const auto buf = bn.buffers();
    CHECK(buf[0].tensor->data[0] == doctest::Approx(0.7).epsilon(0.1));
    const auto one = randn({1, 2, 3, 5}, 4);
    CHECK_THROWS_AS(bn.forward_train(one), Error);
    CHECK_NOTHROW(bn.infer(one));
  }

  TEST_CASE("dropout: identity in eval, mean preserving in train") {
    Dropout<double> d(0.5, 3);
    Tensor<double> x({1, 10000}, 1.0);
    const auto e = d.infer(x);
    CHECK(e.data == x.data);
    const auto t = d.forward_train(x);
    double s = 0.0;
    std::size_t zeros = 0;
    for (double v : t.data) {
      s += v;
      zeros += v == 0.0;
      CHECK((v == 0.0 || v == 2.0));
    }
    CHECK(s / 10000.0 == doctest::Approx(1.0).epsilon(0.05));
    CHECK(zeros > 4500);
    CHECK(zeros < 5500);
    CHECK_THROWS_AS(Dropout<double>(1.0), Error);
  }

  TEST_CASE("softmax cross-entropy against a direct computation") {
    Tensor<double> logits({2, 3}, std::vector<double>{1.0, 2.0, 0.5, -1.0, 0.0, 3.0});
    const std::vector<int> y{1, 2};
    const auto r = softmax_cross_entropy(logits, y);
    double ref = 0.0;
    for (std::size_t b = 0; b < 2; ++b) {
      double z = 0.0;
      for (std::size_t k = 0; k < 3; ++k) z += std::exp(logits.data[b * 3 + k]);
      ref += -(logits.data[b * 3 + static_cast<std::size_t>(y[b])] - std::log(z));
      for (std::size_t k = 0; k < 3; ++k) {
        const double p = std::exp(logits.data[b * 3 + k]) / z;
        CHECK(r.probs.data[b * 3 + k] == doctest::Approx(p).epsilon(1e-12));
        CHECK(r.grad.data[b * 3 + k] ==
              doctest::Approx((p - (static_cast<int>(k) == y[b] ? 1.0 : 0.0)) / 2.0).epsilon(1e-12));
      }
    }
    CHECK(r.loss == doctest::Approx(ref / 2.0).epsilon(1e-12));
    const std::vector<int> bad{0, 3};
    CHECK_THROWS_AS(softmax_cross_entropy(logits, bad), Error);
  }

  TEST_CASE("argmax breaks ties toward the lowest index") {
    const std::vector<float> v{0.2f, 0.4f, 0.4f, 0.1f};
    CHECK(argmax<float>(v) == 1);
  }

  TEST_CASE("adam matches the textbook update") {
    Tensor<double> w({3}, std::vector<double>{0.5, -1.0, 2.0});
    w.grad.assign(3, 0.0);
    Adam<double> opt({{"w", &w}}, AdamConfig{});
    std::vector<oracle::AdamScalar> ref(3);
    std::vector<double> theta = w.data;
    for (int step = 0; step < 25; ++step) {
      for (std::size_t i = 0; i < 3; ++i) w.grad[i] = std::sin(0.3 * step + static_cast<double>(i)) * (i + 1.0);
      for (std::size_t i = 0; i < 3; ++i) theta[i] = ref[i].step(theta[i], w.grad[i]);
      opt.step();
    }
    for (std::size_t i = 0; i < 3; ++i) CHECK(w.data[i] == doctest::Approx(theta[i]).epsilon(1e-12));
    CHECK(opt.steps() == 25);
    AdamConfig bad;
    bad.beta1 = 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
  }

  TEST_CASE("glorot init stays within its bound") {
    Dense<double> d(30, 10);
    std::mt19937_64 rng(1);
    d.init(rng);
    const double bound = std::sqrt(6.0 / 40.0);
    const auto p = d.params();
    for (const auto& nt : p) {
      if (nt.name != "weight") continue;
      for (double v : nt.tensor->data) CHECK(std::abs(v) <= bound);
    }
  }

  TEST_CASE("lstm forget gate bias starts at one") {
    BiLstm<double> l(2, 3, 1.0);
    std::mt19937_64 rng(1);
    l.init(rng);
    for (const auto& p : l.params()) {
      if (p.name.find("bias") == std::string::npos) continue;
      // gate order i, f, g, o
      for (std::size_t h = 0; h < 3; ++h) {
        CHECK(p.tensor->data[h] == 0.0);
        CHECK(p.tensor->data[3 + h] == 1.0);
        CHECK(p.tensor->data[6 + h] == 0.0);
      }
    }
  }

  TEST_CASE("same seed, same network") {
    Network<float> a(NetworkSpec::desk(), 42), b(NetworkSpec::desk(), 42), c(NetworkSpec::desk(), 43);
    const auto pa = a.state(), pb = b.state(), pc = c.state();
    REQUIRE(pa.size() == pb.size());
    bool differs = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i].name == pb[i].name);
      CHECK(pa[i].tensor->data == pb[i].tensor->data);
      differs = differs || pa[i].tensor->data != pc[i].tensor->data;
    }
    CHECK(differs);
  }

  TEST_CASE("state order: layer order, then name") {
    Network<float> net(NetworkSpec::desk(), 1);
    const auto st = net.state();
    CHECK(st[0].name == "conv1.0.bias");
    CHECK(st[1].name == "conv1.0.weight");
    CHECK(st[2].name == "conv1.1.beta");
    CHECK(st[3].name == "conv1.1.gamma");
    CHECK(st[4].name == "conv1.1.running_mean");
    CHECK(st[5].name == "conv1.1.running_var");
  }

  TEST_CASE("network spec JSON round-trip and validation") {
    const auto s = NetworkSpec::desk(3).with_variant(Variant::kCnnII);
    const auto back = NetworkSpec::from_json(s.to_json());
    CHECK(back.to_json() == s.to_json());
    auto j = s.to_json();
    j["dropout"] = 1.5;
    CHECK_THROWS_AS(NetworkSpec::from_json(j), Error);
    CHECK_THROWS_AS(parse_variant("CNN-IV"), Error);
  }
}

TEST_SUITE("training") {
  // Two classes: alpha burst on the first 4 channels vs on the last 4.
  std::vector<Window> toy_windows(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> nd;
    std::uniform_real_distribution<double> ph(0.0, 6.28);
    std::vector<Window> out;
    for (std::size_t i = 0; i < n; ++i) {
      Window w;
      w.trial_id = static_cast<int>(i);
      w.subject_id = "T";
      w.label = i % 2 ? ClassLabel::EF : ClassLabel::PW;
      w.data = SignalMatrix(8, 64);
      const double p = ph(rng);
      for (std::size_t k = 0; k < 8; ++k) {
        const bool active = (k < 4) == (i % 2 == 0);
        for (std::size_t t = 0; t < 64; ++t) {
          w.data.at(k, t) = nd(rng) + (active ? 2.0f * static_cast<float>(std::cos(0.8 * t + p)) : 0.0f);
        }
      }
      out.push_back(std::move(w));
    }
    return out;
  }

  NetworkSpec toy_spec(Variant v) {
    NetworkSpec s;
    s.channels = 8;
    s.samples = 64;
    s.n_classes = 2;
    s.conv1_maps = 2;
    s.conv1_len = 5;
    s.conv2_maps = 3;
    s.conv2_len = 5;
    s.pool_len = 4;
    s.pool_stride = 4;
    s.lstm_hidden = 4;
    return s.with_variant(v);
  }

  TEST_CASE("loss decreases over 10 epochs on separable data") {
    const auto train = toy_windows(96, 1);
    const auto classes = class_subset(2);
    Classifier clf(toy_spec(Variant::kCnnIII), classes, std::nullopt, 3);
    TrainConfig tc;
    tc.epochs = 10;
    tc.adam.lr = 1e-2;
    tc.seed = 4;
    const auto hist = clf.fit(train, tc);
    REQUIRE(hist.size() == 10);
    CHECK(hist.back().loss < 0.5 * hist.front().loss);
    CHECK(clf.evaluate(toy_windows(40, 2)).accuracy > 0.9);
  }

  TEST_CASE("fuDNN requires channel weights and others refuse them") {
    const auto classes = class_subset(2);
    CHECK_THROWS_AS(Classifier(toy_spec(Variant::kFuDNN), classes, std::nullopt, 1), Error);
    CHECK_THROWS_AS(Classifier(toy_spec(Variant::kCnnII), classes, ChannelWeights{std::vector<double>(8, 1.0)}, 1),
                    Error);
  }

  TEST_CASE("batches cover every sample once and never leave a singleton") {
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(make_batches(1, 32, rng), Error);
    for (std::size_t n : {2u, 31u, 32u, 33u, 65u, 640u}) {
      const auto batches = make_batches(n, 32, rng);
      std::vector<int> seen(n, 0);
      for (const auto& b : batches) {
        CHECK(b.size() >= 2);
        for (auto i : b) ++seen[i];
      }
      for (int s : seen) CHECK(s == 1);
    }
  }

  TEST_CASE("training is deterministic and checkpoints round-trip") {
    testutil::TempDir dir("ckpt");
    const auto train = toy_windows(64, 5);
    const auto classes = class_subset(2);
    TrainConfig tc;
    tc.epochs = 2;
    tc.seed = 8;
    ChannelWeights w{{1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3}};
    Classifier a(toy_spec(Variant::kFuDNN), classes, w, 11);
    Classifier b(toy_spec(Variant::kFuDNN), classes, w, 11);
    const auto ha = a.fit(train, tc);
    const auto hb = b.fit(train, tc);
    CHECK(ha.back().loss == hb.back().loss);
    save_checkpoint(dir.path / "m", a, tc);
    const auto c = load_checkpoint(dir.path / "m");
    CHECK(c.epochs_trained() == 2);
    CHECK(c.weights()->w == w.w);
    const auto test = toy_windows(20, 6);
    const auto ea = a.evaluate(test), ec = c.evaluate(test);
    CHECK(ea.predicted == ec.predicted);
    const auto sa = a.network().state();
    auto& cn = const_cast<Classifier&>(c).network();
    const auto sc = cn.state();
    for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i].tensor->data == sc[i].tensor->data);

    // Truncated blob is a format error.
    std::filesystem::resize_file(dir.path / "m" / "model.bin", 100);
    CHECK_THROWS_AS(load_checkpoint(dir.path / "m"), Error);
  }
}
