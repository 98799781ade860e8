#include "fudnn/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "fudnn/error.hpp"
#include "fudnn/nn/layers.hpp"

namespace fudnn::nn {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

struct Target {
  std::string name;
  std::vector<double>* values;
  std::vector<double> analytic;
};

GradCheckResult compare(std::vector<Target>& targets, const std::function<double()>& loss,
                        const GradCheckOptions& opt) {
  GradCheckResult r;
  for (auto& t : targets) {
    auto& v = *t.values;
    const std::size_t n = v.size();
    const std::size_t stride = (opt.max_per_tensor == 0 || n <= opt.max_per_tensor) ? 1 : n / opt.max_per_tensor;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = v[i];
      v[i] = saved + opt.eps;
      const double lp = loss();
      v[i] = saved - opt.eps;
      const double lm = loss();
      v[i] = saved;
      const double numeric = (lp - lm) / (2.0 * opt.eps);
      const double err = relative_error(t.analytic[i], numeric, opt.floor);
      require(std::isfinite(err), ErrorKind::kNumeric, "non-finite gradient at " + t.name);
      ++r.checked;
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst = t.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

} // namespace

GradCheckResult grad_check_layer(Layer<double>& layer, const Tensor<double>& x, const GradCheckOptions& opt) {
  Tensor<double> input = x;
  input.grad.clear();
  layer.reseed(opt.seed);
  const Tensor<double> y0 = layer.forward_train(input);
  std::mt19937_64 rng(opt.seed ^ 0x5eedULL);
  std::normal_distribution<double> nd(0.0, 1.0);
  Tensor<double> r(y0.shape);
  for (auto& v : r.data) v = nd(rng);

  for (auto& p : layer.params()) p.tensor->zero_grad();
  const Tensor<double> dx = layer.backward(r);

  std::vector<Target> targets;
  targets.push_back({"input", &input.data, dx.data});
  for (auto& p : layer.params()) targets.push_back({p.name, &p.tensor->data, p.tensor->grad});

  auto loss = [&]() {
    layer.reseed(opt.seed);
    const Tensor<double> y = layer.forward_train(input);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += r.data[i] * y.data[i];
    return acc;
  };
  return compare(targets, loss, opt);
}

GradCheckResult grad_check(Network<double>& net, const Tensor<double>& x, std::span<const int> labels,
                           const GradCheckOptions& opt) {
  Tensor<double> input = x;
  input.grad.clear();
  net.zero_grad();
  net.reseed_dropout(opt.seed);
  const auto logits = net.forward(input, Mode::kTrain);
  const auto lr = softmax_cross_entropy(logits, labels);
  const Tensor<double> dx = net.backward(lr.grad);

  std::vector<Target> targets;
  targets.push_back({"input", &input.data, dx.data});
  for (auto& p : net.params()) targets.push_back({p.name, &p.tensor->data, p.tensor->grad});

  auto loss = [&]() {
    net.reseed_dropout(opt.seed);
    return softmax_cross_entropy(net.forward(input, Mode::kTrain), labels).loss;
  };
  return compare(targets, loss, opt);
}

} // namespace fudnn::nn
