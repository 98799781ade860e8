#include "fudnn/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>
#include <utility>

namespace fudnn {

namespace {

// fftw_plan_* / fftw_destroy_plan are not thread-safe; fftw_execute is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

enum class PlanKind { kForward, kBackward, kReal };

struct CachedPlan {
  fftw_plan plan = nullptr;
  void* in = nullptr;
  void* out = nullptr;
};

// One plan per (kind, size) per thread, each owning its aligned buffers.
class PlanCache {
 public:
  ~PlanCache() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    for (auto& [key, p] : plans_) {
      fftw_destroy_plan(p.plan);
      fftw_free(p.in);
      fftw_free(p.out);
    }
  }

  CachedPlan& get(PlanKind kind, int n) {
    auto key = std::make_pair(kind, n);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    CachedPlan p;
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (kind == PlanKind::kReal) {
      p.in = fftw_malloc(sizeof(double) * static_cast<std::size_t>(n));
      p.out = fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n / 2 + 1));
      p.plan = fftw_plan_dft_r2c_1d(n, static_cast<double*>(p.in), static_cast<fftw_complex*>(p.out),
                                    FFTW_ESTIMATE);
    } else {
      p.in = fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n));
      p.out = fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n));
      p.plan = fftw_plan_dft_1d(n, static_cast<fftw_complex*>(p.in), static_cast<fftw_complex*>(p.out),
                                kind == PlanKind::kForward ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    return plans_.emplace(key, p).first->second;
  }

 private:
  std::map<std::pair<PlanKind, int>, CachedPlan> plans_;
};

PlanCache& cache() {
  thread_local PlanCache c;
  return c;
}

std::vector<std::complex<double>> c2c(std::span<const std::complex<double>> in, PlanKind kind) {
  std::vector<std::complex<double>> out(in.size());
  if (in.empty()) return out;
  auto& p = cache().get(kind, static_cast<int>(in.size()));
  std::memcpy(p.in, in.data(), sizeof(fftw_complex) * in.size());
  fftw_execute(p.plan);
  std::memcpy(out.data(), p.out, sizeof(fftw_complex) * in.size());
  return out;
}

} // namespace

std::vector<std::complex<double>> fft(std::span<const std::complex<double>> in) {
  return c2c(in, PlanKind::kForward);
}

std::vector<std::complex<double>> ifft(std::span<const std::complex<double>> in) {
  auto out = c2c(in, PlanKind::kBackward);
  const double scale = out.empty() ? 1.0 : 1.0 / static_cast<double>(out.size());
  for (auto& v : out) v *= scale;
  return out;
}

std::vector<std::complex<double>> rfft(std::span<const double> in) {
  std::vector<std::complex<double>> out(in.size() / 2 + 1);
  if (in.empty()) return out;
  auto& p = cache().get(PlanKind::kReal, static_cast<int>(in.size()));
  std::memcpy(p.in, in.data(), sizeof(double) * in.size());
  fftw_execute(p.plan);
  std::memcpy(out.data(), p.out, sizeof(fftw_complex) * out.size());
  return out;
}

} // namespace fudnn
