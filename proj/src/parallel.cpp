#include "fudnn/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "fudnn/error.hpp"

namespace fudnn {

std::size_t resolve_threads(std::optional<int> requested) {
  if (requested) {
    require(*requested >= 1, ErrorKind::kConfig, "--threads must be >= 1");
    return static_cast<std::size_t>(*requested);
  }
  if (const char* env = std::getenv("FUDNN_THREADS"); env && *env) {
    try {
      const int n = std::stoi(env);
      require(n >= 1, ErrorKind::kConfig, "FUDNN_THREADS must be >= 1");
      return static_cast<std::size_t>(n);
    } catch (const std::logic_error&) {
      fail(ErrorKind::kConfig, std::string("FUDNN_THREADS is not an integer: ") + env);
    }
  }
  return 1;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(threads, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

} // namespace fudnn
