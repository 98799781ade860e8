#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace fudnn::cli {

std::string sha256_file(const std::filesystem::path& path);

// Collects what a run consumed and produced; written as
// <out>/run_manifest.json when the command finishes.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv);

  void add_input(const std::filesystem::path& path);
  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void add_seed(const std::string& name, std::uint64_t seed) { seeds_[name] = seed; }
  void set_threads(std::size_t n) { threads_ = n; }
  // Hashes every regular file under `out` except the manifest itself.
  void write(const std::filesystem::path& out) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  nlohmann::json inputs_ = nlohmann::json::array();
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json seeds_ = nlohmann::json::object();
  std::size_t threads_ = 1;
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
};

} // namespace fudnn::cli
