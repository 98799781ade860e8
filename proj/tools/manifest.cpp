#include "manifest.hpp"

#include <algorithm>
#include <array>
#include <ctime>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "fudnn/error.hpp"
#include "fudnn/report.hpp"

namespace fudnn::cli {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

} // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kFormat, "cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  require(ctx && EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) == 1, ErrorKind::kFormat, "sha256 init failed");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

RunManifest::RunManifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)), started_(utc_now()), t0_(std::chrono::steady_clock::now()) {}

void RunManifest::add_input(const fs::path& path) {
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) add_input(f);
    return;
  }
  inputs_.push_back({{"path", path.string()}, {"bytes", fs::file_size(path)}, {"sha256", sha256_file(path)}});
}

void RunManifest::write(const fs::path& out) const {
  nlohmann::json outputs = nlohmann::json::array();
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (e.is_regular_file() && e.path().filename() != "run_manifest.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    outputs.push_back({{"path", fs::relative(f, out).string()}, {"sha256", sha256_file(f)}});
  }
  nlohmann::json j;
  j["tool"] = "fudnn";
  j["version"] = FUDNN_VERSION;
  j["command"] = command_;
  j["argv"] = argv_;
  j["config"] = config_;
  j["seeds"] = seeds_;
  j["threads"] = threads_;
  j["inputs"] = inputs_;
  j["outputs"] = outputs;
  j["started_utc"] = started_;
  j["finished_utc"] = utc_now();
  j["elapsed_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  write_json(out / "run_manifest.json", j);
}

} // namespace fudnn::cli
