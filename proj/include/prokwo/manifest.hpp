#pragma once

// Run manifest: what was run, on which bytes, and how long each stage took.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "prokwo/corpus.hpp"
#include "prokwo/error.hpp"

namespace prokwo {

inline constexpr std::string_view kToolkitVersion = "0.1.0";

inline std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1) {
    throw Error("sha256: digest computation failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return hex.str();
}

struct FileDigest {
  std::string path;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

// One digest per regular file; directories are expanded recursively in
// lexicographic order.
inline std::vector<FileDigest> digest_path(const std::filesystem::path& path) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& entry : std::filesystem::recursive_directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  std::vector<FileDigest> out;
  for (const auto& f : files) {
    const auto content = read_text_file(f);
    out.push_back({f.generic_string(), sha256_hex(content), content.size()});
  }
  return out;
}

class RunManifest {
 public:
  struct Stage {
    std::string name;
    std::size_t rows = 0;
    double seconds = 0.0;
  };

  void set_command(std::string command) { command_ = std::move(command); }
  void set_config(nlohmann::json config) { config_ = std::move(config); }

  void add_input(const std::string& role, const std::filesystem::path& path) {
    for (auto& d : digest_path(path)) inputs_.emplace_back(role, std::move(d));
  }

  void add_output(const std::string& name, std::string_view content) {
    outputs_.push_back({name, sha256_hex(content), content.size()});
  }

  void add_stage(std::string name, std::size_t rows, double seconds) { stages_.push_back({std::move(name), rows, seconds}); }

  // Runs `fn`, records its wall time, and stores the row count `rows(result)`.
  template <typename Fn, typename Rows>
  auto timed(const std::string& name, Fn&& fn, Rows&& rows) {
    const auto start = std::chrono::steady_clock::now();
    auto result = fn();
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    add_stage(name, rows(result), elapsed.count());
    return result;
  }

  const std::vector<std::pair<std::string, FileDigest>>& inputs() const { return inputs_; }
  const std::vector<Stage>& stages() const { return stages_; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["toolkit"] = "prokwo";
    j["version"] = std::string(kToolkitVersion);
    j["command"] = command_;
    j["config"] = config_;
    j["inputs"] = nlohmann::json::array();
    for (const auto& [role, d] : inputs_) {
      j["inputs"].push_back({{"role", role}, {"path", d.path}, {"sha256", d.sha256}, {"bytes", d.bytes}});
    }
    j["outputs"] = nlohmann::json::array();
    for (const auto& d : outputs_) j["outputs"].push_back({{"file", d.path}, {"sha256", d.sha256}, {"bytes", d.bytes}});
    j["stages"] = nlohmann::json::array();
    for (const auto& s : stages_) j["stages"].push_back({{"name", s.name}, {"rows", s.rows}, {"seconds", s.seconds}});
    return j;
  }

 private:
  std::string command_;
  nlohmann::json config_ = nlohmann::json::object();
  std::vector<std::pair<std::string, FileDigest>> inputs_;
  std::vector<FileDigest> outputs_;
  std::vector<Stage> stages_;
};

}  // namespace prokwo
