#pragma once

// Run manifest: config snapshot, input and output digests, timings.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "cdrmob/text.hpp"

namespace cdrmob {

inline constexpr std::string_view kToolVersion = "1.0.0";

inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for hashing: " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 unavailable");
  }
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned k = 0; k < len; ++k) hex += fmt::format("{:02x}", md[k]);
  return hex;
}

inline void write_json_file(const std::string& path, const nlohmann::ordered_json& j) {
  CsvWriter w(path);
  w.buffer() += j.dump(2);
  w.buffer() += '\n';
  w.close();
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

struct RunManifest {
  std::string subcommand;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;  // relative to the output directory
  nlohmann::ordered_json timings = nlohmann::ordered_json::object();
  nlohmann::ordered_json ingest_stats;

  // Outputs are hashed here, so call after every file is closed.
  nlohmann::ordered_json to_json(const std::filesystem::path& out_dir) const {
    nlohmann::ordered_json j;
    j["tool"] = "cdrmob";
    j["version"] = kToolVersion;
    j["subcommand"] = subcommand;
    j["config"] = config;
    j["stage_versions"] = {{"ingest", 1}, {"homes", 1}, {"metrics", 1}, {"density", 1}, {"patterns", 1}};
    auto& in = j["inputs"] = nlohmann::ordered_json::array();
    for (const auto& p : inputs)
      in.push_back({{"path", p.string()}, {"bytes", std::filesystem::file_size(p)}, {"sha256", sha256_file(p)}});
    auto& out = j["outputs"] = nlohmann::ordered_json::array();
    for (const auto& p : outputs) {
      const auto full = out_dir / p;
      if (std::filesystem::is_regular_file(full)) out.push_back({{"path", p.generic_string()}, {"sha256", sha256_file(full)}});
    }
    if (!ingest_stats.is_null()) j["ingest_stats"] = ingest_stats;
    j["timings_s"] = timings;
    return j;
  }

  void write(const std::filesystem::path& out_dir) const {
    const auto path = out_dir / "manifest.json";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << to_json(out_dir).dump(2) << '\n';
  }
};

}  // namespace cdrmob
