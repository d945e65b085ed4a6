#ifndef PATCHCP_RECORD_HPP
#define PATCHCP_RECORD_HPP

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace patchcp {

inline constexpr const char* kToolkitVersion = "patchcp 1.0.0";
inline constexpr const char* kFormatTag = "v1";  ///< bump on any CSV schema change

/**
 * Collects one command's outputs: every emitted data file is written under
 * the output directory and content-hashed into the manifest, and finish()
 * writes `record.json` holding the full config echo (defaults included),
 * toolkit version, wall-clock time, summary statistics, and the manifest.
 * Data files are deterministic functions of (config, seed); only the
 * wall-clock field varies between reruns.
 */
class RunEmitter {
 public:
  RunEmitter(std::string command, std::string out_dir);

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void set_summary(nlohmann::json summary) { summary_ = std::move(summary); }

  /// Writes `name` (relative to the output directory) and records its hash.
  void add_file(const std::string& name, const std::string& content);

  /// Writes record.json; returns its path.
  std::string finish();

  const std::vector<std::pair<std::string, std::string>>& manifest() const {
    return manifest_;
  }

 private:
  std::string command_;
  std::string out_dir_;
  nlohmann::json config_;
  nlohmann::json summary_;
  std::vector<std::pair<std::string, std::string>> manifest_;  // name -> fnv1a64 hex
  std::chrono::steady_clock::time_point start_;
};

/// fnv1a64 of the bytes, as 16 hex digits.
std::string content_hash_hex(const std::string& content);

/// Creates parent directories as needed and writes the file atomically-ish.
void write_text_file(const std::string& path, const std::string& content);

}  // namespace patchcp

#endif  // PATCHCP_RECORD_HPP
