#include "patchcp/record.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "patchcp/util.hpp"

namespace patchcp {

std::string content_hash_hex(const std::string& content) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(content.data(), content.size())));
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out.flush()) throw std::runtime_error("write failed: " + path);
}

RunEmitter::RunEmitter(std::string command, std::string out_dir)
    : command_(std::move(command)),
      out_dir_(std::move(out_dir)),
      start_(std::chrono::steady_clock::now()) {}

void RunEmitter::add_file(const std::string& name, const std::string& content) {
  write_text_file((std::filesystem::path(out_dir_) / name).string(), content);
  manifest_.emplace_back(name, content_hash_hex(content));
}

std::string RunEmitter::finish() {
  using nlohmann::json;
  double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  json manifest = json::object();
  for (const auto& [name, hash] : manifest_) manifest[name] = hash;
  json record{{"command", command_},      {"version", kToolkitVersion},
              {"format", kFormatTag},     {"config", config_},
              {"summary", summary_},      {"wall_seconds", wall},
              {"manifest", manifest}};
  std::string path = (std::filesystem::path(out_dir_) / "record.json").string();
  write_text_file(path, record.dump(2) + "\n");
  return path;
}

}  // namespace patchcp
