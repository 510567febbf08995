#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "streamrag/json_io.hpp"

namespace streamrag::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Lowercase hex SHA-256 of a file's bytes. Throws InputError if unreadable.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

struct FileDigest {
  std::string path;
  std::string sha256;
};

/// Everything needed to rerun a command: its arguments, the effective
/// configuration and the digests of what it read and wrote.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  io::Json config;
  std::uint64_t seed = 0;
  std::vector<FileDigest> inputs;
  /// Paths relative to the output directory.
  std::vector<FileDigest> outputs;

  void add_input(const std::filesystem::path& p);
  void add_output(const std::filesystem::path& out_dir, const std::string& name);

  io::Json to_json() const;
  static RunManifest from_json(const io::Json& j);
};

/// Writes `manifest.json` into `out_dir`.
void write_manifest(const RunManifest& m, const std::filesystem::path& out_dir);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace streamrag::cli
