#include "manifest.hpp"

#include <array>
#include <cstdio>
#include <memory>

#include <openssl/evp.h>

namespace streamrag::cli {

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::string sha256_file(const std::filesystem::path& path) {
  return sha256_hex(io::read_file(path));
}

void RunManifest::add_input(const std::filesystem::path& p) {
  inputs.push_back({p.string(), sha256_file(p)});
}

void RunManifest::add_output(const std::filesystem::path& out_dir, const std::string& name) {
  outputs.push_back({name, sha256_file(out_dir / name)});
}

io::Json RunManifest::to_json() const {
  auto files = [](const std::vector<FileDigest>& list) {
    io::Json a = io::Json::array();
    for (const auto& f : list) a.push_back(io::Json{{"path", f.path}, {"sha256", f.sha256}});
    return a;
  };
  return io::Json{{"schema_version", io::kSchemaVersion},
                  {"tool_version", kToolVersion},
                  {"command", command},
                  {"argv", argv},
                  {"seed", seed},
                  {"config", config},
                  {"inputs", files(inputs)},
                  {"outputs", files(outputs)}};
}

RunManifest RunManifest::from_json(const io::Json& j) {
  try {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = j.at("config");
    for (const auto& f : j.at("inputs")) {
      m.inputs.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
    }
    for (const auto& f : j.at("outputs")) {
      m.outputs.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed manifest: ") + e.what());
  }
}

void write_manifest(const RunManifest& m, const std::filesystem::path& out_dir) {
  io::write_file_atomic(out_dir / "manifest.json", m.to_json().dump(2) + "\n");
}

RunManifest read_manifest(const std::filesystem::path& path) {
  try {
    return RunManifest::from_json(io::Json::parse(io::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace streamrag::cli
