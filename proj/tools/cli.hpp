#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "streamrag/config.hpp"

namespace streamrag::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kInternalError = 3,
  /// `rerun` produced outputs whose digests differ from the manifest.
  kNotReproduced = 4,
};

/// Output table formats to write.
enum class Format { json, csv, all };

/// Session settings given on the command line; unset fields fall back to the
/// config file, then to per-strategy defaults.
struct ConfigOverrides {
  std::optional<Millis> block_ms;
  std::optional<std::int64_t> ref_length_tokens;
  std::optional<std::string> ratio;
  std::optional<int> top_docs;
  std::optional<int> reflect_top_k;
  std::optional<int> context_docs;
  std::optional<int> chunk_tokens;
  std::optional<bool> reflect_set_equality;
  std::optional<double> negative_sample_prob;
  std::optional<std::uint64_t> seed;
  std::optional<Millis> endpoint_delay_ms;
};

/// Defaults for `strategy`, then the config file, then the overrides.
SessionConfig resolve_config(Strategy strategy, const std::optional<std::filesystem::path>& config_file,
                             const ConfigOverrides& overrides);

struct SimulateOptions {
  std::filesystem::path traces;
  std::filesystem::path corpus;
  std::filesystem::path kg;
  std::optional<std::filesystem::path> latency;
  std::optional<std::filesystem::path> config;
  std::vector<std::string> strategies;
  ConfigOverrides overrides;
  int jobs = 1;
  std::filesystem::path out_dir = "out";
  Format format = Format::all;
  std::vector<std::string> argv;
};

struct LabelOptions {
  std::filesystem::path traces;
  std::optional<std::filesystem::path> pseudo_gt;
  std::filesystem::path corpus;
  std::optional<std::filesystem::path> config;
  ConfigOverrides overrides;
  bool print_table = false;
  std::filesystem::path out_dir = "out";
  std::vector<std::string> argv;
};

struct ReportOptions {
  std::filesystem::path baseline;
  std::filesystem::path strategy;
  std::optional<std::filesystem::path> judgments;
  std::string basis = "both";
  std::optional<double> tool_use_base_ms;
  std::filesystem::path out_dir = "out";
  Format format = Format::all;
  std::vector<std::string> argv;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err);
int cmd_label(const LabelOptions& o, std::ostream& out, std::ostream& err);
int cmd_report(const ReportOptions& o, std::ostream& out, std::ostream& err);

/// Reruns the command recorded in a manifest, optionally into another
/// directory, and compares output digests.
int cmd_rerun(const std::filesystem::path& manifest, const std::optional<std::filesystem::path>& out_dir,
              std::ostream& out, std::ostream& err);

/// Parses `args` (without the program name) and dispatches. Never throws;
/// errors are reported on `err` and mapped to ExitCode values.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace streamrag::cli
