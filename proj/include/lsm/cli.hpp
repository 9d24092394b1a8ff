#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lsm/inference.hpp"
#include "lsm/model.hpp"

namespace lsm::cli {

inline constexpr const char* kToolVersion = "0.1.0";

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

struct FileDigest {
  std::string path;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

FileDigest digest(const std::filesystem::path& path, const std::filesystem::path& relative_to = {});

struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string command;
  std::vector<std::string> arguments;
  std::vector<FileDigest> inputs;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string started_at;   // UTC, RFC 3339
  std::string finished_at;
  std::vector<FileDigest> outputs;  // relative to the output directory
};

nlohmann::json to_json(const RunManifest& m);

// Every regular file under `dir` (recursively), sorted by relative path, except
// manifest.json itself.
std::vector<FileDigest> digest_outputs(const std::filesystem::path& dir);

// Creates `dir`. An existing non-empty directory is an error unless `force`,
// in which case it is emptied first.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

struct FitSettings {
  ModelConfig model;
  McmcConfig mcmc;
};

// {"model": {...}, "mcmc": {...}}; both sections optional. Problems from every
// section are appended to `problems`.
FitSettings fit_settings_from_json(const nlohmann::json& j, std::vector<std::string>& problems);
nlohmann::json to_json(const FitSettings& s);

// Entry point of the `lsm` tool. Returns the process exit code: 0 on success,
// 1 on runtime failures, 2 on usage or validation errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lsm::cli
