#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace txembed {

inline constexpr const char* kToolVersion = "0.1.0";

std::string sha256_hex(std::string_view bytes);
/// Throws Error when the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

struct InputDigest {
    std::string path;
    std::string sha256;
    std::uintmax_t bytes = 0;
};

/// Provenance record written next to every command's outputs.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    std::string tool_version = kToolVersion;
    std::optional<std::uint64_t> seed;
    std::string config_json;  // effective configuration after flag overrides
    std::vector<InputDigest> inputs;
    std::vector<std::string> outputs;
    std::string started_at;  // UTC, ISO 8601
    std::string finished_at;

    /// Digests `path` (a file, or every regular file below a directory).
    void add_input(const std::filesystem::path& path);
    std::string config_sha256() const { return sha256_hex(config_json); }
    std::string to_json() const;
};

std::string utc_timestamp();

/// Writes `dir`/manifest.json.
void write_manifest(const RunManifest& manifest, const std::filesystem::path& dir);

}  // namespace txembed
