#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace detox::pipeline {

inline constexpr const char* kToolVersion = "0.1.0";

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Exclusive lock on a run directory, held for the lifetime of the object.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& run_dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path path_;
};

/// Per-stage provenance written into <run>/manifest.json.
struct StageRecord {
    std::string stage;
    std::uint64_t seed = 0;
    std::vector<std::filesystem::path> inputs;
    std::vector<std::filesystem::path> outputs;
    double wall_time_s = 0.0;
};

class RunDir {
public:
    explicit RunDir(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path path(const std::string& rel) const { return root_ / rel; }
    /// Creates <root>/<stage>/ and returns it.
    std::filesystem::path stage_dir(const std::string& stage) const;

    /// Writes config.resolved.json and merges the stage entry into the
    /// manifest. Digests are taken from the files as they are now.
    void record(const StageRecord& rec, const nlohmann::ordered_json& resolved_config) const;

private:
    std::filesystem::path root_;
};

}  // namespace detox::pipeline
