#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "detox/augment.hpp"
#include "detox/backends/scorers.hpp"
#include "detox/decode.hpp"
#include "detox/orpo.hpp"
#include "detox/sft.hpp"
#include "json.hpp"

namespace detox::pipeline {

struct PathsConfig {
    std::optional<std::filesystem::path> run_dir;
    std::optional<std::filesystem::path> en_pairs;
    std::optional<std::filesystem::path> ru_pairs;
    std::optional<std::filesystem::path> multilingual_pairs;
    std::optional<std::filesystem::path> orpo_prompts;
    std::optional<std::filesystem::path> eval_pairs;
};

/// Where a mixture entry's pairs come from: "paths.<key>", "stage:filter",
/// or a file path.
struct MixturePart {
    std::string name;
    std::string from;
    std::optional<std::size_t> expected;
};

struct BackendsConfig {
    backends::BatchOptions batch;
    nlohmann::json toxicity;
    nlohmann::json similarity;
    nlohmann::json translator;
    nlohmann::json model;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    /// Directory of the config file; relative paths resolve against it.
    std::filesystem::path base_dir;
    PathsConfig paths;
    BackendsConfig backends;
    std::vector<Language> targets;
    augment::FilterThresholds filter;
    sft::PrefixTable prefixes;
    std::vector<MixturePart> mixture;
    double val_fraction = corpus::kDefaultValFraction;
    sft::TrainConfig train;
    orpo::OrpoConfig orpo;
    decode::DecodeParams decode;

    /// The merged configuration with every default spelled out.
    nlohmann::ordered_json resolved;
};

/// Every key with its default value.
nlohmann::ordered_json default_config();

/// Overlays `user` on the defaults. Unknown keys raise ConfigError; relative
/// paths resolve against `base_dir`.
PipelineConfig parse_config(const nlohmann::json& user, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

/// root seed + FNV-1a(stage name), modulo 2^64.
std::uint64_t derive_stage_seed(std::uint64_t root, std::string_view stage);

}  // namespace detox::pipeline
