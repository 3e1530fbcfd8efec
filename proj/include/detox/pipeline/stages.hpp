#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "detox/error.hpp"
#include "detox/pipeline/config.hpp"
#include "detox/pipeline/run_dir.hpp"

namespace detox::pipeline {

/// A stage input that an earlier stage should have produced.
class MissingArtifactError : public Error {
public:
    MissingArtifactError(std::filesystem::path path, std::string producer);

    const std::filesystem::path& path() const { return path_; }
    const std::string& producer() const { return producer_; }

private:
    std::filesystem::path path_;
    std::string producer_;
};

/// Subcommand-specific flags.
struct StageOptions {
    std::string split = "orpo";   // generate, rerank: orpo | eval
    std::string model = "sft";    // generate, rerank, evaluate: sft | orpo
    std::string system;           // evaluate: leaderboard row name
    std::vector<std::filesystem::path> include_reports;  // report: extra report JSON files
};

struct StageContext {
    const PipelineConfig& config;
    const RunDir& run;
    std::uint64_t seed = 0;
    StageOptions options;
};

/// In pipeline order.
const std::vector<std::string>& stage_names();

/// Runs one stage and returns its provenance record (wall time excluded).
StageRecord run_stage(std::string_view name, const StageContext& ctx);

/// One line of an inference input file: {"id", "lang", "toxic"} plus an
/// optional "neutral" reference; other keys are ignored.
struct InferenceInput {
    std::string id;
    Language lang = Language::en;
    std::string toxic;
    std::optional<std::string> reference;
};
std::vector<InferenceInput> read_inference_inputs(const std::filesystem::path& path);

}  // namespace detox::pipeline
