#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>

#include "detox/backends/generative_model.hpp"
#include "detox/backends/scorers.hpp"
#include "detox/backends/translator.hpp"
#include "json.hpp"

namespace detox::backends {

/// Builders for the config tables {"kind": ..., "params": {...}}.
/// Unknown kinds or parameter keys raise ConfigError.
std::unique_ptr<ToxicityScorer> make_toxicity_scorer(const nlohmann::json& selection);
std::unique_ptr<SimilarityScorer> make_similarity_scorer(const nlohmann::json& selection);
std::unique_ptr<Translator> make_translator(const nlohmann::json& selection, std::uint64_t seed);

/// Creates an untrained model whose vocabulary covers `corpus`.
std::unique_ptr<GenerativeModel> make_model(const nlohmann::json& selection, std::span<const std::string> corpus,
                                            std::uint64_t seed);
std::unique_ptr<GenerativeModel> load_model(const std::filesystem::path& path);

/// Default parameter tables, used to expand configs.
nlohmann::json default_toxicity_selection();
nlohmann::json default_similarity_selection();
nlohmann::json default_translator_selection();
nlohmann::json default_model_selection();

}  // namespace detox::backends
