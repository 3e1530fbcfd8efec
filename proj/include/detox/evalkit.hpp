#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "detox/backends/scorers.hpp"
#include "detox/language.hpp"

namespace detox::evalkit {

/// Character n-gram F-beta (whitespace ignored), averaged uniformly over the
/// orders 1..max_n for which both sides have n-grams; 0 when there are none.
double chrf(std::string_view hypothesis, std::string_view reference, std::size_t max_n = 6, double beta = 2.0);

struct EvalRecord {
    std::string id;
    Language lang = Language::en;
    std::string source_toxic;
    std::string output;
    std::optional<std::string> reference;
};

struct LanguageScores {
    std::size_t count = 0;
    double sta = 0.0;
    double sim = 0.0;
    double flu = 0.0;
    double joint = 0.0;
    std::size_t empty_outputs = 0;
    std::size_t missing_references = 0;
};

/// Approximate Joint score: per sample STA = 1 - P(toxic), SIM = clamped
/// cosine to the source, FLU = chrF against the reference (1 without one),
/// J = STA * SIM * FLU. Not the official competition metric.
struct JointReport {
    PerLanguage<std::optional<LanguageScores>> languages;
    double avg_joint = 0.0;
    std::size_t languages_present = 0;
};

inline constexpr const char* kApproximateBanner =
    "approximate-J: continuous STA, chrF fluency proxy; not comparable with official leaderboard values";

JointReport joint_score(std::span<const EvalRecord> records, const backends::ToxicityScorer& tox,
                        const backends::SimilarityScorer& sim, const backends::BatchOptions& opts = {});

/// Builds a report from per-language J values only (for fixtures).
JointReport report_from_joint(const PerLanguage<std::optional<double>>& joint_by_language);

/// Markdown table: one row per system, the nine languages in column order
/// am..zh plus Avg J, sorted by Avg J descending (stable), 3 decimals.
std::string render_leaderboard(std::span<const std::pair<std::string, JointReport>> reports);

std::string report_to_json(const JointReport& report, const std::string& system);
std::pair<std::string, JointReport> report_from_json(std::string_view json);

}  // namespace detox::evalkit
