#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "detox/backends/scorers.hpp"
#include "detox/backends/translator.hpp"
#include "detox/corpus.hpp"

namespace detox::augment {

enum class SimilaritySides : std::uint8_t { both, toxic_only, neutral_only };

std::string_view similarity_sides_name(SimilaritySides s);
SimilaritySides parse_similarity_sides(std::string_view name);

/// Polarity and meaning-preservation thresholds. All comparisons are
/// inclusive: tox_toxic >= toxic_min, tox_neutral <= neutral_max,
/// sim >= sim_min.
struct FilterThresholds {
    double toxic_min = 0.9;
    double neutral_max = 0.1;
    double sim_min = 0.8;
    SimilaritySides sides = SimilaritySides::both;

    void validate() const;
};

enum class RejectReason : std::uint8_t {
    toxic_side_not_toxic,
    neutral_side_not_neutral,
    toxic_side_dissimilar,
    neutral_side_dissimilar,
};

std::string_view reason_name(RejectReason r);

struct PairScores {
    double tox_toxic = 0.0;
    double tox_neutral = 0.0;
    double sim_toxic = 0.0;
    double sim_neutral = 0.0;

    friend bool operator==(const PairScores&, const PairScores&) = default;
};

struct FilterVerdict {
    std::string pair_id;
    bool keep = false;
    std::vector<RejectReason> reasons;
    PairScores scores;
};

using TranslatedCorpus = std::map<Language, corpus::Dataset>;

/// Translates both sides of every English pair into each target. Ids become
/// "<id>.<lang>" and the source becomes `translated`.
TranslatedCorpus translate_corpus(const corpus::Dataset& english, std::span<const Language> targets,
                                  backends::Translator& translator, std::size_t batch_size = backends::kDefaultBatchSize);

PairScores score_pair(const corpus::ParallelPair& original, const corpus::ParallelPair& translated,
                      const backends::ToxicityScorer& tox, const backends::SimilarityScorer& sim);

/// Batched equivalent of calling score_pair for every aligned index.
std::vector<PairScores> score_pairs(const corpus::Dataset& originals, const corpus::Dataset& translated,
                                    const backends::ToxicityScorer& tox, const backends::SimilarityScorer& sim,
                                    const backends::BatchOptions& opts = {});

FilterVerdict apply_filter(const PairScores& scores, const FilterThresholds& th, std::string pair_id = {});

inline constexpr std::size_t kHistogramBins = 20;

struct Histogram {
    double lo = 0.0;
    double hi = 1.0;
    std::array<std::size_t, kHistogramBins> counts{};

    void add(double x);
    double bin_left(std::size_t i) const;
    double bin_right(std::size_t i) const;
    std::size_t total() const;
};

/// Score distributions over every scored pair. Toxicity families span
/// [0, 1], similarity spans [-1, 1]; the top edge falls in the last bin.
struct ScoreHistogram {
    Histogram tox_toxic{0.0, 1.0, {}};
    Histogram tox_neutral{0.0, 1.0, {}};
    Histogram sim_toxic{-1.0, 1.0, {}};
    Histogram sim_neutral{-1.0, 1.0, {}};
    std::size_t scored_pairs = 0;

    void add(const PairScores& s);
};

struct FilterResult {
    TranslatedCorpus kept;
    std::vector<FilterVerdict> verdicts;
    PerLanguage<std::size_t> stats{};
    ScoreHistogram hist;
};

FilterResult filter_corpus(const corpus::Dataset& originals, const TranslatedCorpus& translated,
                           const backends::ToxicityScorer& tox, const backends::SimilarityScorer& sim,
                           const FilterThresholds& th, const backends::BatchOptions& opts = {});

std::string verdict_to_json_line(const FilterVerdict& v);
void write_verdicts(std::span<const FilterVerdict> verdicts, const std::filesystem::path& path);
/// CSV header: family,bin_left,bin_right,count
void write_histogram_csv(const ScoreHistogram& hist, const std::filesystem::path& path);

}  // namespace detox::augment
