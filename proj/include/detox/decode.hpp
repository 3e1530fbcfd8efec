#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detox/backends/generative_model.hpp"
#include "detox/backends/scorers.hpp"
#include "detox/language.hpp"
#include "detox/sft.hpp"

namespace detox::decode {

using backends::TokenId;

enum class LengthNorm : std::uint8_t { none, by_length };

std::string_view length_norm_name(LengthNorm n);
LengthNorm parse_length_norm(std::string_view name);

struct DecodeParams {
    std::size_t num_beams = 10;
    std::size_t num_groups = 5;
    double diversity_penalty = 2.5;
    double repetition_penalty = 1.2;
    std::size_t max_new_tokens = 64;
    std::size_t shortlist_k = 5;
    LengthNorm length_norm = LengthNorm::by_length;

    void validate() const;
};

/// A finished or truncated hypothesis.
struct Beam {
    std::vector<TokenId> tokens;  // EOS excluded
    /// Search score: sum of penalized log-probs, the quantity beams compete on.
    double score = 0.0;
    /// Unpenalized model log-probability of tokens (+ EOS when finished).
    double logprob = 0.0;
    bool finished = false;
    bool truncated = false;
    std::size_t group = 0;
};

/// Diverse beam search.
///
/// Beams are split into num_groups groups of num_beams / num_groups. Every
/// step visits the groups in order; for a running beam the score of token v
/// is
///
///   log p(v | beam) - [v already emitted by the beam] * log(repetition_penalty)
///                   - diversity_penalty * (times v was emitted this step by
///                     running beams of earlier groups)
///
/// and each group keeps its top candidates among all expansions plus its
/// already-finished beams (which are carried unchanged and no longer count
/// towards diversity). Ties break toward earlier beam, then lower token id.
/// A group stops once all its beams are finished; beams still running after
/// max_new_tokens are returned with truncated = true. Output lists groups in
/// order, each group best-first.
std::vector<Beam> diverse_beam_search(const backends::GenerativeModel& model, std::span<const TokenId> prompt,
                                      const DecodeParams& params);

struct Candidate {
    std::string text;
    std::vector<TokenId> tokens;
    double logprob_total = 0.0;
    double logprob_norm = 0.0;
    std::size_t beam_index = 0;
    bool truncated = false;
    bool scored = false;
    double sim = 0.0;
    double neutrality = 0.0;
    double relevance = 0.0;
};

/// max(sim, 0) * neutrality.
double relevance(double sim, double neutrality);

/// Top-k beams by (optionally length-normalized) model log-probability;
/// equal scores keep beam order. Text is left empty.
std::vector<Candidate> shortlist(std::span<const Beam> beams, std::size_t k, LengthNorm norm);

struct CandidateSet {
    std::string id;
    std::string prompt;
    std::string source_toxic;
    Language lang = Language::en;
    std::vector<Candidate> candidates;
};

/// Fills sim = similarity(source_toxic, text), neutrality = 1 - toxicity and
/// relevance, then stable-sorts by relevance, highest first.
void score_candidates(CandidateSet& cset, const backends::ToxicityScorer& tox, const backends::SimilarityScorer& sim,
                      const backends::BatchOptions& opts = {});

/// Index of the best candidate: highest relevance, then higher
/// logprob_norm, then lower index.
std::size_t select_best_index(const CandidateSet& cset);
const Candidate& select_best(const CandidateSet& cset);

struct DetoxInput {
    std::string id;
    Language lang = Language::en;
    std::string toxic;
};

struct DetoxOutput {
    std::size_t input_index = 0;
    CandidateSet cset;
    Candidate best;
};

struct ItemError {
    std::size_t input_index = 0;
    std::string id;
    std::string message;
};

struct DetoxBatchResult {
    std::vector<DetoxOutput> outputs;
    std::vector<ItemError> errors;
};

/// Prompt, decode, shortlist, score and select for every input. Failing
/// items are reported in `errors` and skipped.
DetoxBatchResult detoxify_batch(const backends::GenerativeModel& model, std::span<const DetoxInput> inputs,
                                const DecodeParams& params, const backends::ToxicityScorer& tox,
                                const backends::SimilarityScorer& sim, const sft::PrefixTable& prefixes,
                                const backends::BatchOptions& opts = {});

/// Prompt, decode and shortlist without scoring.
CandidateSet generate_candidates(const backends::GenerativeModel& model, const DetoxInput& input,
                                 const DecodeParams& params, const sft::PrefixTable& prefixes);

std::string candidate_set_to_json_line(const CandidateSet& cset);
CandidateSet candidate_set_from_json_line(std::string_view line, std::size_t line_no);
void write_candidate_sets(std::span<const CandidateSet> sets, const std::filesystem::path& path);
std::vector<CandidateSet> read_candidate_sets(const std::filesystem::path& path);

}  // namespace detox::decode
