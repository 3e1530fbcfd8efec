#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "detox/backends/scorers.hpp"

namespace detox::backends {

double logistic(double x);

/// logistic(bias + sum of lexicon weights over matched words (+ optional
/// per-text hash jitter)). Words are whitespace tokens, ASCII-lowercased,
/// with surrounding ASCII punctuation stripped. Each occurrence counts.
double hash_toxicity(const std::string& text, Language lang, const std::map<std::string, double>& lexicon,
                     double bias = 0.0, double jitter = 0.0);

class HashToxicityScorer final : public ToxicityScorer {
public:
    HashToxicityScorer(std::map<std::string, double> lexicon, double bias = 0.0, double jitter = 0.0)
        : lexicon_(std::move(lexicon)), bias_(bias), jitter_(jitter) {}

    std::vector<double> score_batch(std::span<const std::string> texts, Language lang) const override;
    std::string name() const override { return "hash"; }

private:
    std::map<std::string, double> lexicon_;
    double bias_;
    double jitter_;
};

/// Cosine of signed feature-hashed bags of words and character trigrams.
/// Not cross-lingual; stands in for a sentence embedder in tests.
class HashEmbeddingSimilarity final : public SimilarityScorer {
public:
    explicit HashEmbeddingSimilarity(std::size_t dim = 256) : dim_(dim) {}

    std::vector<double> similarity_batch(std::span<const std::string> a,
                                         std::span<const std::string> b) const override;
    std::string name() const override { return "hash_embedding"; }

    double similarity(const std::string& a, const std::string& b) const;

private:
    std::size_t dim_;
};

}  // namespace detox::backends
