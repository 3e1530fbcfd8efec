#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "detox/language.hpp"

namespace detox::backends {

/// P(toxic) for each text. Implementations must be deterministic and return
/// values in [0, 1].
class ToxicityScorer {
public:
    virtual ~ToxicityScorer() = default;
    virtual std::vector<double> score_batch(std::span<const std::string> texts, Language lang) const = 0;
    /// False when concurrent calls are unsafe; callers then serialize.
    virtual bool thread_safe() const { return true; }
    virtual std::string name() const = 0;
};

/// Cosine similarity of cross-lingual sentence embeddings, in [-1, 1].
/// Contract: |a| == |b|, symmetric, sim(x, x) == 1 within 1e-6.
class SimilarityScorer {
public:
    virtual ~SimilarityScorer() = default;
    virtual std::vector<double> similarity_batch(std::span<const std::string> a,
                                                 std::span<const std::string> b) const = 0;
    virtual bool thread_safe() const { return true; }
    virtual std::string name() const = 0;
};

inline constexpr std::size_t kDefaultBatchSize = 32;

struct BatchOptions {
    std::size_t batch_size = kDefaultBatchSize;
    /// Concurrent batches in flight; 1 runs inline.
    std::size_t workers = 1;
};

/// Chunked scoring. Results are in input order and identical to a single
/// whole-input call for conformant (deterministic, item-wise) scorers.
std::vector<double> score_toxicity(const ToxicityScorer& scorer, std::span<const std::string> texts,
                                   Language lang, const BatchOptions& opts = {});
std::vector<double> score_similarity(const SimilarityScorer& scorer, std::span<const std::string> a,
                                     std::span<const std::string> b, const BatchOptions& opts = {});

}  // namespace detox::backends
