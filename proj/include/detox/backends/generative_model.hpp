#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detox/backends/vocabulary.hpp"

namespace detox::backends {

struct SequenceScore {
    double total = 0.0;
    /// One entry per completion token plus the closing end-of-sequence token.
    std::vector<double> per_token;

    double average() const { return per_token.empty() ? 0.0 : total / static_cast<double>(per_token.size()); }
};

/// One term of a training objective: -weight * mean per-token log-prob of
/// `completion` (closed by EOS) given `prompt`.
struct WeightedSequence {
    std::vector<TokenId> prompt;
    std::vector<TokenId> completion;
    double weight = 1.0;
};

/// AdamW step parameters; weight decay is decoupled and skips biases.
struct OptimizerStep {
    double learning_rate = 1e-5;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdapterConfig {
    std::size_t rank = 32;
    double alpha = 32.0;
    double dropout = 0.1;
};

/// Conditional sequence model: scores completions given a prompt.
///
/// The objective interface is deliberately narrow: a trainer expresses every
/// loss it needs (token NLL, odds-ratio terms) as a weighted sum of mean
/// sequence log-likelihoods, accumulates its gradient over micro-batches and
/// then applies one optimizer step.
class GenerativeModel {
public:
    virtual ~GenerativeModel() = default;

    virtual std::string kind() const = 0;
    virtual std::size_t vocab_size() const = 0;
    virtual TokenId eos_token() const = 0;

    /// Log-probabilities of the next completion token; log-sum-exp is 0.
    virtual std::vector<double> next_logprobs(std::span<const TokenId> prompt,
                                              std::span<const TokenId> prefix) const = 0;
    /// Scores `completion` followed by EOS.
    virtual SequenceScore sequence_logprob(std::span<const TokenId> prompt,
                                           std::span<const TokenId> completion) const = 0;

    /// Adds the gradient of sum_i -w_i * mean_logp_i to the internal buffer and
    /// returns that objective value at the current parameters.
    virtual double accumulate_gradient(std::span<const WeightedSequence> batch) = 0;
    virtual void apply_gradients(const OptimizerStep& step) = 0;
    virtual void zero_gradients() = 0;

    /// Training mode enables stochastic regularization (adapter dropout).
    virtual void set_training(bool on) = 0;
    virtual std::size_t trainable_parameter_count() const = 0;
    virtual std::size_t parameter_count() const = 0;
    /// Freezes the base weights and trains injected low-rank factors only.
    virtual void enable_adapter(const AdapterConfig& cfg, std::uint64_t seed) = 0;
    virtual bool has_adapter() const = 0;

    virtual std::vector<TokenId> tokenize(std::string_view text) const = 0;
    virtual std::string detokenize(std::span<const TokenId> tokens) const = 0;

    virtual std::unique_ptr<GenerativeModel> clone() const = 0;
    /// Replaces this model's state with `other`'s; kinds must match.
    virtual void assign(const GenerativeModel& other) = 0;
    virtual void save(const std::filesystem::path& path) const = 0;

    /// Convenience: one optimizer step on the mean token NLL of the batch.
    double train_step(std::span<const WeightedSequence> batch, const OptimizerStep& step);
};

}  // namespace detox::backends
