#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "detox/backends/generative_model.hpp"

namespace detox::backends {

struct NgramModelOptions {
    /// Prompt positions t .. t+window-1 feed the prediction at output step t.
    std::size_t window = 3;
    double init_scale = 0.0;
    std::uint64_t seed = 0;
};

/// Desk-scale trainable seq2seq model.
///
/// The next-token logits at output position t are a sum of learned rows:
///
///   logits = bias + W_prev[y_{t-1}] + sum_k W_k[x_{t+k}],  k = 0..window-1
///
/// where y is the completion so far (<bos> before the first token) and x is
/// the prompt, padded with <pad> past its end. The aligned-window features let
/// the model learn copy and substitution tasks where the completion tracks the
/// prompt position by position after a short prefix; being a softmax
/// regression, the training objective is convex in the full-weight mode.
///
/// In adapter mode every table W gets a frozen base plus a scaled low-rank
/// update (alpha/rank) * A B, with inverted dropout on the adapter branch.
class NgramToyModel final : public GenerativeModel {
public:
    NgramToyModel(Vocabulary vocab, NgramModelOptions opts = {});

    static std::unique_ptr<NgramToyModel> load(const std::filesystem::path& path);

    std::string kind() const override { return "ngram"; }
    std::size_t vocab_size() const override { return vocab_.size(); }
    TokenId eos_token() const override { return Vocabulary::kEos; }
    const Vocabulary& vocabulary() const { return vocab_; }
    const NgramModelOptions& options() const { return opts_; }

    std::vector<double> next_logprobs(std::span<const TokenId> prompt,
                                      std::span<const TokenId> prefix) const override;
    SequenceScore sequence_logprob(std::span<const TokenId> prompt,
                                   std::span<const TokenId> completion) const override;

    double accumulate_gradient(std::span<const WeightedSequence> batch) override;
    void apply_gradients(const OptimizerStep& step) override;
    void zero_gradients() override;

    void set_training(bool on) override { training_ = on; }
    std::size_t trainable_parameter_count() const override;
    std::size_t parameter_count() const override;
    void enable_adapter(const AdapterConfig& cfg, std::uint64_t seed) override;
    bool has_adapter() const override { return adapter_.has_value(); }

    std::vector<TokenId> tokenize(std::string_view text) const override { return vocab_.encode(text); }
    std::string detokenize(std::span<const TokenId> tokens) const override { return vocab_.decode(tokens); }

    std::unique_ptr<GenerativeModel> clone() const override;
    void assign(const GenerativeModel& other) override;
    void save(const std::filesystem::path& path) const override;

    /// Direct access for tests that construct peaked or adversarial models.
    double& weight(std::size_t table, TokenId feature, TokenId next);
    double& bias(TokenId next) { return bias_[next]; }
    /// Accumulated full-weight gradients (not meaningful in adapter mode).
    double gradient(std::size_t table, TokenId feature, TokenId next) const;
    double bias_gradient(TokenId next) const { return grad_bias_.at(next); }
    std::size_t table_count() const { return tables_.size(); }

private:
    struct Adapter {
        AdapterConfig cfg;
        std::vector<std::vector<double>> a;  // per table, V x r
        std::vector<std::vector<double>> b;  // per table, r x V
        std::vector<std::vector<double>> grad_a;
        std::vector<std::vector<double>> grad_b;
        std::vector<std::vector<double>> m_a, v_a, m_b, v_b;
        std::mt19937_64 rng;
    };

    std::size_t v() const { return vocab_.size(); }
    void features(std::span<const TokenId> prompt, std::span<const TokenId> prefix, std::size_t t,
                  std::vector<TokenId>& out) const;
    void logits(const std::vector<TokenId>& feats, const std::vector<double>* adapter_mask,
                std::vector<double>& out) const;

    Vocabulary vocab_;
    NgramModelOptions opts_;
    std::vector<std::vector<double>> tables_;  // (1 + window) tables, V x V
    std::vector<double> bias_;
    std::vector<std::vector<double>> grad_tables_;
    std::vector<double> grad_bias_;
    std::vector<std::vector<double>> m_tables_, v_tables_;
    std::vector<double> m_bias_, v_bias_;
    std::uint64_t adam_steps_ = 0;
    std::optional<Adapter> adapter_;
    bool training_ = false;
};

}  // namespace detox::backends
