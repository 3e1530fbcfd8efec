#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "detox/backends/generative_model.hpp"
#include "detox/decode.hpp"
#include "detox/sft.hpp"

namespace detox::orpo {

struct PreferencePair {
    std::string id;
    std::string prompt;
    std::string chosen;
    std::string rejected;
    Language lang = Language::en;
    double chosen_relevance = 0.0;
    double rejected_relevance = 0.0;

    friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

enum class Pairing : std::uint8_t { best_vs_all, best_vs_worst };

std::string_view pairing_name(Pairing p);
Pairing parse_pairing(std::string_view name);

struct OrpoConfig {
    double beta = 0.1;
    Pairing pairing = Pairing::best_vs_all;
    double epsilon = 1e-7;
    sft::TrainConfig train;

    void validate() const;
};

struct OrpoLoss {
    double loss = 0.0;
    double sft_term = 0.0;
    double or_term = 0.0;
    /// log odds(p_chosen) - log odds(p_rejected)
    double log_odds_ratio = 0.0;
    /// Partial derivatives of or_term (and so of loss / beta) w.r.t. the
    /// average log-likelihood inputs; zero where clamping is active.
    double d_or_d_chosen = 0.0;
    double d_or_d_rejected = 0.0;
};

/// loss = nll_chosen + beta * -log sigmoid(log odds(p_c) - log odds(p_r)),
/// with p = clamp(exp(logp), eps, 1 - eps) and odds(p) = p / (1 - p).
OrpoLoss orpo_loss(double logp_chosen, double logp_rejected, double nll_chosen, double beta, double epsilon = 1e-7);

/// Chosen is select_best of each set; rejected are the other candidates with
/// distinct text (best_vs_all) or the lowest-relevance one (best_vs_worst).
std::vector<PreferencePair> build_preference_set(std::span<const decode::CandidateSet> sets, const OrpoConfig& cfg);

/// Mean over pairs of (avg log-lik of chosen - avg log-lik of rejected).
double mean_margin(const backends::GenerativeModel& model, std::span<const PreferencePair> prefs);

/// Preference alignment with the shared training loop. Validation loss is
/// the mean ORPO loss over `val`, or over the training pairs when `val` is
/// empty.
sft::TrainReport train_orpo(backends::GenerativeModel& model, std::span<const PreferencePair> prefs,
                            const OrpoConfig& cfg, std::span<const PreferencePair> val = {},
                            const sft::CheckpointFn& on_epoch = {});

std::string preference_to_json_line(const PreferencePair& p);
void write_preferences(std::span<const PreferencePair> prefs, const std::filesystem::path& path);
std::vector<PreferencePair> read_preferences(const std::filesystem::path& path);

}  // namespace detox::orpo
