#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detox/backends/generative_model.hpp"
#include "detox/corpus.hpp"

namespace detox::sft {

inline constexpr const char* kDefaultPrefix = "Detoxify: ";

/// Per-language prompt prefix. Every language has a non-empty entry.
class PrefixTable {
public:
    explicit PrefixTable(std::string default_prefix = kDefaultPrefix);

    void set(Language lang, std::string prefix);
    const std::string& operator[](Language lang) const { return prefixes_[language_index(lang)]; }

private:
    PerLanguage<std::string> prefixes_;
};

/// prefix + toxic with exactly one space at the seam. Not idempotent.
std::string build_prompt(Language lang, std::string_view toxic, const PrefixTable& table);
/// Inverse of build_prompt; nullopt when the prompt does not carry the prefix.
std::optional<std::string> strip_prefix(Language lang, std::string_view prompt, const PrefixTable& table);

struct Example {
    std::string prompt;
    std::string target;
};

std::vector<Example> make_examples(const corpus::Dataset& ds, const PrefixTable& table);

enum class Schedule : std::uint8_t { cosine, constant };

struct TrainConfig {
    double learning_rate = 1e-5;
    std::size_t global_batch_size = 8;
    /// Micro-batch size; gradients are accumulated up to the global batch.
    std::size_t device_batch_size = 8;
    double weight_decay = 0.01;
    Schedule schedule = Schedule::cosine;
    std::size_t epochs = 4;
    std::uint64_t seed = 0;
    std::optional<backends::AdapterConfig> adapter;
    std::string run_id = "run";

    void validate() const;
};

struct EpochRow {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    /// Mean (chosen - rejected) average log-likelihood; preference runs only.
    std::optional<double> margin;
};

struct TrainReport {
    std::optional<double> initial_val_loss;
    std::optional<double> initial_margin;
    std::vector<EpochRow> epochs;
    std::vector<double> step_losses;
    std::size_t total_steps = 0;
    std::size_t selected_epoch = 0;  // 0 when no epoch ran
    std::string selected_checkpoint;
    double wall_time_s = 0.0;
};

std::string checkpoint_tag(const std::string& run_id, std::size_t epoch);

/// base_lr * 0.5 * (1 + cos(pi * step / total_steps)), no warmup.
double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr);

using CheckpointFn = std::function<void(std::size_t epoch, const backends::GenerativeModel&)>;

/// Runs epochs x ceil(N / global_batch) AdamW steps. Validation loss is the
/// mean per-example token NLL, evaluated after every epoch; on return the
/// model holds the weights of the epoch with the lowest validation loss.
TrainReport train_sft(backends::GenerativeModel& model, std::span<const Example> train,
                      std::span<const Example> val, const TrainConfig& cfg, const CheckpointFn& on_epoch = {});

/// Mean per-example token NLL (eval mode).
double mean_nll(const backends::GenerativeModel& model, std::span<const backends::WeightedSequence> seqs);
std::vector<backends::WeightedSequence> tokenize_examples(const backends::GenerativeModel& model,
                                                          std::span<const Example> examples);

/// CSV: epoch,train_loss,val_loss (plus margin when present).
void write_report_csv(const TrainReport& report, const std::filesystem::path& path);
/// JSON summary; wall time is left out so reruns are byte-identical.
void write_report_json(const TrainReport& report, const std::filesystem::path& path);

}  // namespace detox::sft
