#include "detox/sft.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "detox/error.hpp"
#include "detox/text.hpp"
#include "detox/training.hpp"
#include "json.hpp"

namespace detox::sft {

PrefixTable::PrefixTable(std::string default_prefix) {
    if (text::trim(default_prefix).empty()) throw ConfigError("prompt prefix must be non-empty");
    prefixes_.fill(default_prefix);
}

void PrefixTable::set(Language lang, std::string prefix) {
    if (text::trim(prefix).empty()) {
        throw ConfigError("prompt prefix for '" + std::string(language_code(lang)) + "' must be non-empty");
    }
    prefixes_[language_index(lang)] = std::move(prefix);
}

std::string build_prompt(Language lang, std::string_view toxic, const PrefixTable& table) {
    std::string out(text::trim(table[lang]));
    out += ' ';
    out += text::trim(toxic);
    return out;
}

std::optional<std::string> strip_prefix(Language lang, std::string_view prompt, const PrefixTable& table) {
    const std::string_view prefix = text::trim(table[lang]);
    if (prompt.substr(0, prefix.size()) != prefix) return std::nullopt;
    prompt.remove_prefix(prefix.size());
    if (prompt.empty() || prompt.front() != ' ') return std::nullopt;
    prompt.remove_prefix(1);
    return std::string(prompt);
}

std::vector<Example> make_examples(const corpus::Dataset& ds, const PrefixTable& table) {
    std::vector<Example> out;
    out.reserve(ds.size());
    for (const auto& p : ds) out.push_back({build_prompt(p.lang, p.toxic, table), p.neutral});
    return out;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (global_batch_size == 0 || device_batch_size == 0) throw ConfigError("batch sizes must be positive");
    if (device_batch_size > global_batch_size) throw ConfigError("device_batch_size exceeds global_batch_size");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
    if (adapter && (adapter->rank == 0 || !(adapter->alpha > 0.0))) {
        throw ConfigError("adapter rank and alpha must be positive");
    }
    if (adapter && !(adapter->dropout >= 0.0 && adapter->dropout < 1.0)) {
        throw ConfigError("adapter dropout must lie in [0, 1)");
    }
}

std::string checkpoint_tag(const std::string& run_id, std::size_t epoch) {
    return run_id + "/epoch-" + std::to_string(epoch);
}

double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr) {
    if (total_steps == 0) throw ConfigError("cosine schedule needs total_steps > 0");
    if (step >= total_steps) return 0.0;
    if (step == 0) return base_lr;
    const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
    return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::vector<backends::WeightedSequence> tokenize_examples(const backends::GenerativeModel& model,
                                                          std::span<const Example> examples) {
    std::vector<backends::WeightedSequence> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) out.push_back({model.tokenize(ex.prompt), model.tokenize(ex.target), 1.0});
    return out;
}

double mean_nll(const backends::GenerativeModel& model, std::span<const backends::WeightedSequence> seqs) {
    if (seqs.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& s : seqs) sum -= model.sequence_logprob(s.prompt, s.completion).average();
    return sum / static_cast<double>(seqs.size());
}

TrainReport train_sft(backends::GenerativeModel& model, std::span<const Example> train, std::span<const Example> val,
                      const TrainConfig& cfg, const CheckpointFn& on_epoch) {
    if (train.empty()) throw TrainingError("SFT training set is empty");
    if (val.empty()) throw TrainingError("SFT validation set is empty");
    if (cfg.adapter && !model.has_adapter()) {
        model.enable_adapter(*cfg.adapter, cfg.seed);
    }
    const auto train_seqs = tokenize_examples(model, train);
    const auto val_seqs = tokenize_examples(model, val);

    training::LoopHooks hooks;
    std::vector<backends::WeightedSequence> micro;
    hooks.accumulate = [&](std::span<const std::size_t> members, std::size_t batch_size) {
        micro.clear();
        for (std::size_t i : members) {
            micro.push_back(train_seqs[i]);
            micro.back().weight = 1.0 / static_cast<double>(batch_size);
        }
        return model.accumulate_gradient(micro);
    };
    hooks.validate = [&] { return mean_nll(model, val_seqs); };
    hooks.describe = [&](std::size_t i) { return "#" + std::to_string(i) + " '" + train[i].prompt + "'"; };
    return training::run_loop(model, train_seqs.size(), cfg, hooks, on_epoch);
}

void write_report_csv(const TrainReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    const bool with_margin = !report.epochs.empty() && report.epochs.front().margin.has_value();
    out << "epoch,train_loss,val_loss" << (with_margin ? ",margin" : "") << '\n';
    char buf[160];
    for (const auto& row : report.epochs) {
        std::snprintf(buf, sizeof buf, "%zu,%.9f,%.9f", row.epoch, row.train_loss, row.val_loss);
        out << buf;
        if (with_margin) {
            std::snprintf(buf, sizeof buf, ",%.9f", row.margin.value_or(0.0));
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

void write_report_json(const TrainReport& report, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["initial_val_loss"] = report.initial_val_loss ? nlohmann::ordered_json(*report.initial_val_loss) : nullptr;
    if (report.initial_margin) j["initial_margin"] = *report.initial_margin;
    j["total_steps"] = report.total_steps;
    j["selected_epoch"] = report.selected_epoch;
    j["selected_checkpoint"] = report.selected_checkpoint;
    j["epochs"] = nlohmann::ordered_json::array();
    for (const auto& row : report.epochs) {
        nlohmann::ordered_json r = {{"epoch", row.epoch}, {"train_loss", row.train_loss}, {"val_loss", row.val_loss}};
        if (row.margin) r["margin"] = *row.margin;
        j["epochs"].push_back(r);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace detox::sft
