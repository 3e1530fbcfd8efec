#include "detox/orpo.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "detox/error.hpp"
#include "detox/text.hpp"
#include "detox/training.hpp"
#include "json.hpp"

namespace detox::orpo {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct LogOdds {
    double value;
    double derivative;  // d value / d logp
};

LogOdds log_odds(double logp, double eps) {
    const double p = std::exp(logp);
    if (p <= eps) return {std::log(eps) - std::log1p(-eps), 0.0};
    if (p >= 1.0 - eps) return {std::log1p(-eps) - std::log(eps), 0.0};
    // log p - log(1 - p), with log(1 - p) = log(-expm1(logp)) for accuracy.
    return {logp - std::log(-std::expm1(logp)), 1.0 / (1.0 - p)};
}

struct TokenizedPair {
    std::vector<backends::TokenId> prompt;
    std::vector<backends::TokenId> chosen;
    std::vector<backends::TokenId> rejected;
};

std::vector<TokenizedPair> tokenize(const backends::GenerativeModel& model, std::span<const PreferencePair> prefs) {
    std::vector<TokenizedPair> out;
    out.reserve(prefs.size());
    for (const auto& p : prefs) out.push_back({model.tokenize(p.prompt), model.tokenize(p.chosen), model.tokenize(p.rejected)});
    return out;
}

double mean_loss(const backends::GenerativeModel& model, std::span<const TokenizedPair> pairs, const OrpoConfig& cfg) {
    double sum = 0.0;
    for (const auto& p : pairs) {
        const double lc = model.sequence_logprob(p.prompt, p.chosen).average();
        const double lr = model.sequence_logprob(p.prompt, p.rejected).average();
        sum += orpo_loss(lc, lr, -lc, cfg.beta, cfg.epsilon).loss;
    }
    return sum / static_cast<double>(pairs.size());
}

}  // namespace

std::string_view pairing_name(Pairing p) { return p == Pairing::best_vs_all ? "best_vs_all" : "best_vs_worst"; }

Pairing parse_pairing(std::string_view name) {
    if (name == "best_vs_all") return Pairing::best_vs_all;
    if (name == "best_vs_worst") return Pairing::best_vs_worst;
    throw ConfigError("unknown pairing '" + std::string(name) + "'");
}

void OrpoConfig::validate() const {
    if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw ConfigError("epsilon must lie in (0, 0.5)");
    train.validate();
}

OrpoLoss orpo_loss(double logp_chosen, double logp_rejected, double nll_chosen, double beta, double epsilon) {
    if (!std::isfinite(logp_chosen) || !std::isfinite(logp_rejected) || !std::isfinite(nll_chosen) ||
        !std::isfinite(beta)) {
        throw TrainingError("orpo_loss received a non-finite input");
    }
    if (logp_chosen > 0.0 || logp_rejected > 0.0) throw TrainingError("orpo_loss log-likelihoods must be <= 0");
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw TrainingError("orpo_loss epsilon must lie in (0, 0.5)");

    const LogOdds c = log_odds(logp_chosen, epsilon);
    const LogOdds r = log_odds(logp_rejected, epsilon);
    OrpoLoss out;
    out.log_odds_ratio = c.value - r.value;
    out.or_term = softplus(-out.log_odds_ratio);
    out.sft_term = nll_chosen;
    out.loss = nll_chosen + beta * out.or_term;
    const double d_or_d_ratio = -sigmoid(-out.log_odds_ratio);
    out.d_or_d_chosen = d_or_d_ratio * c.derivative;
    out.d_or_d_rejected = -d_or_d_ratio * r.derivative;
    return out;
}

std::vector<PreferencePair> build_preference_set(std::span<const decode::CandidateSet> sets, const OrpoConfig& cfg) {
    std::vector<PreferencePair> out;
    for (const auto& cset : sets) {
        if (cset.candidates.size() < 2) continue;
        const std::size_t best_idx = decode::select_best_index(cset);
        const auto& best = cset.candidates[best_idx];

        std::vector<std::size_t> rejected;
        std::set<std::string> seen = {best.text};
        for (std::size_t i = 0; i < cset.candidates.size(); ++i) {
            if (seen.insert(cset.candidates[i].text).second) rejected.push_back(i);
        }
        if (rejected.empty()) continue;
        if (cfg.pairing == Pairing::best_vs_worst) {
            std::size_t worst = rejected.front();
            for (std::size_t i : rejected) {
                if (cset.candidates[i].relevance <= cset.candidates[worst].relevance) worst = i;
            }
            rejected = {worst};
        }
        for (std::size_t k = 0; k < rejected.size(); ++k) {
            const auto& rej = cset.candidates[rejected[k]];
            out.push_back({cset.id + "#" + std::to_string(k), cset.prompt, best.text, rej.text, cset.lang,
                           best.relevance, rej.relevance});
        }
    }
    return out;
}

double mean_margin(const backends::GenerativeModel& model, std::span<const PreferencePair> prefs) {
    if (prefs.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& p : tokenize(model, prefs)) {
        sum += model.sequence_logprob(p.prompt, p.chosen).average() - model.sequence_logprob(p.prompt, p.rejected).average();
    }
    return sum / static_cast<double>(prefs.size());
}

sft::TrainReport train_orpo(backends::GenerativeModel& model, std::span<const PreferencePair> prefs,
                            const OrpoConfig& cfg, std::span<const PreferencePair> val,
                            const sft::CheckpointFn& on_epoch) {
    cfg.validate();
    if (prefs.empty()) throw TrainingError("preference set is empty");
    if (cfg.train.adapter && !model.has_adapter()) model.enable_adapter(*cfg.train.adapter, cfg.train.seed);

    const auto pairs = tokenize(model, prefs);
    const auto val_pairs = val.empty() ? pairs : tokenize(model, val);

    training::LoopHooks hooks;
    std::vector<backends::WeightedSequence> micro;
    hooks.accumulate = [&](std::span<const std::size_t> members, std::size_t batch_size) {
        const double inv = 1.0 / static_cast<double>(batch_size);
        micro.clear();
        double loss = 0.0;
        for (std::size_t i : members) {
            const auto& p = pairs[i];
            const double lc = model.sequence_logprob(p.prompt, p.chosen).average();
            const double lr = model.sequence_logprob(p.prompt, p.rejected).average();
            const OrpoLoss l = orpo_loss(lc, lr, -lc, cfg.beta, cfg.epsilon);
            loss += inv * l.loss;
            // d loss / d lc = -1 + beta * d_or_d_chosen; the model minimizes
            // -sum w * mean_logp, so w = -(d loss / d l) / batch.
            micro.push_back({p.prompt, p.chosen, inv * (1.0 - cfg.beta * l.d_or_d_chosen)});
            const double w_rejected = -inv * cfg.beta * l.d_or_d_rejected;
            if (w_rejected != 0.0) micro.push_back({p.prompt, p.rejected, w_rejected});
        }
        model.accumulate_gradient(micro);
        return loss;
    };
    hooks.validate = [&] { return mean_loss(model, val_pairs, cfg); };
    hooks.margin = [&]() -> std::optional<double> { return mean_margin(model, prefs); };
    hooks.describe = [&](std::size_t i) { return prefs[i].id; };
    return training::run_loop(model, pairs.size(), cfg.train, hooks, on_epoch);
}

std::string preference_to_json_line(const PreferencePair& p) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["prompt"] = p.prompt;
    j["chosen"] = p.chosen;
    j["rejected"] = p.rejected;
    j["lang"] = language_code(p.lang);
    j["chosen_relevance"] = p.chosen_relevance;
    j["rejected_relevance"] = p.rejected_relevance;
    return j.dump();
}

void write_preferences(std::span<const PreferencePair> prefs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& p : prefs) out << preference_to_json_line(p) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<PreferencePair> read_preferences(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<PreferencePair> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            PreferencePair p;
            p.id = j.at("id").get<std::string>();
            p.prompt = j.at("prompt").get<std::string>();
            p.chosen = j.at("chosen").get<std::string>();
            p.rejected = j.at("rejected").get<std::string>();
            const auto code = j.at("lang").get<std::string>();
            const auto lang = parse_language(code);
            if (!lang) throw FormatError("unknown language '" + code + "' at line " + std::to_string(line_no));
            p.lang = *lang;
            p.chosen_relevance = j.at("chosen_relevance").get<double>();
            p.rejected_relevance = j.at("rejected_relevance").get<double>();
            out.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("malformed preference at line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace detox::orpo
