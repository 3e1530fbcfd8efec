#include "detox/decode.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "detox/error.hpp"
#include "detox/text.hpp"
#include "json.hpp"

namespace detox::decode {

namespace {

struct Hyp {
    std::vector<TokenId> tokens;
    double score = 0.0;
    double logprob = 0.0;
    bool finished = false;
};

struct Expansion {
    double score;
    std::size_t parent;
    std::optional<TokenId> token;  // nullopt: finished parent carried over
    double logprob;
};

template <typename Key>
std::vector<std::size_t> stable_order_desc(std::size_t n, Key key) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
    return idx;
}

}  // namespace

std::string_view length_norm_name(LengthNorm n) { return n == LengthNorm::none ? "none" : "by_length"; }

LengthNorm parse_length_norm(std::string_view name) {
    if (name == "none") return LengthNorm::none;
    if (name == "by_length") return LengthNorm::by_length;
    throw ConfigError("unknown length_norm '" + std::string(name) + "'");
}

void DecodeParams::validate() const {
    if (num_beams == 0 || num_groups == 0) throw ConfigError("num_beams and num_groups must be positive");
    if (num_beams % num_groups != 0) throw ConfigError("num_beams must be divisible by num_groups");
    if (!(diversity_penalty >= 0.0)) throw ConfigError("diversity_penalty must be non-negative");
    if (!(repetition_penalty >= 1.0)) throw ConfigError("repetition_penalty must be >= 1");
    if (shortlist_k == 0 || shortlist_k > num_beams) throw ConfigError("shortlist_k must lie in [1, num_beams]");
    if (max_new_tokens == 0) throw ConfigError("max_new_tokens must be positive");
}

std::vector<Beam> diverse_beam_search(const backends::GenerativeModel& model, std::span<const TokenId> prompt,
                                      const DecodeParams& params) {
    params.validate();
    const std::size_t vocab = model.vocab_size();
    if (vocab == 0) throw BackendError("model has an empty vocabulary");
    const TokenId eos = model.eos_token();
    const std::size_t width = params.num_beams / params.num_groups;
    const double rep_shift = std::log(params.repetition_penalty);

    std::vector<std::vector<Hyp>> groups(params.num_groups, std::vector<Hyp>(1));
    std::vector<double> emitted(vocab);
    std::vector<char> seen(vocab);
    std::vector<Expansion> cands;

    for (std::size_t step = 0; step < params.max_new_tokens; ++step) {
        std::fill(emitted.begin(), emitted.end(), 0.0);
        bool any_running = false;
        for (auto& group : groups) {
            if (std::all_of(group.begin(), group.end(), [](const Hyp& h) { return h.finished; })) continue;
            any_running = true;

            cands.clear();
            for (std::size_t i = 0; i < group.size(); ++i) {
                const Hyp& h = group[i];
                if (h.finished) {
                    cands.push_back({h.score, i, std::nullopt, h.logprob});
                    continue;
                }
                const auto lp = model.next_logprobs(prompt, h.tokens);
                if (lp.size() != vocab) throw BackendError("next_logprobs returned a vector of the wrong size");
                std::fill(seen.begin(), seen.end(), 0);
                for (TokenId t : h.tokens) seen[t] = 1;
                for (std::size_t v = 0; v < vocab; ++v) {
                    if (std::isnan(lp[v])) throw BackendError("model produced NaN log-probabilities");
                    double adj = lp[v];
                    if (seen[v]) adj -= rep_shift;
                    adj -= params.diversity_penalty * emitted[v];
                    cands.push_back({h.score + adj, i, static_cast<TokenId>(v), h.logprob + lp[v]});
                }
            }

            const auto order = stable_order_desc(cands.size(), [&](std::size_t i) { return cands[i].score; });
            std::vector<Hyp> next;
            next.reserve(width);
            for (std::size_t r = 0; r < order.size() && next.size() < width; ++r) {
                const Expansion& c = cands[order[r]];
                if (!c.token) {
                    next.push_back(group[c.parent]);
                    continue;
                }
                Hyp h;
                h.tokens = group[c.parent].tokens;
                h.score = c.score;
                h.logprob = c.logprob;
                if (*c.token == eos) {
                    h.finished = true;
                } else {
                    h.tokens.push_back(*c.token);
                }
                emitted[*c.token] += 1.0;
                next.push_back(std::move(h));
            }
            group = std::move(next);
        }
        if (!any_running) break;
    }

    std::vector<Beam> out;
    out.reserve(params.num_beams);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (auto& h : groups[g]) {
            out.push_back({std::move(h.tokens), h.score, h.logprob, h.finished, !h.finished, g});
        }
    }
    return out;
}

double relevance(double sim, double neutrality) { return std::max(sim, 0.0) * neutrality; }

std::vector<Candidate> shortlist(std::span<const Beam> beams, std::size_t k, LengthNorm norm) {
    std::vector<double> per_token(beams.size());
    for (std::size_t i = 0; i < beams.size(); ++i) {
        const std::size_t len = beams[i].tokens.size() + (beams[i].finished ? 1 : 0);
        per_token[i] = len == 0 ? beams[i].logprob : beams[i].logprob / static_cast<double>(len);
    }
    const auto order = stable_order_desc(beams.size(), [&](std::size_t i) {
        return norm == LengthNorm::by_length ? per_token[i] : beams[i].logprob;
    });
    std::vector<Candidate> out;
    for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
        const std::size_t i = order[r];
        Candidate c;
        c.tokens = beams[i].tokens;
        c.logprob_total = beams[i].logprob;
        c.logprob_norm = per_token[i];
        c.beam_index = i;
        c.truncated = beams[i].truncated;
        out.push_back(std::move(c));
    }
    return out;
}

void score_candidates(CandidateSet& cset, const backends::ToxicityScorer& tox, const backends::SimilarityScorer& sim,
                      const backends::BatchOptions& opts) {
    std::vector<std::string> texts;
    for (const auto& c : cset.candidates) texts.push_back(c.text);
    const std::vector<std::string> sources(texts.size(), cset.source_toxic);

    std::vector<double> sims, toxs;
    try {
        sims = backends::score_similarity(sim, sources, texts, opts);
        toxs = backends::score_toxicity(tox, texts, cset.lang, opts);
    } catch (const std::exception& batch_error) {
        for (std::size_t i = 0; i < texts.size(); ++i) {
            try {
                (void)sim.similarity_batch(std::span(sources).subspan(i, 1), std::span(texts).subspan(i, 1));
                (void)tox.score_batch(std::span(texts).subspan(i, 1), cset.lang);
            } catch (const std::exception& e) {
                throw BackendError("scoring candidate " + std::to_string(i) + " of '" + cset.id + "': " + e.what());
            }
        }
        throw BackendError("scoring candidates of '" + cset.id + "': " + batch_error.what());
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
        auto& c = cset.candidates[i];
        c.sim = sims[i];
        c.neutrality = 1.0 - toxs[i];
        c.relevance = relevance(c.sim, c.neutrality);
        c.scored = true;
    }
    std::stable_sort(cset.candidates.begin(), cset.candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.relevance > b.relevance; });
}

std::size_t select_best_index(const CandidateSet& cset) {
    if (cset.candidates.empty()) throw FormatError("candidate set '" + cset.id + "' is empty");
    std::size_t best = 0;
    for (std::size_t i = 0; i < cset.candidates.size(); ++i) {
        const auto& c = cset.candidates[i];
        if (!c.scored) throw FormatError("candidate " + std::to_string(i) + " of '" + cset.id + "' is unscored");
        const auto& b = cset.candidates[best];
        if (c.relevance > b.relevance || (c.relevance == b.relevance && c.logprob_norm > b.logprob_norm)) best = i;
    }
    return best;
}

const Candidate& select_best(const CandidateSet& cset) { return cset.candidates[select_best_index(cset)]; }

CandidateSet generate_candidates(const backends::GenerativeModel& model, const DetoxInput& input,
                                 const DecodeParams& params, const sft::PrefixTable& prefixes) {
    CandidateSet cset;
    cset.id = input.id;
    cset.lang = input.lang;
    cset.source_toxic = input.toxic;
    cset.prompt = sft::build_prompt(input.lang, input.toxic, prefixes);
    const auto prompt_tokens = model.tokenize(cset.prompt);
    const auto beams = diverse_beam_search(model, prompt_tokens, params);
    cset.candidates = shortlist(beams, params.shortlist_k, params.length_norm);
    for (auto& c : cset.candidates) c.text = model.detokenize(c.tokens);
    return cset;
}

DetoxBatchResult detoxify_batch(const backends::GenerativeModel& model, std::span<const DetoxInput> inputs,
                                const DecodeParams& params, const backends::ToxicityScorer& tox,
                                const backends::SimilarityScorer& sim, const sft::PrefixTable& prefixes,
                                const backends::BatchOptions& opts) {
    params.validate();
    DetoxBatchResult result;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        try {
            CandidateSet cset = generate_candidates(model, inputs[i], params, prefixes);
            score_candidates(cset, tox, sim, opts);
            Candidate best = select_best(cset);
            result.outputs.push_back({i, std::move(cset), std::move(best)});
        } catch (const std::exception& e) {
            result.errors.push_back({i, inputs[i].id, e.what()});
        }
    }
    return result;
}

std::string candidate_set_to_json_line(const CandidateSet& cset) {
    nlohmann::ordered_json j;
    j["id"] = cset.id;
    j["lang"] = language_code(cset.lang);
    j["prompt"] = cset.prompt;
    j["source_toxic"] = cset.source_toxic;
    j["candidates"] = nlohmann::ordered_json::array();
    for (const auto& c : cset.candidates) {
        nlohmann::ordered_json cj;
        cj["text"] = c.text;
        cj["tokens"] = c.tokens;
        cj["logprob_total"] = c.logprob_total;
        cj["logprob_norm"] = c.logprob_norm;
        cj["beam_index"] = c.beam_index;
        cj["truncated"] = c.truncated;
        if (c.scored) {
            cj["sim"] = c.sim;
            cj["neutrality"] = c.neutrality;
            cj["relevance"] = c.relevance;
        } else {
            cj["sim"] = nullptr;
            cj["neutrality"] = nullptr;
            cj["relevance"] = nullptr;
        }
        j["candidates"].push_back(std::move(cj));
    }
    return j.dump();
}

CandidateSet candidate_set_from_json_line(std::string_view line, std::size_t line_no) {
    try {
        const auto j = nlohmann::json::parse(line);
        CandidateSet cset;
        cset.id = j.at("id").get<std::string>();
        const auto code = j.at("lang").get<std::string>();
        const auto lang = parse_language(code);
        if (!lang) throw FormatError("unknown language '" + code + "' at line " + std::to_string(line_no));
        cset.lang = *lang;
        cset.prompt = j.at("prompt").get<std::string>();
        cset.source_toxic = j.at("source_toxic").get<std::string>();
        for (const auto& cj : j.at("candidates")) {
            Candidate c;
            c.text = cj.at("text").get<std::string>();
            c.tokens = cj.at("tokens").get<std::vector<TokenId>>();
            c.logprob_total = cj.at("logprob_total").get<double>();
            c.logprob_norm = cj.at("logprob_norm").get<double>();
            c.beam_index = cj.at("beam_index").get<std::size_t>();
            c.truncated = cj.at("truncated").get<bool>();
            c.scored = !cj.at("relevance").is_null();
            if (c.scored) {
                c.sim = cj.at("sim").get<double>();
                c.neutrality = cj.at("neutrality").get<double>();
                c.relevance = cj.at("relevance").get<double>();
            }
            cset.candidates.push_back(std::move(c));
        }
        return cset;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed candidate set at line " + std::to_string(line_no) + ": " + e.what());
    }
}

void write_candidate_sets(std::span<const CandidateSet> sets, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& s : sets) out << candidate_set_to_json_line(s) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<CandidateSet> read_candidate_sets(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<CandidateSet> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        out.push_back(candidate_set_from_json_line(line, line_no));
    }
    return out;
}

}  // namespace detox::decode
