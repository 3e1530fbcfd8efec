#include "detox/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "detox/error.hpp"
#include "json.hpp"

namespace detox::augment {

namespace {

constexpr std::array<std::string_view, 4> kReasonNames = {
    "toxic_side_not_toxic", "neutral_side_not_neutral", "toxic_side_dissimilar", "neutral_side_dissimilar",
};

std::vector<std::string> column(const corpus::Dataset& ds, bool toxic) {
    std::vector<std::string> out;
    out.reserve(ds.size());
    for (const auto& p : ds) out.push_back(toxic ? p.toxic : p.neutral);
    return out;
}

}  // namespace

std::string_view similarity_sides_name(SimilaritySides s) {
    switch (s) {
        case SimilaritySides::both: return "both";
        case SimilaritySides::toxic_only: return "toxic_only";
        case SimilaritySides::neutral_only: return "neutral_only";
    }
    return "both";
}

SimilaritySides parse_similarity_sides(std::string_view name) {
    if (name == "both") return SimilaritySides::both;
    if (name == "toxic_only") return SimilaritySides::toxic_only;
    if (name == "neutral_only") return SimilaritySides::neutral_only;
    throw ConfigError("unknown similarity side selection '" + std::string(name) + "'");
}

std::string_view reason_name(RejectReason r) { return kReasonNames[static_cast<std::size_t>(r)]; }

void FilterThresholds::validate() const {
    if (!(0.0 <= neutral_max && neutral_max < toxic_min && toxic_min <= 1.0)) {
        throw ConfigError("thresholds must satisfy 0 <= neutral_max < toxic_min <= 1");
    }
    if (!(-1.0 <= sim_min && sim_min <= 1.0)) throw ConfigError("sim_min must lie in [-1, 1]");
}

TranslatedCorpus translate_corpus(const corpus::Dataset& english, std::span<const Language> targets,
                                  backends::Translator& translator, std::size_t batch_size) {
    for (const auto& p : english) {
        if (p.lang != Language::en) throw FormatError("pair '" + p.id + "' is not English");
    }
    const auto toxic = column(english, true);
    const auto neutral = column(english, false);
    const std::size_t batch = std::max<std::size_t>(1, batch_size);

    TranslatedCorpus out;
    for (Language tgt : targets) {
        corpus::Dataset ds(std::string("translated.") + std::string(language_code(tgt)));
        ds.reserve(english.size());
        for (std::size_t begin = 0; begin < english.size(); begin += batch) {
            const std::size_t n = std::min(batch, english.size() - begin);
            std::vector<std::string> tt, tn;
            try {
                tt = translator.translate_batch(std::span(toxic).subspan(begin, n), Language::en, tgt);
                tn = translator.translate_batch(std::span(neutral).subspan(begin, n), Language::en, tgt);
            } catch (const backends::TranslationError& e) {
                throw BackendError("translating pair '" + english[begin + e.index()].id + "' to " +
                                   std::string(language_code(tgt)) + ": " + e.what());
            } catch (const std::exception& e) {
                throw BackendError("translating batch starting at pair '" + english[begin].id + "' to " +
                                   std::string(language_code(tgt)) + ": " + e.what());
            }
            if (tt.size() != n || tn.size() != n) throw BackendError("translator changed the batch length");
            for (std::size_t i = 0; i < n; ++i) {
                const auto& src = english[begin + i];
                ds.add({src.id + "." + std::string(language_code(tgt)), tgt, std::move(tt[i]), std::move(tn[i]),
                        corpus::Source::translated});
            }
        }
        out.emplace(tgt, std::move(ds));
    }
    return out;
}

PairScores score_pair(const corpus::ParallelPair& original, const corpus::ParallelPair& translated,
                      const backends::ToxicityScorer& tox, const backends::SimilarityScorer& sim) {
    const std::string tt[1] = {translated.toxic};
    const std::string tn[1] = {translated.neutral};
    const std::string ot[1] = {original.toxic};
    const std::string on[1] = {original.neutral};
    PairScores s;
    s.tox_toxic = tox.score_batch(tt, translated.lang).at(0);
    s.tox_neutral = tox.score_batch(tn, translated.lang).at(0);
    s.sim_toxic = sim.similarity_batch(ot, tt).at(0);
    s.sim_neutral = sim.similarity_batch(on, tn).at(0);
    return s;
}

std::vector<PairScores> score_pairs(const corpus::Dataset& originals, const corpus::Dataset& translated,
                                    const backends::ToxicityScorer& tox, const backends::SimilarityScorer& sim,
                                    const backends::BatchOptions& opts) {
    if (originals.size() != translated.size()) {
        throw FormatError("translated dataset '" + translated.name() + "' has " + std::to_string(translated.size()) +
                          " pairs but the originals have " + std::to_string(originals.size()));
    }
    std::vector<PairScores> out(originals.size());
    if (originals.empty()) return out;
    const Language lang = translated[0].lang;
    for (const auto& p : translated) {
        if (p.lang != lang) throw FormatError("translated dataset mixes languages");
    }
    const auto tt = column(translated, true);
    const auto tn = column(translated, false);
    const auto ot = column(originals, true);
    const auto on = column(originals, false);
    const auto tox_t = backends::score_toxicity(tox, tt, lang, opts);
    const auto tox_n = backends::score_toxicity(tox, tn, lang, opts);
    const auto sim_t = backends::score_similarity(sim, ot, tt, opts);
    const auto sim_n = backends::score_similarity(sim, on, tn, opts);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {tox_t[i], tox_n[i], sim_t[i], sim_n[i]};
    return out;
}

FilterVerdict apply_filter(const PairScores& scores, const FilterThresholds& th, std::string pair_id) {
    FilterVerdict v;
    v.pair_id = std::move(pair_id);
    v.scores = scores;
    if (!(scores.tox_toxic >= th.toxic_min)) v.reasons.push_back(RejectReason::toxic_side_not_toxic);
    if (!(scores.tox_neutral <= th.neutral_max)) v.reasons.push_back(RejectReason::neutral_side_not_neutral);
    if (th.sides != SimilaritySides::neutral_only && !(scores.sim_toxic >= th.sim_min)) {
        v.reasons.push_back(RejectReason::toxic_side_dissimilar);
    }
    if (th.sides != SimilaritySides::toxic_only && !(scores.sim_neutral >= th.sim_min)) {
        v.reasons.push_back(RejectReason::neutral_side_dissimilar);
    }
    v.keep = v.reasons.empty();
    return v;
}

void Histogram::add(double x) {
    const double pos = (x - lo) / (hi - lo) * static_cast<double>(kHistogramBins);
    const double clamped = std::clamp(std::floor(pos), 0.0, static_cast<double>(kHistogramBins - 1));
    ++counts[static_cast<std::size_t>(clamped)];
}

double Histogram::bin_left(std::size_t i) const { return lo + (hi - lo) * static_cast<double>(i) / kHistogramBins; }

double Histogram::bin_right(std::size_t i) const { return lo + (hi - lo) * static_cast<double>(i + 1) / kHistogramBins; }

std::size_t Histogram::total() const {
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
}

void ScoreHistogram::add(const PairScores& s) {
    tox_toxic.add(s.tox_toxic);
    tox_neutral.add(s.tox_neutral);
    sim_toxic.add(s.sim_toxic);
    sim_neutral.add(s.sim_neutral);
    ++scored_pairs;
}

FilterResult filter_corpus(const corpus::Dataset& originals, const TranslatedCorpus& translated,
                           const backends::ToxicityScorer& tox, const backends::SimilarityScorer& sim,
                           const FilterThresholds& th, const backends::BatchOptions& opts) {
    th.validate();
    FilterResult result;
    for (const auto& [lang, ds] : translated) {
        const auto scores = score_pairs(originals, ds, tox, sim, opts);
        corpus::Dataset kept(ds.name());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (ds[i].lang != lang) throw FormatError("pair '" + ds[i].id + "' filed under the wrong language");
            if (ds[i].id != originals[i].id + "." + std::string(language_code(lang))) {
                throw FormatError("translated pair '" + ds[i].id + "' does not align with original '" +
                                  originals[i].id + "'");
            }
            auto verdict = apply_filter(scores[i], th, ds[i].id);
            result.hist.add(scores[i]);
            if (verdict.keep) {
                kept.add(ds[i]);
                ++result.stats[language_index(lang)];
            }
            result.verdicts.push_back(std::move(verdict));
        }
        result.kept.emplace(lang, std::move(kept));
    }
    return result;
}

std::string verdict_to_json_line(const FilterVerdict& v) {
    nlohmann::ordered_json obj;
    obj["pair_id"] = v.pair_id;
    obj["keep"] = v.keep;
    obj["reasons"] = nlohmann::ordered_json::array();
    for (auto r : v.reasons) obj["reasons"].push_back(reason_name(r));
    obj["scores"] = {{"tox_toxic", v.scores.tox_toxic},
                     {"tox_neutral", v.scores.tox_neutral},
                     {"sim_toxic", v.scores.sim_toxic},
                     {"sim_neutral", v.scores.sim_neutral}};
    return obj.dump();
}

void write_verdicts(std::span<const FilterVerdict> verdicts, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& v : verdicts) out << verdict_to_json_line(v) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

void write_histogram_csv(const ScoreHistogram& hist, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "family,bin_left,bin_right,count\n";
    const std::pair<const char*, const Histogram*> families[] = {
        {"tox_toxic", &hist.tox_toxic},
        {"tox_neutral", &hist.tox_neutral},
        {"sim_toxic", &hist.sim_toxic},
        {"sim_neutral", &hist.sim_neutral},
    };
    char buf[128];
    for (const auto& [name, h] : families) {
        for (std::size_t i = 0; i < kHistogramBins; ++i) {
            std::snprintf(buf, sizeof buf, "%s,%.2f,%.2f,%zu\n", name, h->bin_left(i), h->bin_right(i), h->counts[i]);
            out << buf;
        }
    }
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detox::augment
