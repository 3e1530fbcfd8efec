#include "detox/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "detox/error.hpp"
#include "detox/text.hpp"
#include "json.hpp"

namespace detox::evalkit {

namespace {

std::u32string strip_spaces(std::string_view s) {
    std::u32string out;
    for (char32_t c : text::decode_utf8(s)) {
        if (c != U' ' && c != U'\t' && c != U'\n' && c != U'\r' && c != U'\f' && c != U'\v') out.push_back(c);
    }
    return out;
}

std::map<std::u32string, std::size_t> ngram_counts(const std::u32string& s, std::size_t n) {
    std::map<std::u32string, std::size_t> counts;
    for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[s.substr(i, n)];
    return counts;
}

std::string fmt3(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    return buf;
}

}  // namespace

double chrf(std::string_view hypothesis, std::string_view reference, std::size_t max_n, double beta) {
    if (max_n == 0) throw ConfigError("chrf max_n must be >= 1");
    const auto hyp = strip_spaces(hypothesis);
    const auto ref = strip_spaces(reference);
    const double b2 = beta * beta;
    double sum = 0.0;
    std::size_t orders = 0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        if (hyp.size() < n || ref.size() < n) break;
        const auto hc = ngram_counts(hyp, n);
        const auto rc = ngram_counts(ref, n);
        std::size_t match = 0;
        for (const auto& [g, c] : hc) {
            auto it = rc.find(g);
            if (it != rc.end()) match += std::min(c, it->second);
        }
        const double precision = static_cast<double>(match) / static_cast<double>(hyp.size() - n + 1);
        const double recall = static_cast<double>(match) / static_cast<double>(ref.size() - n + 1);
        const double denom = b2 * precision + recall;
        sum += denom > 0.0 ? (1.0 + b2) * precision * recall / denom : 0.0;
        ++orders;
    }
    return orders == 0 ? 0.0 : sum / static_cast<double>(orders);
}

JointReport joint_score(std::span<const EvalRecord> records, const backends::ToxicityScorer& tox,
                        const backends::SimilarityScorer& sim, const backends::BatchOptions& opts) {
    if (records.empty()) throw FormatError("joint_score needs at least one record");

    PerLanguage<std::vector<std::size_t>> by_lang;
    for (std::size_t i = 0; i < records.size(); ++i) by_lang[language_index(records[i].lang)].push_back(i);

    JointReport report;
    double joint_sum = 0.0;
    for (std::size_t l = 0; l < kLanguageCount; ++l) {
        const auto& idx = by_lang[l];
        if (idx.empty()) continue;
        std::vector<std::string> outputs, sources;
        for (std::size_t i : idx) {
            outputs.push_back(records[i].output);
            sources.push_back(records[i].source_toxic);
        }
        const auto toxs = backends::score_toxicity(tox, outputs, kAllLanguages[l], opts);
        const auto sims = backends::score_similarity(sim, sources, outputs, opts);

        LanguageScores ls;
        ls.count = idx.size();
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const auto& rec = records[idx[k]];
            double sta = 1.0 - toxs[k];
            double s = std::clamp(sims[k], 0.0, 1.0);
            double flu = 1.0;
            if (rec.reference) {
                flu = chrf(rec.output, *rec.reference);
            } else {
                ++ls.missing_references;
            }
            if (text::trim(rec.output).empty()) {
                ++ls.empty_outputs;
                sta = s = flu = 0.0;
            }
            ls.sta += sta;
            ls.sim += s;
            ls.flu += flu;
            ls.joint += sta * s * flu;
        }
        const double n = static_cast<double>(ls.count);
        ls.sta /= n;
        ls.sim /= n;
        ls.flu /= n;
        ls.joint /= n;
        joint_sum += ls.joint;
        ++report.languages_present;
        report.languages[l] = ls;
    }
    report.avg_joint = joint_sum / static_cast<double>(report.languages_present);
    return report;
}

JointReport report_from_joint(const PerLanguage<std::optional<double>>& joint_by_language) {
    JointReport report;
    double sum = 0.0;
    for (std::size_t l = 0; l < kLanguageCount; ++l) {
        if (!joint_by_language[l]) continue;
        LanguageScores ls;
        ls.joint = *joint_by_language[l];
        report.languages[l] = ls;
        sum += ls.joint;
        ++report.languages_present;
    }
    report.avg_joint = report.languages_present ? sum / static_cast<double>(report.languages_present) : 0.0;
    return report;
}

std::string render_leaderboard(std::span<const std::pair<std::string, JointReport>> reports) {
    std::vector<std::size_t> order(reports.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return reports[a].second.avg_joint > reports[b].second.avg_joint; });

    std::string out = "> ";
    out += kApproximateBanner;
    out += "\n\n| System |";
    for (Language lang : kAllLanguages) {
        out += ' ';
        out += language_name(lang);
        out += " |";
    }
    out += " Avg J |\n|---|";
    for (std::size_t l = 0; l <= kLanguageCount; ++l) out += "---|";
    out += '\n';

    std::vector<std::string> footnotes;
    for (std::size_t i : order) {
        const auto& [name, report] = reports[i];
        out += "| " + name + " |";
        for (std::size_t l = 0; l < kLanguageCount; ++l) {
            out += ' ';
            out += report.languages[l] ? fmt3(report.languages[l]->joint) : "—";
            out += " |";
        }
        out += ' ' + fmt3(report.avg_joint);
        if (report.languages_present != kLanguageCount) {
            const std::string marker(footnotes.size() + 1, '*');
            footnotes.push_back(marker + " " + name + ": Avg J over " + std::to_string(report.languages_present) +
                                " languages");
            out += marker;
        }
        out += " |\n";
    }
    if (!footnotes.empty()) {
        out += '\n';
        for (const auto& f : footnotes) out += f + '\n';
    }
    return out;
}

std::string report_to_json(const JointReport& report, const std::string& system) {
    nlohmann::ordered_json j;
    j["system"] = system;
    j["note"] = kApproximateBanner;
    j["avg_joint"] = report.avg_joint;
    j["languages_present"] = report.languages_present;
    j["languages"] = nlohmann::ordered_json::object();
    for (std::size_t l = 0; l < kLanguageCount; ++l) {
        if (!report.languages[l]) continue;
        const auto& ls = *report.languages[l];
        j["languages"][std::string(language_code(kAllLanguages[l]))] = {
            {"count", ls.count},
            {"sta", ls.sta},
            {"sim", ls.sim},
            {"flu", ls.flu},
            {"joint", ls.joint},
            {"empty_outputs", ls.empty_outputs},
            {"missing_references", ls.missing_references},
        };
    }
    return j.dump(2) + "\n";
}

std::pair<std::string, JointReport> report_from_json(std::string_view json) {
    try {
        const auto j = nlohmann::json::parse(json);
        JointReport report;
        for (const auto& [code, v] : j.at("languages").items()) {
            const auto lang = parse_language(code);
            if (!lang) throw FormatError("unknown language '" + code + "' in report");
            LanguageScores ls;
            ls.count = v.at("count").get<std::size_t>();
            ls.sta = v.at("sta").get<double>();
            ls.sim = v.at("sim").get<double>();
            ls.flu = v.at("flu").get<double>();
            ls.joint = v.at("joint").get<double>();
            ls.empty_outputs = v.at("empty_outputs").get<std::size_t>();
            ls.missing_references = v.at("missing_references").get<std::size_t>();
            report.languages[language_index(*lang)] = ls;
        }
        report.avg_joint = j.at("avg_joint").get<double>();
        report.languages_present = j.at("languages_present").get<std::size_t>();
        return {j.at("system").get<std::string>(), report};
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed report: ") + e.what());
    }
}

}  // namespace detox::evalkit
