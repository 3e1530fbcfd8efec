#include "detox/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "detox/error.hpp"
#include "detox/text.hpp"
#include "json.hpp"

namespace detox::corpus {

namespace {

constexpr std::array<std::string_view, 5> kSourceNames = {
    "en_paradetox", "ru_paradetox", "translated", "multilingual_paradetox", "generated",
};

std::string at_line(std::size_t line_no) { return " at line " + std::to_string(line_no); }

std::string required_string(const nlohmann::json& obj, const char* key, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end()) throw FormatError(std::string("missing key '") + key + "'" + at_line(line_no));
    if (!it->is_string()) throw FormatError(std::string("key '") + key + "' is not a string" + at_line(line_no));
    return it->get<std::string>();
}

}  // namespace

std::string_view source_name(Source src) { return kSourceNames[static_cast<std::size_t>(src)]; }

std::optional<Source> parse_source(std::string_view name) {
    for (std::size_t i = 0; i < kSourceNames.size(); ++i) {
        if (kSourceNames[i] == name) return static_cast<Source>(i);
    }
    return std::nullopt;
}

void Dataset::add(ParallelPair pair) {
    if (text::trim(pair.toxic).empty()) throw FormatError("pair '" + pair.id + "' has an empty toxic side");
    if (text::trim(pair.neutral).empty()) throw FormatError("pair '" + pair.id + "' has an empty neutral side");
    if (!ids_.insert(pair.id).second) throw FormatError("duplicate pair id '" + pair.id + "'");
    pairs_.push_back(std::move(pair));
}

void Dataset::reserve(std::size_t n) {
    pairs_.reserve(n);
    ids_.reserve(n);
}

std::string pair_to_json_line(const ParallelPair& pair) {
    nlohmann::ordered_json obj;
    obj["id"] = pair.id;
    obj["lang"] = language_code(pair.lang);
    obj["toxic"] = pair.toxic;
    obj["neutral"] = pair.neutral;
    obj["source"] = source_name(pair.source);
    try {
        return obj.dump();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("pair '" + pair.id + "' is not valid UTF-8: " + e.what());
    }
}

ParallelPair pair_from_json_line(std::string_view line, std::size_t line_no) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("malformed record" + at_line(line_no) + ": " + e.what());
    }
    if (!obj.is_object()) throw FormatError("malformed record" + at_line(line_no) + ": not a JSON object");

    ParallelPair pair;
    pair.id = required_string(obj, "id", line_no);
    const std::string lang = required_string(obj, "lang", line_no);
    const auto parsed_lang = parse_language(lang);
    if (!parsed_lang) throw FormatError("unknown language '" + lang + "'" + at_line(line_no));
    pair.lang = *parsed_lang;
    pair.toxic = required_string(obj, "toxic", line_no);
    pair.neutral = required_string(obj, "neutral", line_no);
    const std::string src = required_string(obj, "source", line_no);
    const auto parsed_src = parse_source(src);
    if (!parsed_src) throw FormatError("unknown source '" + src + "'" + at_line(line_no));
    pair.source = *parsed_src;
    if (obj.size() != 5) throw FormatError("unexpected keys in record" + at_line(line_no));
    return pair;
}

Dataset read_pairs(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    Dataset ds(path.stem().string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        ParallelPair pair = pair_from_json_line(line, line_no);
        try {
            ds.add(std::move(pair));
        } catch (const FormatError& e) {
            throw FormatError(e.what() + at_line(line_no));
        }
    }
    return ds;
}

void write_pairs(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& pair : ds) out << pair_to_json_line(pair) << '\n';
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

Dataset assemble_mixture(const std::vector<Dataset>& parts, const MixtureSpec& spec, std::string name) {
    std::map<std::string, const Dataset*> by_name;
    for (const auto& part : parts) {
        if (!by_name.emplace(part.name(), &part).second) {
            throw FormatError("mixture part '" + part.name() + "' given twice");
        }
    }
    if (by_name.size() != spec.entries.size()) {
        throw FormatError("mixture has " + std::to_string(spec.entries.size()) + " entries but " +
                          std::to_string(parts.size()) + " parts");
    }

    std::string mismatches;
    std::size_t total = 0;
    for (const auto& entry : spec.entries) {
        auto it = by_name.find(entry.name);
        if (it == by_name.end()) throw FormatError("mixture entry '" + entry.name + "' has no matching part");
        if (entry.expected && *entry.expected == 0) {
            throw FormatError("mixture entry '" + entry.name + "' has a non-positive expected count");
        }
        const std::size_t actual = it->second->size();
        if (entry.expected && *entry.expected != actual) {
            if (!mismatches.empty()) mismatches += "; ";
            mismatches += entry.name + ": expected " + std::to_string(*entry.expected) + ", got " +
                          std::to_string(actual);
        }
        total += actual;
    }
    if (!mismatches.empty()) throw FormatError(mismatches);

    Dataset out(std::move(name));
    out.reserve(total);
    for (const auto& entry : spec.entries) {
        for (const auto& pair : *by_name.at(entry.name)) {
            ParallelPair copy = pair;
            copy.id = entry.name + "/" + pair.id;
            out.add(std::move(copy));
        }
    }
    return out;
}

PerLanguage<std::size_t> stats_by_language(const Dataset& ds) {
    PerLanguage<std::size_t> counts{};
    for (const auto& pair : ds) ++counts[language_index(pair.lang)];
    return counts;
}

Split split(const Dataset& ds, double val_fraction, std::uint64_t seed) {
    if (ds.empty()) throw FormatError("cannot split an empty dataset");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw FormatError("val_fraction must lie in (0, 1)");
    }
    const std::size_t n = ds.size();
    const auto val_total = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
    if (val_total == 0 || val_total == n) {
        throw FormatError("val_fraction " + std::to_string(val_fraction) + " leaves an empty side for " +
                          std::to_string(n) + " pairs");
    }

    PerLanguage<std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) members[language_index(ds[i].lang)].push_back(i);

    // Largest-remainder apportionment of val_total across languages.
    PerLanguage<std::size_t> quota{};
    PerLanguage<double> remainder{};
    std::size_t assigned = 0;
    for (std::size_t l = 0; l < kLanguageCount; ++l) {
        const double exact = val_total * static_cast<double>(members[l].size()) / static_cast<double>(n);
        quota[l] = static_cast<std::size_t>(std::floor(exact));
        remainder[l] = exact - static_cast<double>(quota[l]);
        assigned += quota[l];
    }
    std::array<std::size_t, kLanguageCount> order{};
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < val_total; k = (k + 1) % kLanguageCount) {
        const std::size_t l = order[k];
        if (quota[l] < members[l].size()) {
            ++quota[l];
            ++assigned;
        }
    }

    std::vector<bool> in_val(n, false);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < kLanguageCount; ++l) {
        auto idx = members[l];
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t k = 0; k < quota[l]; ++k) in_val[idx[k]] = true;
    }

    Split out{Dataset(ds.name() + ".train"), Dataset(ds.name() + ".val")};
    for (std::size_t i = 0; i < n; ++i) (in_val[i] ? out.val : out.train).add(ds[i]);
    return out;
}

}  // namespace detox::corpus
