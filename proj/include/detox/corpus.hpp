#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "detox/language.hpp"

namespace detox::corpus {

enum class Source : std::uint8_t {
    en_paradetox,
    ru_paradetox,
    translated,
    multilingual_paradetox,
    generated,
};

std::string_view source_name(Source src);
std::optional<Source> parse_source(std::string_view name);

/// One (toxic, neutral) sentence pair.
struct ParallelPair {
    std::string id;
    Language lang = Language::en;
    std::string toxic;
    std::string neutral;
    Source source = Source::generated;

    friend bool operator==(const ParallelPair&, const ParallelPair&) = default;
};

/// Insertion-ordered collection of pairs with unique ids.
///
/// `add` validates the pair invariants (non-empty sides after trimming) and
/// rejects duplicate ids, so every Dataset in the program is well formed.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::string name) : name_(std::move(name)) {}

    void add(ParallelPair pair);
    void reserve(std::size_t n);

    const std::string& name() const { return name_; }
    void set_name(std::string name) { name_ = std::move(name); }

    const std::vector<ParallelPair>& pairs() const { return pairs_; }
    std::size_t size() const { return pairs_.size(); }
    bool empty() const { return pairs_.empty(); }
    bool contains_id(const std::string& id) const { return ids_.contains(id); }

    auto begin() const { return pairs_.begin(); }
    auto end() const { return pairs_.end(); }
    const ParallelPair& operator[](std::size_t i) const { return pairs_[i]; }

    /// Field-for-field equality of the pair sequence; the name is ignored.
    friend bool operator==(const Dataset& a, const Dataset& b) { return a.pairs_ == b.pairs_; }

private:
    std::string name_;
    std::vector<ParallelPair> pairs_;
    std::unordered_set<std::string> ids_;
};

struct MixtureEntry {
    std::string name;
    std::optional<std::size_t> expected;
};

struct MixtureSpec {
    std::vector<MixtureEntry> entries;
};

Dataset read_pairs(const std::filesystem::path& path);
void write_pairs(const Dataset& ds, const std::filesystem::path& path);

std::string pair_to_json_line(const ParallelPair& pair);
ParallelPair pair_from_json_line(std::string_view line, std::size_t line_no);

/// Concatenates `parts` in spec order, re-namespacing ids as "<name>/<id>".
/// Parts are matched to entries by Dataset::name().
Dataset assemble_mixture(const std::vector<Dataset>& parts, const MixtureSpec& spec,
                         std::string name = "mixture");

PerLanguage<std::size_t> stats_by_language(const Dataset& ds);

struct Split {
    Dataset train;
    Dataset val;
};

inline constexpr double kDefaultValFraction = 0.05;

/// Stratified, seed-deterministic train/validation partition. The validation
/// size is round(val_fraction * N), apportioned across languages by largest
/// remainder; both sides keep the input order.
Split split(const Dataset& ds, double val_fraction, std::uint64_t seed);

}  // namespace detox::corpus
