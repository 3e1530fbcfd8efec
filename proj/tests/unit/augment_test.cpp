#include <gtest/gtest.h>

#include <set>

#include "detox/augment.hpp"
#include "detox/backends/mock_scorers.hpp"
#include "detox/backends/translator.hpp"
#include "detox/error.hpp"
#include "json.hpp"
#include "test_support.hpp"

namespace {

using namespace detox;
using augment::FilterThresholds;
using augment::PairScores;
using augment::RejectReason;
using corpus::Dataset;
using corpus::Source;

/// Scores looked up by exact text; anything else gets `fallback`.
class LookupToxicity : public backends::ToxicityScorer {
public:
    LookupToxicity(std::map<std::string, double> table, double fallback) : table_(std::move(table)), fallback_(fallback) {}
    std::vector<double> score_batch(std::span<const std::string> texts, Language) const override {
        std::vector<double> out;
        for (const auto& t : texts) {
            auto it = table_.find(t);
            out.push_back(it == table_.end() ? fallback_ : it->second);
        }
        return out;
    }
    std::string name() const override { return "lookup"; }

private:
    std::map<std::string, double> table_;
    double fallback_;
};

class ConstantSimilarity : public backends::SimilarityScorer {
public:
    explicit ConstantSimilarity(double v) : v_(v) {}
    std::vector<double> similarity_batch(std::span<const std::string> a, std::span<const std::string> b) const override {
        if (a.size() != b.size()) throw BackendError("length mismatch");
        return std::vector<double>(a.size(), v_);
    }
    std::string name() const override { return "constant"; }

private:
    double v_;
};

TEST(ApplyFilter, Examples) {
    const FilterThresholds th;
    EXPECT_TRUE(augment::apply_filter({0.95, 0.05, 0.9, 0.9}, th).keep);
    const auto v = augment::apply_filter({0.85, 0.05, 0.9, 0.9}, th);
    EXPECT_FALSE(v.keep);
    EXPECT_EQ(v.reasons, std::vector<RejectReason>{RejectReason::toxic_side_not_toxic});
    EXPECT_TRUE(augment::apply_filter({0.9, 0.1, 0.8, 0.8}, th).keep);
}

TEST(ApplyFilter, ListsEveryViolatedClause) {
    const auto v = augment::apply_filter({0.1, 0.9, 0.1, 0.1}, FilterThresholds{}, "p1");
    EXPECT_EQ(v.pair_id, "p1");
    EXPECT_EQ(v.reasons, (std::vector<RejectReason>{RejectReason::toxic_side_not_toxic,
                                                    RejectReason::neutral_side_not_neutral,
                                                    RejectReason::toxic_side_dissimilar,
                                                    RejectReason::neutral_side_dissimilar}));
}

TEST(ApplyFilter, SimilaritySideSwitch) {
    FilterThresholds th;
    th.sides = augment::SimilaritySides::toxic_only;
    EXPECT_TRUE(augment::apply_filter({0.95, 0.05, 0.9, 0.1}, th).keep);
    EXPECT_FALSE(augment::apply_filter({0.95, 0.05, 0.1, 0.9}, th).keep);
    th.sides = augment::SimilaritySides::neutral_only;
    EXPECT_TRUE(augment::apply_filter({0.95, 0.05, 0.1, 0.9}, th).keep);
    EXPECT_EQ(augment::parse_similarity_sides("both"), augment::SimilaritySides::both);
    EXPECT_THROW(augment::parse_similarity_sides("either"), ConfigError);
}

TEST(FilterThresholds, Validation) {
    EXPECT_NO_THROW(FilterThresholds{}.validate());
    EXPECT_THROW((FilterThresholds{0.5, 0.5, 0.8}).validate(), ConfigError);
    EXPECT_THROW((FilterThresholds{1.1, 0.1, 0.8}).validate(), ConfigError);
    EXPECT_THROW((FilterThresholds{0.9, -0.1, 0.8}).validate(), ConfigError);
    EXPECT_THROW((FilterThresholds{0.9, 0.1, 1.5}).validate(), ConfigError);
}

Dataset english_pairs(std::size_t n) {
    Dataset ds("en");
    for (std::size_t i = 0; i < n; ++i) {
        ds.add({"p" + std::to_string(i), Language::en, "you stupid thing " + std::to_string(i),
                "you thing " + std::to_string(i), Source::en_paradetox});
    }
    return ds;
}

TEST(TranslateCorpus, SizesIdsAndSources) {
    const auto en = english_pairs(4);
    backends::TableTranslator tr;
    tr.add(Language::en, Language::de, "you stupid thing 0", "du dummes ding 0");
    const std::vector<Language> targets = {Language::de, Language::uk};
    const auto out = augment::translate_corpus(en, targets, tr, 3);
    ASSERT_EQ(out.size(), 2u);
    for (Language l : targets) {
        const auto& ds = out.at(l);
        ASSERT_EQ(ds.size(), 4u);
        for (std::size_t i = 0; i < 4; ++i) {
            EXPECT_EQ(ds[i].id, en[i].id + "." + std::string(language_code(l)));
            EXPECT_EQ(ds[i].lang, l);
            EXPECT_EQ(ds[i].source, Source::translated);
        }
    }
    EXPECT_EQ(out.at(Language::de)[0].toxic, "du dummes ding 0");
    EXPECT_EQ(out.at(Language::de)[1].toxic, "you stupid thing 1");
}

TEST(TranslateCorpus, EmptyInputGivesEmptyEntries) {
    backends::TableTranslator tr;
    const std::vector<Language> targets = {Language::am, Language::zh};
    const auto out = augment::translate_corpus(Dataset{}, targets, tr);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_TRUE(out.at(Language::am).empty());
}

TEST(TranslateCorpus, FullScaleCountsPerLanguage) {
    const auto en = detox::testing::synthetic_dataset("en", 19700, Language::en, Source::en_paradetox);
    backends::TableTranslator tr;
    const std::vector<Language> targets = {Language::am, Language::ar, Language::de, Language::es,
                                           Language::hi, Language::ru, Language::uk, Language::zh};
    const auto out = augment::translate_corpus(en, targets, tr, 512);
    std::size_t raw = 0;
    for (const auto& [lang, ds] : out) {
        EXPECT_EQ(ds.size(), 19700u);
        raw += ds.size();
    }
    EXPECT_EQ(raw, 157600u);
}

class FailingTranslator : public backends::Translator {
public:
    std::vector<std::string> translate_batch(std::span<const std::string> texts, Language, Language) override {
        if (texts.size() > 1) throw backends::TranslationError("boom", 1, "boom");
        throw backends::TranslationError("boom", 0, "boom");
    }
    std::string name() const override { return "failing"; }
};

TEST(TranslateCorpus, ErrorsNamePairId) {
    const auto en = english_pairs(3);
    FailingTranslator tr;
    const std::vector<Language> targets = {Language::de};
    try {
        augment::translate_corpus(en, targets, tr, 8);
        FAIL() << "expected an error";
    } catch (const BackendError& e) {
        EXPECT_NE(std::string(e.what()).find("p1"), std::string::npos) << e.what();
    }
    Dataset not_en;
    not_en.add({"x", Language::de, "a", "b", Source::generated});
    EXPECT_THROW(augment::translate_corpus(not_en, targets, tr), FormatError);
}

TEST(ScorePair, IdentityTranslationIsSelfSimilar) {
    backends::HashEmbeddingSimilarity sim;
    backends::HashToxicityScorer tox({{"stupid", 7.0}}, -4.0);
    const corpus::ParallelPair p{"a", Language::en, "you stupid thing", "you thing", Source::en_paradetox};
    const auto s = augment::score_pair(p, p, tox, sim);
    EXPECT_NEAR(s.sim_toxic, 1.0, 1e-6);
    EXPECT_NEAR(s.sim_neutral, 1.0, 1e-6);
}

TEST(ScorePair, EchoesMockScores) {
    LookupToxicity tox({{"T", 0.95}, {"N", 0.05}}, 0.5);
    ConstantSimilarity sim(0.83);
    const corpus::ParallelPair orig{"a", Language::en, "t", "n", Source::en_paradetox};
    const corpus::ParallelPair tr{"a.de", Language::de, "T", "N", Source::translated};
    EXPECT_EQ(augment::score_pair(orig, tr, tox, sim), (PairScores{0.95, 0.05, 0.83, 0.83}));
}

struct RandomCorpus {
    Dataset originals;
    augment::TranslatedCorpus translated;
};

RandomCorpus random_corpus(std::uint64_t seed, std::size_t n, const std::vector<Language>& targets) {
    std::mt19937_64 rng(seed);
    const std::vector<std::string> words = {"stupid", "idiot", "nice", "car", "day", "the", "is", "damn", "good", "you"};
    RandomCorpus rc;
    rc.originals.set_name("en");
    for (std::size_t i = 0; i < n; ++i) {
        rc.originals.add({"p" + std::to_string(i), Language::en, detox::testing::random_sentence(rng, words, 1, 6),
                          detox::testing::random_sentence(rng, words, 1, 6), Source::en_paradetox});
    }
    for (Language l : targets) {
        Dataset ds;
        for (const auto& p : rc.originals) {
            auto perturb = [&](const std::string& s) {
                auto w = detox::text::split_whitespace(s);
                std::uniform_int_distribution<int> op(0, 3);
                switch (op(rng)) {
                    case 0: break;
                    case 1: w.push_back(words[rng() % words.size()]); break;
                    case 2: if (w.size() > 1) w.erase(w.begin()); break;
                    default: w[rng() % w.size()] = words[rng() % words.size()]; break;
                }
                return detox::text::join(w, " ");
            };
            ds.add({p.id + "." + std::string(language_code(l)), l, perturb(p.toxic), perturb(p.neutral),
                    Source::translated});
        }
        rc.translated.emplace(l, std::move(ds));
    }
    return rc;
}

/// Independent filter: per pair, score item by item and test the four
/// clauses literally.
std::set<std::string> naive_filter(const RandomCorpus& rc, const backends::ToxicityScorer& tox,
                                   const backends::SimilarityScorer& sim, const FilterThresholds& th) {
    std::set<std::string> kept;
    for (const auto& [lang, ds] : rc.translated) {
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const std::vector<std::string> t = {ds[i].toxic}, n = {ds[i].neutral};
            const std::vector<std::string> ot = {rc.originals[i].toxic}, on = {rc.originals[i].neutral};
            const double tt = tox.score_batch(t, lang)[0];
            const double tn = tox.score_batch(n, lang)[0];
            const double st = sim.similarity_batch(ot, t)[0];
            const double sn = sim.similarity_batch(on, n)[0];
            if (tt >= th.toxic_min && tn <= th.neutral_max && st >= th.sim_min && sn >= th.sim_min) kept.insert(ds[i].id);
        }
    }
    return kept;
}

std::set<std::string> kept_ids(const augment::FilterResult& r) {
    std::set<std::string> out;
    for (const auto& [lang, ds] : r.kept) {
        for (const auto& p : ds) out.insert(p.id);
    }
    return out;
}

TEST(FilterCorpus, MatchesNaiveFilterOn200RandomPairs) {
    const std::vector<Language> targets = {Language::de, Language::hi};
    const auto rc = random_corpus(3, 100, targets);
    backends::HashToxicityScorer tox({{"stupid", 6.0}, {"idiot", 6.0}, {"damn", 2.5}}, -3.0);
    backends::HashEmbeddingSimilarity sim(64);
    const FilterThresholds th{0.9, 0.1, 0.5};
    const auto result = augment::filter_corpus(rc.originals, rc.translated, tox, sim, th, {16, 2});
    const auto expected = naive_filter(rc, tox, sim, th);
    EXPECT_EQ(kept_ids(result), expected);
    EXPECT_GT(expected.size(), 0u);
    EXPECT_LT(expected.size(), 200u);
    EXPECT_EQ(result.verdicts.size(), 200u);
    for (const auto& v : result.verdicts) EXPECT_EQ(v.keep, v.reasons.empty());
    EXPECT_EQ(result.hist.scored_pairs, 200u);
    for (const auto* h : {&result.hist.tox_toxic, &result.hist.tox_neutral, &result.hist.sim_toxic, &result.hist.sim_neutral}) {
        EXPECT_EQ(h->total(), 200u);
    }
    for (Language l : targets) {
        EXPECT_EQ(result.stats[language_index(l)], result.kept.at(l).size());
    }
}

TEST(FilterCorpus, BatchedScoresEqualItemwise) {
    const std::vector<Language> targets = {Language::es};
    const auto rc = random_corpus(21, 100, targets);
    backends::HashToxicityScorer tox({{"stupid", 5.0}}, -2.0, 0.3);
    backends::HashEmbeddingSimilarity sim;
    const auto& tr = rc.translated.at(Language::es);
    const auto batched = augment::score_pairs(rc.originals, tr, tox, sim, {7, 3});
    for (std::size_t i = 0; i < tr.size(); ++i) {
        EXPECT_EQ(batched[i], augment::score_pair(rc.originals[i], tr[i], tox, sim));
    }
}

TEST(FilterCorpus, PassAllAndFailAllOnSimilarity) {
    const auto en = english_pairs(5);
    backends::TableTranslator tr;
    const std::vector<Language> targets = {Language::ar};
    const auto translated = augment::translate_corpus(en, targets, tr);
    std::map<std::string, double> table;
    for (const auto& p : translated.at(Language::ar)) table[p.toxic] = 1.0;
    LookupToxicity tox_pass(table, 0.0);
    const auto pass = augment::filter_corpus(en, translated, tox_pass, ConstantSimilarity(1.0), FilterThresholds{});
    EXPECT_EQ(pass.kept.at(Language::ar), translated.at(Language::ar));
    EXPECT_EQ(pass.stats[language_index(Language::ar)], 5u);

    const auto fail = augment::filter_corpus(en, translated, tox_pass, ConstantSimilarity(0.0), FilterThresholds{});
    EXPECT_TRUE(fail.kept.at(Language::ar).empty());
    for (const auto& v : fail.verdicts) {
        EXPECT_NE(std::find(v.reasons.begin(), v.reasons.end(), RejectReason::toxic_side_dissimilar), v.reasons.end());
    }
}

TEST(FilterCorpus, AlignmentMismatchIsAnError) {
    const auto en = english_pairs(3);
    augment::TranslatedCorpus bad;
    Dataset short_ds;
    short_ds.add({"p0.de", Language::de, "a", "b", Source::translated});
    bad.emplace(Language::de, short_ds);
    backends::HashToxicityScorer tox({});
    backends::HashEmbeddingSimilarity sim;
    EXPECT_THROW(augment::filter_corpus(en, bad, tox, sim, {}), FormatError);
    Dataset wrong_ids;
    for (int i = 0; i < 3; ++i) wrong_ids.add({"q" + std::to_string(i) + ".de", Language::de, "a", "b", Source::translated});
    augment::TranslatedCorpus bad2;
    bad2.emplace(Language::de, wrong_ids);
    EXPECT_THROW(augment::filter_corpus(en, bad2, tox, sim, {}), FormatError);
}

TEST(FilterCorpus, RelaxingThresholdsNeverDropsPairs) {
    const std::vector<Language> targets = {Language::ru};
    const auto rc = random_corpus(77, 60, targets);
    backends::HashToxicityScorer tox({{"stupid", 4.0}, {"idiot", 4.0}, {"damn", 2.0}}, -1.5, 0.4);
    backends::HashEmbeddingSimilarity sim(32);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        FilterThresholds strict{0.5 + 0.5 * u(rng), 0.45 * u(rng), 2.0 * u(rng) - 1.0};
        FilterThresholds loose{strict.toxic_min - (strict.toxic_min - strict.neutral_max) * 0.5 * u(rng),
                               strict.neutral_max + (strict.toxic_min - strict.neutral_max) * 0.4 * u(rng),
                               strict.sim_min - (strict.sim_min + 1.0) * u(rng)};
        const auto a = kept_ids(augment::filter_corpus(rc.originals, rc.translated, tox, sim, strict));
        const auto b = kept_ids(augment::filter_corpus(rc.originals, rc.translated, tox, sim, loose));
        EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end())) << "trial " << trial;
    }
}

TEST(Histogram, BinsAndEdges) {
    augment::Histogram h{0.0, 1.0, {}};
    h.add(0.0);
    h.add(1.0);
    h.add(0.05);
    h.add(0.049999);
    EXPECT_EQ(h.counts[0], 2u);
    EXPECT_EQ(h.counts[1], 1u);
    EXPECT_EQ(h.counts[19], 1u);
    EXPECT_DOUBLE_EQ(h.bin_left(1), 0.05);
    EXPECT_EQ(h.total(), 4u);
}

TEST(FilterOutputs, VerdictLinesAndHistogramCsv) {
    augment::FilterVerdict v{"p0.de", false, {RejectReason::neutral_side_not_neutral}, {0.95, 0.5, 0.9, 0.9}};
    const auto j = nlohmann::json::parse(augment::verdict_to_json_line(v));
    EXPECT_EQ(j.at("pair_id"), "p0.de");
    EXPECT_EQ(j.at("keep"), false);
    EXPECT_EQ(j.at("reasons")[0], "neutral_side_not_neutral");
    detox::testing::TempDir dir;
    augment::ScoreHistogram hist;
    hist.add({0.95, 0.05, 0.9, -0.2});
    augment::write_histogram_csv(hist, dir / "h.csv");
    const auto csv = detox::testing::read_file(dir / "h.csv");
    EXPECT_EQ(csv.rfind("family,bin_left,bin_right,count\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 * 20);
}

}  // namespace
