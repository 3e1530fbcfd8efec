// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chrf_oracle.hpp"
#include "decode_oracles.hpp"
#include "detox/augment.hpp"
#include "detox/backends/mock_scorers.hpp"
#include "detox/backends/ngram_model.hpp"
#include "detox/corpus.hpp"
#include "detox/decode.hpp"
#include "detox/evalkit.hpp"
#include "detox/orpo.hpp"
#include "detox/pipeline/run_dir.hpp"
#include "detox/sft.hpp"
#include "detox/text.hpp"
#include "leaderboard_fixture.hpp"
#include "toy_tasks.hpp"

namespace {

using namespace detox;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects the first failure message; later checks still run.
class Checker {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok && pass_) {
            pass_ = false;
            first_ = what;
        }
    }
    Outcome done(const std::string& summary) const { return {pass_, pass_ ? summary : first_}; }

private:
    bool pass_ = true;
    std::string first_;
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

// 1 ----------------------------------------------------------------------

Outcome mixture_bookkeeping() {
    const auto t0 = Clock::now();
    Checker c;
    const std::vector<std::tuple<std::string, std::size_t, Language, corpus::Source>> parts = {
        {"en_paradetox", 19700, Language::en, corpus::Source::en_paradetox},
        {"ru_paradetox", 11100, Language::ru, corpus::Source::ru_paradetox},
        {"translations", 40500, Language::de, corpus::Source::translated},
        {"multilingual_paradetox", 3600, Language::uk, corpus::Source::multilingual_paradetox},
    };
    std::vector<corpus::Dataset> datasets;
    corpus::MixtureSpec spec;
    for (const auto& [name, n, lang, src] : parts) {
        corpus::Dataset ds(name);
        ds.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            ds.add({name + "-" + std::to_string(i), lang, "toxic " + std::to_string(i), "neutral " + std::to_string(i), src});
        }
        datasets.push_back(std::move(ds));
        spec.entries.push_back({name, n});
    }
    const auto mix = corpus::assemble_mixture(datasets, spec);
    c.expect(mix.size() == 74900, "mixture size " + std::to_string(mix.size()));
    std::size_t at = 0;
    for (const auto& ds : datasets) {
        for (const auto& p : ds) {
            const auto& m = mix[at++];
            c.expect(m.id == ds.name() + "/" + p.id && m.toxic == p.toxic && m.neutral == p.neutral && m.lang == p.lang &&
                         m.source == p.source,
                     "entry " + std::to_string(at - 1) + " differs from its source pair");
        }
    }
    auto wrong = spec;
    wrong.entries[2].expected = 40499;
    bool threw = false;
    try {
        (void)corpus::assemble_mixture(datasets, wrong);
    } catch (const std::exception&) {
        threw = true;
    }
    c.expect(threw, "size mismatch was not rejected");
    const double s = seconds_since(t0);
    c.expect(s < 5.0, "took " + fmt("%.2f s", s));
    return c.done("74900 pairs verified entry by entry in " + fmt("%.2f s", s));
}

// 2 ----------------------------------------------------------------------

struct RandomCorpus {
    corpus::Dataset originals;
    augment::TranslatedCorpus translated;
};

RandomCorpus random_corpus(std::uint64_t seed, std::size_t n_per_lang, const std::vector<Language>& targets) {
    static const std::vector<std::string> words = {"stupid", "idiot", "nice",  "car",  "day",
                                                   "the",    "is",    "damn",  "good", "you"};
    std::mt19937_64 rng(seed);
    auto sentence = [&] {
        std::vector<std::string> w(1 + rng() % 6);
        for (auto& x : w) x = words[rng() % words.size()];
        return text::join(w, " ");
    };
    auto perturb = [&](const std::string& s) {
        auto w = text::split_whitespace(s);
        switch (rng() % 4) {
            case 0: break;
            case 1: w.push_back(words[rng() % words.size()]); break;
            case 2: if (w.size() > 1) w.erase(w.begin()); break;
            default: w[rng() % w.size()] = words[rng() % words.size()]; break;
        }
        return text::join(w, " ");
    };
    RandomCorpus rc;
    for (std::size_t i = 0; i < n_per_lang; ++i) {
        rc.originals.add({"p" + std::to_string(i), Language::en, sentence(), sentence(), corpus::Source::en_paradetox});
    }
    for (Language l : targets) {
        corpus::Dataset ds;
        for (const auto& p : rc.originals) {
            ds.add({p.id + "." + std::string(language_code(l)), l, perturb(p.toxic), perturb(p.neutral),
                    corpus::Source::translated});
        }
        rc.translated.emplace(l, std::move(ds));
    }
    return rc;
}

std::set<std::string> naive_filter(const RandomCorpus& rc, const backends::ToxicityScorer& tox,
                                   const backends::SimilarityScorer& sim, const augment::FilterThresholds& th) {
    std::set<std::string> kept;
    for (const auto& [lang, ds] : rc.translated) {
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const std::vector<std::string> t = {ds[i].toxic}, n = {ds[i].neutral};
            const std::vector<std::string> ot = {rc.originals[i].toxic}, on = {rc.originals[i].neutral};
            const bool ok = tox.score_batch(t, lang)[0] >= th.toxic_min && tox.score_batch(n, lang)[0] <= th.neutral_max &&
                            sim.similarity_batch(ot, t)[0] >= th.sim_min && sim.similarity_batch(on, n)[0] >= th.sim_min;
            if (ok) kept.insert(ds[i].id);
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

Outcome filter_oracle() {
    Checker c;
    const auto rc = random_corpus(2024, 250, {Language::de, Language::es, Language::hi, Language::zh});
    const backends::HashToxicityScorer tox({{"stupid", 6.0}, {"idiot", 6.0}, {"damn", 2.5}}, -3.0, 0.5);
    const backends::HashEmbeddingSimilarity sim(64);
    const augment::FilterThresholds th{0.9, 0.1, 0.5};
    const auto got = kept_ids(augment::filter_corpus(rc.originals, rc.translated, tox, sim, th, {32, 2}));
    const auto want = naive_filter(rc, tox, sim, th);
    c.expect(got == want, "filter kept " + std::to_string(got.size()) + " pairs, naive filter " + std::to_string(want.size()));
    c.expect(!want.empty() && want.size() < 1000, "degenerate corpus: naive filter kept " + std::to_string(want.size()));

    const auto small = random_corpus(99, 100, {Language::ru, Language::ar});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int violations = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const augment::FilterThresholds strict{0.5 + 0.5 * u(rng), 0.45 * u(rng), 2.0 * u(rng) - 1.0};
        const augment::FilterThresholds loose{
            strict.toxic_min - (strict.toxic_min - strict.neutral_max) * 0.5 * u(rng),
            strict.neutral_max + (strict.toxic_min - strict.neutral_max) * 0.4 * u(rng),
            strict.sim_min - (strict.sim_min + 1.0) * u(rng)};
        const auto a = kept_ids(augment::filter_corpus(small.originals, small.translated, tox, sim, strict));
        const auto b = kept_ids(augment::filter_corpus(small.originals, small.translated, tox, sim, loose));
        if (!std::includes(b.begin(), b.end(), a.begin(), a.end())) ++violations;
    }
    c.expect(violations == 0, std::to_string(violations) + " monotonicity violations in 500 trials");
    return c.done("1000 pairs: " + std::to_string(got.size()) + " kept, equal to naive filter; 500/500 relaxation trials");
}

// 3 ----------------------------------------------------------------------

std::unique_ptr<backends::NgramToyModel> random_model(std::size_t regular, std::uint64_t seed, double scale) {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < regular; ++i) words.push_back("w" + std::to_string(i));
    const std::vector<std::string> corpus = {text::join(words, " ")};
    return std::make_unique<backends::NgramToyModel>(
        backends::Vocabulary::build(corpus, backends::TokenizerKind::word), backends::NgramModelOptions{2, scale, seed});
}

decode::DecodeParams single_group(std::size_t beams, double rep, std::size_t max_len) {
    decode::DecodeParams p;
    p.num_beams = beams;
    p.num_groups = 1;
    p.diversity_penalty = 0.0;
    p.repetition_penalty = rep;
    p.max_new_tokens = max_len;
    p.shortlist_k = 1;
    return p;
}

Outcome dbs_correctness() {
    Checker c;
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        auto model = random_model(8, 1000 + trial, 1.5);
        std::vector<backends::TokenId> prompt(1 + rng() % 6);
        for (auto& t : prompt) t = static_cast<backends::TokenId>(backends::Vocabulary::kFirstRegular + rng() % 8);
        const std::size_t width = 1 + rng() % 6;
        const double rep = 1.0 + 0.5 * static_cast<double>(rng() % 3) / 2.0;
        const auto got = decode::diverse_beam_search(*model, prompt, single_group(width, rep, 7));
        const auto want = oracle::plain_beam_search(*model, prompt, width, rep, 7);
        bool same = got.size() == want.size();
        for (std::size_t i = 0; same && i < got.size(); ++i) {
            same = got[i].tokens == want[i].tokens && got[i].score == want[i].score && got[i].finished == want[i].finished;
        }
        c.expect(same, "(a) prompt " + std::to_string(trial) + " differs from plain beam search");
    }

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto model = random_model(1, seed, 2.0);
        const std::vector<backends::TokenId> prompt = {4, 4};
        const auto all = oracle::enumerate_all(*model, prompt, 1.2, 3);
        c.expect(model->vocab_size() == 5 && all.size() == 85, "(b) enumeration setup");
        // Every step keeps at most 21 live hypotheses, so 25 beams never prune
        // before the final step and must return the exact top 25.
        const auto got = decode::diverse_beam_search(*model, prompt, single_group(25, 1.2, 3));
        bool same = got.size() == 25;
        for (std::size_t i = 0; same && i < got.size(); ++i) {
            same = got[i].tokens == all[i].tokens && got[i].finished == all[i].finished &&
                   std::abs(got[i].score - all[i].score) < 1e-12;
        }
        c.expect(same, "(b) seed " + std::to_string(seed) + " differs from brute-force enumeration");
        for (const auto& b : decode::diverse_beam_search(*model, prompt, single_group(4, 1.2, 3))) {
            auto it = std::find_if(all.begin(), all.end(), [&](const oracle::RefHyp& h) {
                return h.tokens == b.tokens && h.finished == b.finished;
            });
            c.expect(it != all.end() && std::abs(it->score - b.score) < 1e-12, "(b) 4-beam score differs from enumeration");
        }
    }

    auto peaked = random_model(6, 0, 0.0);
    peaked->weight(0, backends::Vocabulary::kBos, 4) = 6.0;
    peaked->weight(0, backends::Vocabulary::kBos, 5) = 1.0;
    peaked->bias(backends::Vocabulary::kEos) = 1.0;
    const std::vector<backends::TokenId> prompt = {6, 7};
    const auto beams = decode::diverse_beam_search(*peaked, prompt, decode::DecodeParams{});
    std::set<backends::TokenId> firsts;
    std::set<std::size_t> groups;
    for (const auto& b : beams) {
        if (!b.tokens.empty()) firsts.insert(b.tokens[0]);
        groups.insert(b.group);
    }
    c.expect(beams.size() == 10, "(c) " + std::to_string(beams.size()) + " hypotheses");
    c.expect(firsts.size() >= 2, "(c) only one distinct first token");
    c.expect(groups.size() == 5, "(c) groups missing");
    return c.done("(a) 100/100 prompts match plain beam search; (b) 20 brute-force instances; (c) 10 hypotheses, " +
                  std::to_string(firsts.size()) + " distinct first tokens");
}

// 4 ----------------------------------------------------------------------

class TableToxicity : public backends::ToxicityScorer {
public:
    explicit TableToxicity(std::map<std::string, double> t) : t_(std::move(t)) {}
    std::vector<double> score_batch(std::span<const std::string> texts, Language) const override {
        std::vector<double> out;
        for (const auto& s : texts) out.push_back(t_.at(s));
        return out;
    }
    std::string name() const override { return "table"; }

private:
    std::map<std::string, double> t_;
};

class TableSimilarity : public backends::SimilarityScorer {
public:
    explicit TableSimilarity(std::map<std::string, double> t) : t_(std::move(t)) {}
    std::vector<double> similarity_batch(std::span<const std::string> a, std::span<const std::string> b) const override {
        std::vector<double> out;
        for (std::size_t i = 0; i < a.size(); ++i) out.push_back(t_.at(b[i]));
        return out;
    }
    std::string name() const override { return "table"; }

private:
    std::map<std::string, double> t_;
};

Outcome selection() {
    Checker c;
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng() % 10;
        const bool coarse = trial % 2 == 0;
        std::map<std::string, double> tox, sim;
        decode::CandidateSet cset;
        cset.id = "set" + std::to_string(trial);
        cset.source_toxic = "src";
        for (std::size_t i = 0; i < n; ++i) {
            decode::Candidate cand;
            cand.text = "c" + std::to_string(i);
            cand.logprob_norm = coarse ? -static_cast<double>(rng() % 3) : -u(rng);
            tox[cand.text] = coarse ? static_cast<double>(rng() % 3) / 4.0 : u(rng);
            sim[cand.text] = coarse ? static_cast<double>(rng() % 3) / 2.0 : 2 * u(rng) - 1;
            cset.candidates.push_back(cand);
        }
        auto base = cset;
        decode::score_candidates(base, TableToxicity(tox), TableSimilarity(sim));
        const auto idx = decode::select_best_index(base);
        c.expect(idx == oracle::naive_best(base), "naive max-scan disagrees on set " + std::to_string(trial));
        const auto best = base.candidates[idx].text;

        if (coarse) continue;
        const double k = 0.05 + 4.0 * u(rng);
        auto sim_scaled = sim;
        for (auto& [t, v] : sim_scaled) v *= k;
        auto a = cset;
        decode::score_candidates(a, TableToxicity(tox), TableSimilarity(sim_scaled));
        c.expect(decode::select_best(a).text == best, "argmax moved under similarity scaling, set " + std::to_string(trial));
        // Scale neutrality = 1 - tox by k' in (0, 1].
        const double kn = 0.05 + 0.95 * u(rng);
        auto tox_scaled = tox;
        for (auto& [t, v] : tox_scaled) v = 1.0 - kn * (1.0 - v);
        auto b = cset;
        decode::score_candidates(b, TableToxicity(tox_scaled), TableSimilarity(sim));
        c.expect(decode::select_best(b).text == best, "argmax moved under neutrality scaling, set " + std::to_string(trial));
    }
    return c.done("1000 random sets match the naive scan; argmax fixed under positive scaling of both score families");
}

// 5 ----------------------------------------------------------------------

Outcome orpo_math() {
    Checker c;
    double worst_ln2 = 0.0;
    for (double l : {-0.001, -0.3, -1.0, -4.0, -12.0}) {
        worst_ln2 = std::max(worst_ln2, std::abs(orpo::orpo_loss(l, l, 1.0, 0.1).or_term - std::log(2.0)));
    }
    c.expect(worst_ln2 <= 1e-12, "or_term at equal likelihoods off ln 2 by " + fmt("%.3g", worst_ln2));

    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> u(-5.0, -0.05);
    const double h = 1e-6;
    double worst_rel = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double lc = u(rng), lr = u(rng), nll = -lc, beta = 0.1;
        const auto l = orpo::orpo_loss(lc, lr, nll, beta);
        // The loss's dependence on logp_chosen through the odds-ratio term.
        auto f = [&](double a, double b) { return orpo::orpo_loss(a, b, nll, beta).loss; };
        const double fd_c = (f(lc + h, lr) - f(lc - h, lr)) / (2 * h);
        const double fd_r = (f(lc, lr + h) - f(lc, lr - h)) / (2 * h);
        const double an_c = beta * l.d_or_d_chosen;
        const double an_r = beta * l.d_or_d_rejected;
        worst_rel = std::max(worst_rel, std::abs(an_c - fd_c) / std::max(std::abs(fd_c), 1e-8));
        worst_rel = std::max(worst_rel, std::abs(an_r - fd_r) / std::max(std::abs(fd_r), 1e-8));
    }
    c.expect(worst_rel <= 1e-4, "finite-difference relative error " + fmt("%.3g", worst_rel));

    const auto prefs = toy::good_preference_pairs(64, 6);
    std::vector<sft::Example> chosen;
    for (const auto& p : prefs) chosen.push_back({p.prompt, p.chosen});
    orpo::OrpoConfig cfg;
    cfg.beta = 0.0;
    cfg.train = toy::toy_train_config(2, 3);
    auto a = toy::make_model();
    auto b = toy::make_model();
    const auto ro = orpo::train_orpo(*a, prefs, cfg);
    const auto rs = sft::train_sft(*b, chosen, chosen, cfg.train);
    double worst_curve = 0.0;
    c.expect(ro.step_losses.size() == rs.step_losses.size(), "step counts differ");
    for (std::size_t i = 0; i < std::min(ro.step_losses.size(), rs.step_losses.size()); ++i) {
        worst_curve = std::max(worst_curve, std::abs(ro.step_losses[i] - rs.step_losses[i]));
    }
    for (std::size_t e = 0; e < std::min(ro.epochs.size(), rs.epochs.size()); ++e) {
        worst_curve = std::max(worst_curve, std::abs(ro.epochs[e].val_loss - rs.epochs[e].val_loss));
    }
    c.expect(worst_curve <= 1e-6, "beta=0 curve differs from SFT by " + fmt("%.3g", worst_curve));
    return c.done("ln 2 error " + fmt("%.1e", worst_ln2) + "; gradient rel error " + fmt("%.1e", worst_rel) +
                  "; beta=0 vs SFT curve " + fmt("%.1e", worst_curve));
}

// 6 ----------------------------------------------------------------------

Outcome toy_learning() {
    const auto t0 = Clock::now();
    Checker c;
    std::string summary;

    {
        const auto all = toy::copy_task(250, 1);
        const std::vector<sft::Example> train(all.begin(), all.begin() + 200), val(all.begin() + 200, all.end());
        auto model = toy::make_model();
        const auto r = sft::train_sft(*model, train, val, toy::toy_train_config(2, 1));
        const double before = r.initial_val_loss.value_or(0.0);
        const double after = r.epochs.empty() ? before : r.epochs.back().val_loss;
        c.expect(after <= 0.5 * before, "copy task val loss " + fmt("%.3f", before) + " -> " + fmt("%.3f", after));
        summary += "copy val loss " + fmt("%.3f", before) + " -> " + fmt("%.3f", after);
    }
    {
        const auto prefs = toy::good_preference_pairs(100, 11);
        orpo::OrpoConfig cfg;
        cfg.train = toy::toy_train_config(3, 2);
        auto model = toy::make_model();
        const auto r = orpo::train_orpo(*model, prefs, cfg);
        const bool have = !r.epochs.empty() && r.epochs.front().margin && r.epochs.back().margin;
        c.expect(have && *r.epochs.front().margin < *r.epochs.back().margin, "ORPO margin did not increase");
        if (have) {
            summary += "; margin " + fmt("%.3f", *r.epochs.front().margin) + " -> " + fmt("%.3f", *r.epochs.back().margin);
        }
    }
    {
        const auto train = toy::bad_to_good_task(400, 21);
        const auto val = toy::bad_to_good_task(50, 22);
        const auto test = toy::bad_to_good_task(100, 23);
        auto model = toy::make_model();
        (void)sft::train_sft(*model, train, val, toy::toy_train_config(4, 3));
        const sft::PrefixTable prefixes;
        std::vector<decode::DetoxInput> inputs;
        for (std::size_t i = 0; i < test.size(); ++i) {
            inputs.push_back({"t" + std::to_string(i), Language::en, *sft::strip_prefix(Language::en, test[i].prompt, prefixes)});
        }
        const backends::HashToxicityScorer tox({{"bad", 7.0}}, -4.0);
        const backends::HashEmbeddingSimilarity sim;
        decode::DecodeParams params;
        params.max_new_tokens = 12;
        const auto result = decode::detoxify_batch(*model, inputs, params, tox, sim, prefixes);
        std::size_t correct = 0;
        for (const auto& out : result.outputs) {
            if (out.best.text == test[out.input_index].target) ++correct;
        }
        c.expect(result.errors.empty(), std::to_string(result.errors.size()) + " detox items failed");
        c.expect(correct >= 95, "BAD->GOOD exact-match accuracy " + std::to_string(correct) + "/100");
        summary += "; BAD->GOOD " + std::to_string(correct) + "/100 exact";
    }
    const double s = seconds_since(t0);
    c.expect(s < 180.0, "toy training took " + fmt("%.1f s", s));
    return c.done(summary + " in " + fmt("%.1f s", s));
}

// 7 ----------------------------------------------------------------------

Outcome chrf_checks() {
    Checker c;
    c.expect(evalkit::chrf("the cat sat", "the cat sat") == 1.0, "identity is not exactly 1");
    c.expect(evalkit::chrf("Привет мир", "Привет мир") == 1.0, "Cyrillic identity is not exactly 1");
    c.expect(evalkit::chrf("", "the cat") == 0.0, "empty hypothesis is not exactly 0");
    std::mt19937_64 rng(7);
    const std::string alphabet = "abcd e";
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        auto rand_str = [&] {
            std::string s(1 + rng() % 16, ' ');
            for (auto& ch : s) ch = alphabet[rng() % alphabet.size()];
            return s;
        };
        const auto h = rand_str(), r = rand_str();
        worst = std::max(worst, std::abs(evalkit::chrf(h, r) - oracle::brute_chrf(h, r, 6, 2.0)));
    }
    c.expect(worst <= 1e-9, "oracle deviation " + fmt("%.3g", worst));
    return c.done("identity 1.0, empty 0.0, 200 random pairs within " + fmt("%.1e", worst) + " of the counting oracle");
}

// 8 ----------------------------------------------------------------------

Outcome report_fidelity() {
    Checker c;
    std::vector<std::pair<std::string, evalkit::JointReport>> reports;
    for (const auto& row : toy::published_rows()) reports.emplace_back(row.system, toy::report_of(row));
    std::mt19937_64 rng(3);
    std::shuffle(reports.begin(), reports.end(), rng);
    const auto table = evalkit::render_leaderboard(reports);
    c.expect(table.find("| System | Amharic | Arabic | German | English | Spanish | Hindi | Russian | Ukrainian | Chinese | Avg J |") !=
                 std::string::npos,
             "column order");
    std::size_t pos = 0;
    for (const auto& row : toy::published_rows()) {
        std::string expected = "| " + std::string(row.system) + " |";
        for (double j : row.joint) expected += " " + fmt("%.3f", j) + " |";
        expected += " " + std::string(row.avg) + " |";
        const auto at = table.find(expected);
        c.expect(at != std::string::npos, "row not rendered as " + expected);
        c.expect(at == std::string::npos || at > pos, "row out of order: " + std::string(row.system));
        if (at != std::string::npos) pos = at;
    }
    return c.done("8 systems rendered in published order, 0.523 .. 0.340, 3 decimals");
}

// 9 ----------------------------------------------------------------------

int run_tool(const std::vector<std::string>& args, const fs::path& log) {
    std::string cmd = std::string("\"") + DETOX_BIN + "\"";
    for (const auto& a : args) cmd += " \"" + a + "\"";
    cmd += " >>\"" + log.string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    return rc;
}

std::map<std::string, std::string> digest_tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const auto rel = e.path().lexically_relative(root).generic_string();
        if (rel == "manifest.json") continue;
        out[rel] = pipeline::sha256_file(e.path());
    }
    return out;
}

Outcome end_to_end() {
    const auto t0 = Clock::now();
    Checker c;
    const fs::path work = fs::temp_directory_path() / ("detox-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(work);
    fs::create_directories(work);
    for (const auto& e : fs::directory_iterator(DETOX_FIXTURE_DIR)) fs::copy(e.path(), work / e.path().filename());
    const fs::path log = work / "tool.log";
    const std::string cfg = (work / "config.json").string();
    const std::string run = (work / "run").string();

    const std::vector<std::vector<std::string>> steps = {
        {"augment"},
        {"filter"},
        {"mix"},
        {"train-sft"},
        {"generate", "--split", "orpo", "--model", "sft"},
        {"rerank", "--split", "orpo", "--model", "sft"},
        {"build-prefs"},
        {"train-orpo"},
        {"generate", "--split", "eval", "--model", "sft"},
        {"rerank", "--split", "eval", "--model", "sft"},
        {"generate", "--split", "eval", "--model", "orpo"},
        {"rerank", "--split", "eval", "--model", "orpo"},
        {"evaluate", "--model", "sft"},
        {"evaluate", "--model", "orpo"},
        {"report"},
    };
    auto run_all = [&](const char* pass) {
        for (const auto& s : steps) {
            auto args = s;
            args.insert(args.begin() + 1, {"--config", cfg, "--run-dir", run});
            const int rc = run_tool(args, log);
            c.expect(rc == 0, std::string(pass) + " pass: stage '" + s[0] + "' exited with " + std::to_string(rc) +
                                  " (see " + log.string() + ")");
        }
    };
    run_all("first");
    const auto first = digest_tree(run);
    run_all("second");
    const auto second = digest_tree(run);
    c.expect(first.size() > 20, "only " + std::to_string(first.size()) + " artifacts produced");
    c.expect(fs::exists(fs::path(run) / "report" / "leaderboard.md"), "no leaderboard produced");
    std::size_t differing = 0;
    std::string example;
    for (const auto& [rel, digest] : first) {
        auto it = second.find(rel);
        if (it == second.end() || it->second != digest) {
            ++differing;
            if (example.empty()) example = rel;
        }
    }
    c.expect(differing == 0 && first.size() == second.size(),
             std::to_string(differing) + " artifacts changed on re-run, e.g. " + example);
    const double s = seconds_since(t0);
    c.expect(s < 300.0, "pipeline took " + fmt("%.1f s", s));
    if (c.done("").pass) fs::remove_all(work);
    return c.done(std::to_string(steps.size()) + " stage runs x2, " + std::to_string(first.size()) +
                  " artifacts byte-identical, " + fmt("%.1f s", s));
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"AC1 mixture bookkeeping", mixture_bookkeeping},
        {"AC2 filter oracle and monotonicity", filter_oracle},
        {"AC3 diverse beam search", dbs_correctness},
        {"AC4 rerank selection", selection},
        {"AC5 ORPO math", orpo_math},
        {"AC6 toy learning", toy_learning},
        {"AC7 chrF", chrf_checks},
        {"AC8 leaderboard fidelity", report_fidelity},
        {"AC9 end-to-end CLI", end_to_end},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
