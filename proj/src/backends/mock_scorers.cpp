#include "detox/backends/mock_scorers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <future>

#include "detox/error.hpp"
#include "detox/text.hpp"

namespace detox::backends {

namespace {

template <typename Fn>
std::vector<double> run_chunked(std::size_t n, const BatchOptions& opts, bool thread_safe, Fn&& score_range) {
    const std::size_t batch = std::max<std::size_t>(1, opts.batch_size);
    std::vector<double> out(n);
    std::vector<std::pair<std::size_t, std::size_t>> chunks;
    for (std::size_t begin = 0; begin < n; begin += batch) chunks.emplace_back(begin, std::min(n, begin + batch));

    auto run = [&](std::size_t c) {
        const auto [begin, end] = chunks[c];
        std::vector<double> scores = score_range(begin, end);
        if (scores.size() != end - begin) throw BackendError("scorer returned a batch of the wrong length");
        std::copy(scores.begin(), scores.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
    };

    const std::size_t workers = thread_safe ? std::max<std::size_t>(1, opts.workers) : 1;
    if (workers == 1) {
        for (std::size_t c = 0; c < chunks.size(); ++c) run(c);
        return out;
    }
    for (std::size_t wave = 0; wave < chunks.size(); wave += workers) {
        std::vector<std::future<void>> inflight;
        for (std::size_t c = wave; c < std::min(chunks.size(), wave + workers); ++c) {
            inflight.push_back(std::async(std::launch::async, run, c));
        }
        for (auto& f : inflight) f.get();
    }
    return out;
}

std::string strip_punct(std::string_view word) {
    auto is_punct = [](char c) {
        const auto u = static_cast<unsigned char>(c);
        return u < 0x80 && std::ispunct(u);
    };
    while (!word.empty() && is_punct(word.front())) word.remove_prefix(1);
    while (!word.empty() && is_punct(word.back())) word.remove_suffix(1);
    return text::ascii_lower(word);
}

void add_feature(std::vector<double>& vec, std::string_view feature) {
    const std::uint64_t h = text::fnv1a64(feature);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    vec[h % vec.size()] += sign;
}

}  // namespace

std::vector<double> score_toxicity(const ToxicityScorer& scorer, std::span<const std::string> texts, Language lang,
                                   const BatchOptions& opts) {
    return run_chunked(texts.size(), opts, scorer.thread_safe(), [&](std::size_t b, std::size_t e) {
        return scorer.score_batch(texts.subspan(b, e - b), lang);
    });
}

std::vector<double> score_similarity(const SimilarityScorer& scorer, std::span<const std::string> a,
                                     std::span<const std::string> b, const BatchOptions& opts) {
    if (a.size() != b.size()) throw BackendError("similarity inputs differ in length");
    return run_chunked(a.size(), opts, scorer.thread_safe(), [&](std::size_t lo, std::size_t hi) {
        return scorer.similarity_batch(a.subspan(lo, hi - lo), b.subspan(lo, hi - lo));
    });
}

double logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double hash_toxicity(const std::string& text, Language /*lang*/, const std::map<std::string, double>& lexicon,
                     double bias, double jitter) {
    double z = bias;
    for (const auto& raw : text::split_whitespace(text)) {
        auto it = lexicon.find(strip_punct(raw));
        if (it != lexicon.end()) z += it->second;
    }
    if (jitter != 0.0) {
        const double u = static_cast<double>(text::fnv1a64(text) >> 11) * 0x1.0p-53;
        z += jitter * (2.0 * u - 1.0);
    }
    return logistic(z);
}

std::vector<double> HashToxicityScorer::score_batch(std::span<const std::string> texts, Language lang) const {
    std::vector<double> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(hash_toxicity(t, lang, lexicon_, bias_, jitter_));
    return out;
}

double HashEmbeddingSimilarity::similarity(const std::string& a, const std::string& b) const {
    if (a == b) return 1.0;
    auto embed = [this](const std::string& s) {
        std::vector<double> vec(dim_, 0.0);
        for (const auto& w : text::split_whitespace(s)) add_feature(vec, "w:" + strip_punct(w));
        const auto cps = text::split_code_points(text::ascii_lower(s));
        for (std::size_t i = 0; i + 3 <= cps.size(); ++i) add_feature(vec, "c:" + cps[i] + cps[i + 1] + cps[i + 2]);
        return vec;
    };
    const auto ea = embed(a);
    const auto eb = embed(b);
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < dim_; ++i) {
        dot += ea[i] * eb[i];
        na += ea[i] * ea[i];
        nb += eb[i] * eb[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<double> HashEmbeddingSimilarity::similarity_batch(std::span<const std::string> a,
                                                              std::span<const std::string> b) const {
    if (a.size() != b.size()) throw BackendError("similarity inputs differ in length");
    std::vector<double> out;
    out.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(similarity(a[i], b[i]));
    return out;
}

}  // namespace detox::backends
