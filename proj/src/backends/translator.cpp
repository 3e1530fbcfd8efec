#include "detox/backends/translator.hpp"

#include <thread>

#include "detox/text.hpp"

namespace detox::backends {

std::vector<std::string> retrying_translate(std::span<const std::string> texts, Language src, Language tgt,
                                            TranslationClient& client, const RetryPolicy& policy,
                                            const SleepFn& sleep) {
    if (src == tgt) return {texts.begin(), texts.end()};
    const SleepFn do_sleep = sleep ? sleep : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };

    std::vector<std::string> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        auto delay = policy.backoff;
        for (std::size_t attempt = 0;; ++attempt) {
            try {
                out.push_back(client.translate(texts[i], src, tgt));
                break;
            } catch (const TransientError& e) {
                if (attempt >= policy.max_retries) {
                    throw TranslationError("translation of item " + std::to_string(i) + " failed after " +
                                               std::to_string(attempt + 1) + " attempts: " + e.what(),
                                           i, e.what());
                }
                do_sleep(delay);
                delay = std::chrono::milliseconds(
                    static_cast<std::chrono::milliseconds::rep>(static_cast<double>(delay.count()) * policy.multiplier));
            } catch (const std::exception& e) {
                throw TranslationError("translation of item " + std::to_string(i) + " failed: " + e.what(), i,
                                       e.what());
            }
        }
    }
    return out;
}

std::vector<std::string> RetryingTranslator::translate_batch(std::span<const std::string> texts, Language src,
                                                             Language tgt) {
    return retrying_translate(texts, src, tgt, *client_, policy_, sleep_);
}

void TableTranslator::add(Language src, Language tgt, std::string text, std::string translation) {
    table_[Key{src, tgt, std::move(text)}] = std::move(translation);
}

std::vector<std::string> TableTranslator::translate_batch(std::span<const std::string> texts, Language src,
                                                          Language tgt) {
    if (src == tgt) return {texts.begin(), texts.end()};
    std::vector<std::string> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        auto it = table_.find(Key{src, tgt, t});
        std::string translated = it != table_.end() ? it->second : t;
        if (noise_) {
            const std::uint64_t item_seed = text::fnv1a64(std::string(language_code(tgt)) + "|" + t, seed_ ^ 0x9e3779b97f4a7c15ULL);
            translated = noise_(translated, src, tgt, item_seed);
        }
        out.push_back(std::move(translated));
    }
    return out;
}

NoiseHook word_drop_noise(double drop_prob) {
    return [drop_prob](const std::string& text, Language, Language, std::uint64_t seed) {
        const double u = static_cast<double>(seed >> 11) * 0x1.0p-53;
        auto words = text::split_whitespace(text);
        if (u >= drop_prob || words.size() < 2) return text;
        const std::size_t victim = (seed >> 3) % words.size();
        words.erase(words.begin() + static_cast<std::ptrdiff_t>(victim));
        return text::join(words, " ");
    };
}

}  // namespace detox::backends
