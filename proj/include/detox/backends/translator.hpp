#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "detox/error.hpp"
#include "detox/language.hpp"

namespace detox::backends {

/// Batch translator. Output length equals input length; src == tgt is the
/// identity.
class Translator {
public:
    virtual ~Translator() = default;
    virtual std::vector<std::string> translate_batch(std::span<const std::string> texts, Language src,
                                                     Language tgt) = 0;
    virtual bool thread_safe() const { return true; }
    virtual std::string name() const = 0;
};

/// Per-item transport for a remote translation service.
class TranslationClient {
public:
    virtual ~TranslationClient() = default;
    /// Throws TransientError for retryable failures; anything else is fatal.
    virtual std::string translate(const std::string& text, Language src, Language tgt) = 0;
};

class TransientError : public BackendError {
public:
    using BackendError::BackendError;
};

class TranslationError : public BackendError {
public:
    TranslationError(const std::string& what, std::size_t index, std::string cause)
        : BackendError(what), index_(index), cause_(std::move(cause)) {}
    std::size_t index() const { return index_; }
    const std::string& cause() const { return cause_; }

private:
    std::size_t index_;
    std::string cause_;
};

struct RetryPolicy {
    std::size_t max_retries = 3;
    std::chrono::milliseconds backoff{200};
    double multiplier = 2.0;
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;

/// Translates item by item, retrying transient failures with exponential
/// backoff (backoff, backoff*multiplier, ...). src == tgt returns the input
/// without contacting the client.
std::vector<std::string> retrying_translate(std::span<const std::string> texts, Language src, Language tgt,
                                            TranslationClient& client, const RetryPolicy& policy,
                                            const SleepFn& sleep = {});

class RetryingTranslator final : public Translator {
public:
    RetryingTranslator(std::unique_ptr<TranslationClient> client, RetryPolicy policy, SleepFn sleep = {})
        : client_(std::move(client)), policy_(policy), sleep_(std::move(sleep)) {}

    std::vector<std::string> translate_batch(std::span<const std::string> texts, Language src,
                                             Language tgt) override;
    bool thread_safe() const override { return false; }
    std::string name() const override { return "retrying"; }

private:
    std::unique_ptr<TranslationClient> client_;
    RetryPolicy policy_;
    SleepFn sleep_;
};

/// Takes (text, src, tgt, item seed) and returns the perturbed translation.
using NoiseHook = std::function<std::string(const std::string&, Language, Language, std::uint64_t)>;

/// Lookup-table translator. Texts missing from the table pass through
/// unchanged; the optional noise hook is then applied to every output.
class TableTranslator final : public Translator {
public:
    using Key = std::tuple<Language, Language, std::string>;

    TableTranslator() = default;
    explicit TableTranslator(std::map<Key, std::string> table, NoiseHook noise = {}, std::uint64_t seed = 0)
        : table_(std::move(table)), noise_(std::move(noise)), seed_(seed) {}

    void add(Language src, Language tgt, std::string text, std::string translation);
    std::vector<std::string> translate_batch(std::span<const std::string> texts, Language src,
                                             Language tgt) override;
    std::string name() const override { return "table"; }

private:
    std::map<Key, std::string> table_;
    NoiseHook noise_;
    std::uint64_t seed_ = 0;
};

/// Noise hook that drops one word with probability `drop_prob`, chosen by a
/// hash of (text, tgt, seed).
NoiseHook word_drop_noise(double drop_prob);

}  // namespace detox::backends
