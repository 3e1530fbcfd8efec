#pragma once

#include <chrono>
#include <string>

#include "detox/backends/translator.hpp"

namespace detox::backends {

inline constexpr const char* kTranslatorCredentialEnv = "DETOX_TRANSLATOR_KEY";

struct HttpTranslatorOptions {
    /// Full URL of a Google-Translate-v2-compatible endpoint, e.g.
    /// "https://translation.googleapis.com/language/translate/v2".
    std::string endpoint;
    /// Name of the environment variable holding the API key.
    std::string credential_env = kTranslatorCredentialEnv;
    std::chrono::seconds timeout{30};
};

/// POSTs {"q", "source", "target", "format": "text"} and reads
/// data.translations[0].translatedText. 429 and 5xx responses and transport
/// failures are transient; other statuses are fatal.
class HttpTranslationClient final : public TranslationClient {
public:
    explicit HttpTranslationClient(HttpTranslatorOptions opts);
    std::string translate(const std::string& text, Language src, Language tgt) override;

private:
    HttpTranslatorOptions opts_;
    std::string scheme_host_port_;
    std::string path_;
    std::string key_;
};

}  // namespace detox::backends
