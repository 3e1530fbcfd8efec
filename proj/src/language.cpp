#include "detox/language.hpp"

namespace detox {

namespace {

constexpr std::array<std::string_view, kLanguageCount> kCodes = {
    "am", "ar", "de", "en", "es", "hi", "ru", "uk", "zh",
};

constexpr std::array<std::string_view, kLanguageCount> kNames = {
    "Amharic", "Arabic", "German", "English", "Spanish",
    "Hindi", "Russian", "Ukrainian", "Chinese",
};

}  // namespace

std::string_view language_code(Language lang) { return kCodes[language_index(lang)]; }

std::string_view language_name(Language lang) { return kNames[language_index(lang)]; }

std::optional<Language> parse_language(std::string_view code) {
    for (std::size_t i = 0; i < kLanguageCount; ++i) {
        if (kCodes[i] == code) return kAllLanguages[i];
    }
    return std::nullopt;
}

}  // namespace detox
