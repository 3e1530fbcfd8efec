#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace detox {

/// The nine competition languages, in leaderboard column order.
enum class Language : std::uint8_t { am, ar, de, en, es, hi, ru, uk, zh };

inline constexpr std::size_t kLanguageCount = 9;

inline constexpr std::array<Language, kLanguageCount> kAllLanguages = {
    Language::am, Language::ar, Language::de, Language::en, Language::es,
    Language::hi, Language::ru, Language::uk, Language::zh,
};

std::string_view language_code(Language lang);
std::string_view language_name(Language lang);
std::optional<Language> parse_language(std::string_view code);

constexpr std::size_t language_index(Language lang) { return static_cast<std::size_t>(lang); }

/// Dense per-language table indexed by `Language`.
template <typename T>
using PerLanguage = std::array<T, kLanguageCount>;

}  // namespace detox
