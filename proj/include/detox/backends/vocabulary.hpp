#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace detox::backends {

using TokenId = std::uint32_t;

enum class TokenizerKind : std::uint8_t { word, character };

/// Closed vocabulary with four reserved ids. Unknown pieces map to <unk>.
class Vocabulary {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kBos = 1;
    static constexpr TokenId kEos = 2;
    static constexpr TokenId kUnk = 3;
    static constexpr TokenId kFirstRegular = 4;

    explicit Vocabulary(TokenizerKind kind = TokenizerKind::word);

    /// Builds from a corpus; pieces are added in first-seen order.
    static Vocabulary build(std::span<const std::string> texts, TokenizerKind kind);
    /// Restores from an ordered piece list (reserved ids included).
    static Vocabulary from_pieces(std::vector<std::string> pieces, TokenizerKind kind);

    TokenizerKind kind() const { return kind_; }
    std::size_t size() const { return pieces_.size(); }
    const std::vector<std::string>& pieces() const { return pieces_; }
    const std::string& piece(TokenId id) const { return pieces_.at(id); }

    TokenId add(std::string_view piece);
    std::vector<std::string> split(std::string_view text) const;
    std::vector<TokenId> encode(std::string_view text) const;
    /// <pad>, <bos> and <eos> are skipped; <unk> renders literally.
    std::string decode(std::span<const TokenId> ids) const;

private:
    TokenizerKind kind_;
    std::vector<std::string> pieces_;
    std::unordered_map<std::string, TokenId> index_;
};

}  // namespace detox::backends
