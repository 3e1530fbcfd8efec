#include "detox/backends/vocabulary.hpp"

#include "detox/error.hpp"
#include "detox/text.hpp"

namespace detox::backends {

Vocabulary::Vocabulary(TokenizerKind kind) : kind_(kind) {
    for (const char* special : {"<pad>", "<bos>", "<eos>", "<unk>"}) add(special);
}

Vocabulary Vocabulary::build(std::span<const std::string> texts, TokenizerKind kind) {
    Vocabulary vocab(kind);
    for (const auto& t : texts) {
        for (const auto& piece : vocab.split(t)) vocab.add(piece);
    }
    return vocab;
}

Vocabulary Vocabulary::from_pieces(std::vector<std::string> pieces, TokenizerKind kind) {
    Vocabulary vocab(kind);
    if (pieces.size() < kFirstRegular) throw FormatError("vocabulary is missing reserved pieces");
    for (TokenId id = 0; id < kFirstRegular; ++id) {
        if (pieces[id] != vocab.pieces_[id]) throw FormatError("vocabulary reserved pieces are out of order");
    }
    for (std::size_t i = kFirstRegular; i < pieces.size(); ++i) {
        if (vocab.add(pieces[i]) != i) throw FormatError("duplicate vocabulary piece '" + pieces[i] + "'");
    }
    return vocab;
}

TokenId Vocabulary::add(std::string_view piece) {
    auto [it, inserted] = index_.emplace(std::string(piece), static_cast<TokenId>(pieces_.size()));
    if (inserted) pieces_.emplace_back(piece);
    return it->second;
}

std::vector<std::string> Vocabulary::split(std::string_view text) const {
    if (kind_ == TokenizerKind::word) return text::split_whitespace(text);
    return text::split_code_points(text);
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
    std::vector<TokenId> ids;
    for (const auto& piece : split(text)) {
        auto it = index_.find(piece);
        ids.push_back(it == index_.end() ? kUnk : it->second);
    }
    return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) {
        if (id < kUnk || id >= pieces_.size()) continue;
        if (kind_ == TokenizerKind::word && !out.empty()) out += ' ';
        out += pieces_[id];
    }
    return out;
}

}  // namespace detox::backends
