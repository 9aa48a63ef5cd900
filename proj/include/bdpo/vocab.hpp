#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bdpo {

using TokenId = int32_t;
using TokenSeq = std::vector<TokenId>;

// Symbolic token vocabulary. One index is reserved as the begin-of-sequence
// marker; it is prepended to every model context and must never occur inside
// query or response sequences.
class Vocabulary {
public:
    Vocabulary(std::vector<std::string> symbols, TokenId bos_id);

    int size() const { return static_cast<int>(symbols_.size()); }
    TokenId bos_id() const { return bos_id_; }
    const std::vector<std::string>& symbols() const { return symbols_; }

    const std::string& symbol(TokenId id) const;
    // Throws DataError for unknown symbols.
    TokenId id_of(const std::string& symbol) const;

    // Whitespace-separated symbols <-> token ids. encode() rejects the
    // bos symbol since it is reserved for context construction.
    TokenSeq encode(const std::string& text) const;
    std::string decode(const TokenSeq& seq) const;

    // 21 symbols: "<bos>" plus four 5-symbol families (qa*, qb*, ra*, rb*)
    // used by the synthetic corpus generator.
    static Vocabulary default_vocabulary();

    void save_json(const std::string& path) const;
    static Vocabulary load_json(const std::string& path);

private:
    std::vector<std::string> symbols_;
    TokenId bos_id_;
};

}  // namespace bdpo
