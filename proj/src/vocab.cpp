#include "bdpo/vocab.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "bdpo/errors.hpp"

namespace bdpo {

Vocabulary::Vocabulary(std::vector<std::string> symbols, TokenId bos_id)
    : symbols_(std::move(symbols)), bos_id_(bos_id) {
    if (symbols_.size() < 2 || symbols_.size() > 256) {
        throw std::invalid_argument("vocabulary size must be in [2, 256], got " +
                                    std::to_string(symbols_.size()));
    }
    std::unordered_set<std::string> seen;
    for (const auto& s : symbols_) {
        if (s.empty()) throw std::invalid_argument("vocabulary symbols must be nonempty");
        if (!seen.insert(s).second) {
            throw std::invalid_argument("duplicate vocabulary symbol: " + s);
        }
    }
    if (bos_id_ < 0 || bos_id_ >= size()) {
        throw std::invalid_argument("bos_id out of range");
    }
}

const std::string& Vocabulary::symbol(TokenId id) const {
    if (id < 0 || id >= size()) throw std::invalid_argument("token id out of range");
    return symbols_[static_cast<size_t>(id)];
}

TokenId Vocabulary::id_of(const std::string& symbol) const {
    for (int i = 0; i < size(); ++i) {
        if (symbols_[static_cast<size_t>(i)] == symbol) return i;
    }
    throw DataError("unknown token symbol: '" + symbol + "'");
}

TokenSeq Vocabulary::encode(const std::string& text) const {
    TokenSeq out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) {
        TokenId id = id_of(tok);
        if (id == bos_id_) {
            throw DataError("reserved symbol '" + tok + "' may not appear in sequences");
        }
        out.push_back(id);
    }
    return out;
}

std::string Vocabulary::decode(const TokenSeq& seq) const {
    std::string out;
    for (size_t i = 0; i < seq.size(); ++i) {
        if (i > 0) out += ' ';
        out += symbol(seq[i]);
    }
    return out;
}

Vocabulary Vocabulary::default_vocabulary() {
    std::vector<std::string> symbols;
    symbols.push_back("<bos>");
    for (const char* prefix : {"qa", "qb", "ra", "rb"}) {
        for (int i = 1; i <= 5; ++i) {
            symbols.push_back(std::string(prefix) + std::to_string(i));
        }
    }
    return Vocabulary(std::move(symbols), 0);
}

void Vocabulary::save_json(const std::string& path) const {
    nlohmann::ordered_json j;
    j["symbols"] = symbols_;
    j["bos_id"] = bos_id_;
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

Vocabulary Vocabulary::load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed vocabulary file " + path + ": " + e.what());
    }
    if (!j.contains("symbols") || !j.contains("bos_id")) {
        throw DataError("vocabulary file " + path + " must contain 'symbols' and 'bos_id'");
    }
    try {
        return Vocabulary(j["symbols"].get<std::vector<std::string>>(),
                          j["bos_id"].get<TokenId>());
    } catch (const std::invalid_argument& e) {
        throw DataError("invalid vocabulary in " + path + ": " + e.what());
    }
}

}  // namespace bdpo
