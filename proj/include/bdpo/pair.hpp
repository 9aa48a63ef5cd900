#pragma once

#include <stdexcept>
#include <string>

#include "bdpo/vocab.hpp"

namespace bdpo {

// One preference record: a query, the preferred response, the dispreferred
// response, and a safety label for the query.
struct PreferencePair {
    std::string id;
    TokenSeq query;
    TokenSeq preferred;
    TokenSeq dispreferred;
    bool safe_query = true;

    void validate() const {
        if (id.empty()) throw std::invalid_argument("pair id must be nonempty");
        if (query.empty() || preferred.empty() || dispreferred.empty()) {
            throw std::invalid_argument("pair " + id + ": sequences must be nonempty");
        }
        if (preferred == dispreferred) {
            throw std::invalid_argument("pair " + id +
                                        ": preferred and dispreferred responses are equal");
        }
    }

    bool operator==(const PreferencePair&) const = default;
};

inline const char* safety_label(bool safe_query) { return safe_query ? "safe" : "unsafe"; }

}  // namespace bdpo
