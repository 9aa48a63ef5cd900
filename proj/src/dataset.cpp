#include "bdpo/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "bdpo/errors.hpp"
#include "bdpo/rng.hpp"

namespace bdpo {

namespace {

using nlohmann::ordered_json;

[[noreturn]] void line_error(const std::string& path, size_t line_no, const std::string& what) {
    throw DataError(path + ":" + std::to_string(line_no) + ": " + what);
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

ordered_json record_to_json(const PreferencePair& pair, const Vocabulary& vocab,
                            const std::optional<MiAnnotation>& mi,
                            const std::optional<BalancedWeights>& weights) {
    ordered_json j;
    j["id"] = pair.id;
    j["query"] = vocab.decode(pair.query);
    j["chosen"] = vocab.decode(pair.preferred);
    j["rejected"] = vocab.decode(pair.dispreferred);
    j["is_safe_query"] = pair.safe_query;
    if (mi) {
        j["mi_chosen"] = mi->mi_preferred;
        j["mi_rejected"] = mi->mi_dispreferred;
    }
    if (weights) {
        j["lambda_w"] = weights->lambda_w;
        j["lambda_l"] = weights->lambda_l;
    }
    return j;
}

}  // namespace

std::vector<LoadedRecord> load_jsonl_records(const std::string& path, const Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset: " + path);

    std::vector<LoadedRecord> out;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            line_error(path, line_no, std::string("malformed JSON: ") + e.what());
        }
        if (!j.is_object()) line_error(path, line_no, "line is not a JSON object");

        LoadedRecord rec;
        for (const char* field : {"query", "chosen", "rejected"}) {
            if (!j.contains(field) || !j[field].is_string()) {
                line_error(path, line_no, std::string("missing or non-string field '") + field + "'");
            }
        }
        if (!j.contains("is_safe_query") || !j["is_safe_query"].is_boolean()) {
            line_error(path, line_no, "missing or non-boolean field 'is_safe_query'");
        }

        rec.pair.id = j.contains("id") ? j["id"].get<std::string>() : std::to_string(line_no);
        rec.pair.safe_query = j["is_safe_query"].get<bool>();
        try {
            rec.pair.query = vocab.encode(j["query"].get<std::string>());
            rec.pair.preferred = vocab.encode(j["chosen"].get<std::string>());
            rec.pair.dispreferred = vocab.encode(j["rejected"].get<std::string>());
        } catch (const DataError& e) {
            line_error(path, line_no, e.what());
        }
        try {
            rec.pair.validate();
        } catch (const std::invalid_argument& e) {
            line_error(path, line_no, e.what());
        }
        if (!seen_ids.insert(rec.pair.id).second) {
            line_error(path, line_no, "duplicate pair id '" + rec.pair.id + "'");
        }

        for (auto [field, slot] : {std::pair{"mi_chosen", &rec.mi_chosen},
                                   std::pair{"mi_rejected", &rec.mi_rejected},
                                   std::pair{"lambda_w", &rec.lambda_w},
                                   std::pair{"lambda_l", &rec.lambda_l}}) {
            if (!j.contains(field)) continue;
            if (!j[field].is_number()) {
                line_error(path, line_no, std::string("field '") + field + "' must be a number");
            }
            *slot = j[field].get<double>();
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<PreferencePair> load_jsonl(const std::string& path, const Vocabulary& vocab) {
    std::vector<PreferencePair> pairs;
    for (auto& rec : load_jsonl_records(path, vocab)) pairs.push_back(std::move(rec.pair));
    return pairs;
}

void save_jsonl(const std::string& path, const std::vector<PreferencePair>& pairs,
                const Vocabulary& vocab) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    for (const auto& pair : pairs) {
        out << record_to_json(pair, vocab, std::nullopt, std::nullopt).dump() << "\n";
    }
    if (!out) throw DataError("write failed: " + path);
}

std::vector<PreferencePair> generate_synthetic(uint64_t seed, int n_safe, int n_unsafe,
                                               const Vocabulary& vocab) {
    if (n_safe < 0 || n_unsafe < 0) {
        throw std::invalid_argument("pair counts must be non-negative");
    }
    std::vector<TokenId> ids;
    for (TokenId i = 0; i < vocab.size(); ++i) {
        if (i != vocab.bos_id()) ids.push_back(i);
    }
    if (ids.size() < 8) {
        throw std::invalid_argument(
            "vocabulary too small for the synthetic grammars (needs >= 8 non-bos symbols)");
    }
    const size_t quarter = ids.size() / 4;
    const auto family = [&](size_t which) {
        const size_t begin = which * quarter;
        const size_t end = which == 3 ? ids.size() : begin + quarter;
        return std::vector<TokenId>(ids.begin() + static_cast<long>(begin),
                                    ids.begin() + static_cast<long>(end));
    };
    const std::vector<TokenId> query_fams[2] = {family(0), family(1)};  // safe, unsafe
    const std::vector<TokenId> resp_fams[2] = {family(2), family(3)};

    Rng rng(seed);
    const auto walk = [&rng](const std::vector<TokenId>& fam, size_t len) {
        TokenSeq out;
        size_t idx = rng.below(fam.size());
        for (size_t i = 0; i < len; ++i) {
            out.push_back(fam[idx]);
            // mostly cyclic steps, occasional jump: local structure the
            // window model can pick up
            idx = rng.next_unit() < 0.85 ? (idx + 1) % fam.size() : rng.below(fam.size());
        }
        return out;
    };

    std::vector<PreferencePair> pairs;
    pairs.reserve(static_cast<size_t>(n_safe + n_unsafe));
    for (int i = 0; i < n_safe + n_unsafe; ++i) {
        const bool safe = i < n_safe;
        PreferencePair pair;
        char id[16];
        std::snprintf(id, sizeof(id), "syn-%06d", i);
        pair.id = id;
        pair.safe_query = safe;

        const auto& qfam = query_fams[safe ? 0 : 1];
        const size_t qlen = 3 + rng.below(3);
        for (size_t t = 0; t < qlen; ++t) pair.query.push_back(qfam[rng.below(qfam.size())]);

        const size_t rlen = 4 + rng.below(3);
        const size_t fam_w = rng.below(2);
        pair.preferred = walk(resp_fams[fam_w], rlen);
        if (rng.below(2) == 0) {
            // same template family: dispreferred is a single-token mutation,
            // so the model's comprehension of the two responses stays close
            const auto& fam = resp_fams[fam_w];
            pair.dispreferred = pair.preferred;
            const size_t pos = rng.below(rlen);
            const auto it = std::find(fam.begin(), fam.end(), pair.dispreferred[pos]);
            const size_t cur = static_cast<size_t>(it - fam.begin());
            pair.dispreferred[pos] = fam[(cur + 1 + rng.below(fam.size() - 1)) % fam.size()];
        } else {
            // cross-family: structurally different response
            pair.dispreferred = walk(resp_fams[1 - fam_w], rlen);
        }
        pair.validate();
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

AnnotatedDataset build_annotated(const std::vector<PreferencePair>& pairs,
                                 const ReferenceSnapshot& reference, double alpha) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
    AnnotationRun run = annotate_dataset(reference, pairs);
    AnnotatedDataset dataset;
    dataset.alpha = alpha;
    dataset.reference_fingerprint = reference.fingerprint();
    dataset.timing = run.timing;
    dataset.records.reserve(run.records.size());
    for (auto& [pair, mi] : run.records) {
        dataset.records.push_back(
            {std::move(pair), mi, balanced_weights(mi.mi_preferred, mi.mi_dispreferred, alpha)});
    }
    return dataset;
}

AnnotatedDataset annotated_from_records(const std::vector<LoadedRecord>& records, double alpha,
                                        const std::string& reference_fingerprint) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
    if (reference_fingerprint.empty()) {
        throw std::invalid_argument("reference fingerprint must be nonempty");
    }
    AnnotatedDataset dataset;
    dataset.alpha = alpha;
    dataset.reference_fingerprint = reference_fingerprint;
    dataset.records.reserve(records.size());
    for (const auto& rec : records) {
        if (!rec.mi_chosen || !rec.mi_rejected) {
            throw DataError("pair '" + rec.pair.id +
                            "' has no MI annotation; run analyze on the dataset first");
        }
        MiAnnotation mi;
        mi.mi_preferred = *rec.mi_chosen;
        mi.mi_dispreferred = *rec.mi_rejected;
        mi.gap = std::fabs(mi.mi_preferred - mi.mi_dispreferred);
        dataset.records.push_back(
            {rec.pair, mi, balanced_weights(mi.mi_preferred, mi.mi_dispreferred, alpha)});
    }
    return dataset;
}

void save_annotated_jsonl(const std::string& path, const AnnotatedDataset& dataset,
                          const Vocabulary& vocab) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    for (const auto& rec : dataset.records) {
        out << record_to_json(rec.pair, vocab, rec.mi, rec.weights).dump() << "\n";
    }
    if (!out) throw DataError("write failed: " + path);
}

DatasetSplit median_gap_split(const AnnotatedDataset& dataset) {
    if (dataset.records.empty()) throw std::invalid_argument("cannot split an empty dataset");

    std::vector<double> gaps[2];  // [safe, unsafe]
    for (const auto& rec : dataset.records) {
        gaps[rec.pair.safe_query ? 0 : 1].push_back(rec.mi.gap);
    }
    DatasetSplit split;
    double medians[2] = {0.0, 0.0};
    for (int lab = 0; lab < 2; ++lab) {
        if (gaps[lab].empty()) continue;
        if (gaps[lab].size() < 2) {
            throw std::invalid_argument(std::string("label '") + (lab == 0 ? "safe" : "unsafe") +
                                        "' has fewer than 2 records");
        }
        medians[lab] = median(gaps[lab]);
        split.per_label_medians[lab == 0 ? "safe" : "unsafe"] = medians[lab];
    }
    for (const auto& rec : dataset.records) {
        const int lab = rec.pair.safe_query ? 0 : 1;
        (rec.mi.gap <= medians[lab] ? split.balanced : split.imbalanced).push_back(rec.pair.id);
    }
    return split;
}

std::pair<AnnotatedDataset, AnnotatedDataset> partition_annotated(const AnnotatedDataset& dataset,
                                                                  const DatasetSplit& split) {
    const std::unordered_set<std::string> balanced_ids(split.balanced.begin(),
                                                       split.balanced.end());
    AnnotatedDataset balanced, imbalanced;
    for (auto* half : {&balanced, &imbalanced}) {
        half->reference_fingerprint = dataset.reference_fingerprint;
        half->alpha = dataset.alpha;
    }
    for (const auto& rec : dataset.records) {
        (balanced_ids.count(rec.pair.id) ? balanced : imbalanced).records.push_back(rec);
    }
    return {std::move(balanced), std::move(imbalanced)};
}

std::string file_fingerprint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for fingerprinting: " + path);
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return std::string(out);
}

}  // namespace bdpo
