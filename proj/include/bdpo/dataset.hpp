#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bdpo/info.hpp"
#include "bdpo/losses.hpp"
#include "bdpo/pair.hpp"
#include "bdpo/vocab.hpp"

namespace bdpo {

// One JSONL line: the pair plus whatever annotation fields the file carried.
struct LoadedRecord {
    PreferencePair pair;
    std::optional<double> mi_chosen;
    std::optional<double> mi_rejected;
    std::optional<double> lambda_w;
    std::optional<double> lambda_l;
};

// JSONL schema per line:
//   {"id": string?, "query": str, "chosen": str, "rejected": str,
//    "is_safe_query": bool, "mi_chosen": num?, "mi_rejected": num?,
//    "lambda_w": num?, "lambda_l": num?}
// Sequences are whitespace-separated vocabulary symbols. Missing ids default
// to the 1-based line number. Errors name the offending line.
std::vector<LoadedRecord> load_jsonl_records(const std::string& path, const Vocabulary& vocab);
std::vector<PreferencePair> load_jsonl(const std::string& path, const Vocabulary& vocab);

void save_jsonl(const std::string& path, const std::vector<PreferencePair>& pairs,
                const Vocabulary& vocab);

// Deterministic synthetic corpus: queries from two disjoint symbol families
// (one per safety label); within a pair the responses either share a template
// family (differing in a single token) or come from the two different
// families, so annotated MI gaps spread over a wide range.
std::vector<PreferencePair> generate_synthetic(uint64_t seed, int n_safe, int n_unsafe,
                                               const Vocabulary& vocab);

struct AnnotatedRecord {
    PreferencePair pair;
    MiAnnotation mi;
    BalancedWeights weights;
};

struct AnnotatedDataset {
    std::vector<AnnotatedRecord> records;
    std::string reference_fingerprint;
    double alpha = 0.0;
    AnnotationTiming timing;
};

// Annotates every pair against the frozen reference and derives the loss
// weights at the given alpha.
AnnotatedDataset build_annotated(const std::vector<PreferencePair>& pairs,
                                 const ReferenceSnapshot& reference, double alpha);

// Rebuilds an annotated dataset from records whose MI fields were already
// filled in by a previous analyze run. Weights are re-derived from the
// stored MI values at the given alpha; throws DataError when MI is missing.
AnnotatedDataset annotated_from_records(const std::vector<LoadedRecord>& records, double alpha,
                                        const std::string& reference_fingerprint);

void save_annotated_jsonl(const std::string& path, const AnnotatedDataset& dataset,
                          const Vocabulary& vocab);

struct DatasetSplit {
    std::vector<std::string> balanced;    // pair ids, dataset order
    std::vector<std::string> imbalanced;  // pair ids, dataset order
    std::map<std::string, double> per_label_medians;
};

// Within each safety label independently: records whose MI gap is <= that
// label's median go to the balanced half, the rest to the imbalanced half
// (ties to balanced). Each label present must have at least 2 records.
DatasetSplit median_gap_split(const AnnotatedDataset& dataset);

// Materializes the two halves, preserving dataset order.
std::pair<AnnotatedDataset, AnnotatedDataset> partition_annotated(const AnnotatedDataset& dataset,
                                                                  const DatasetSplit& split);

// FNV-1a over the raw file bytes, as a hex string; used in run manifests.
std::string file_fingerprint(const std::string& path);

}  // namespace bdpo
