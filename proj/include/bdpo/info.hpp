#pragma once

#include <utility>
#include <vector>

#include "bdpo/model.hpp"
#include "bdpo/pair.hpp"

namespace bdpo {

// Token-entropy comprehension metric for one pair, in nats, measured
// against the frozen reference model.
struct MiAnnotation {
    double mi_preferred = 0.0;
    double mi_dispreferred = 0.0;
    double gap = 0.0;  // |mi_preferred - mi_dispreferred|

    bool operator==(const MiAnnotation&) const = default;
};

// (1/L) sum_t H(P(. | bos, y_<t)): mean next-token entropy with the
// response teacher-forced on its own prefix and no query in context.
// Result in [0, log V].
double prior_entropy(const PolicyParameters& model, const TokenSeq& y);

// Same, with context bos + x + y_<t.
double conditional_entropy(const PolicyParameters& model, const TokenSeq& x,
                           const TokenSeq& y);

// prior_entropy - conditional_entropy. May be negative; exactly zero
// when x is empty. |result| <= log V.
double mutual_information(const PolicyParameters& model, const TokenSeq& x,
                          const TokenSeq& y);

MiAnnotation annotate_pair(const PolicyParameters& model, const PreferencePair& pair);

struct AnnotationTiming {
    double total_seconds = 0.0;
    double seconds_per_pair = 0.0;
};

struct AnnotationRun {
    std::vector<std::pair<PreferencePair, MiAnnotation>> records;
    AnnotationTiming timing;
};

// Order-preserving map of annotate_pair over the dataset, against the frozen
// reference. Aborts on the first failing pair, naming its index and id.
AnnotationRun annotate_dataset(const ReferenceSnapshot& reference,
                               const std::vector<PreferencePair>& pairs);

// Per-safety-label summary of an annotated dataset (report fields of the
// analyze command).
struct MiLabelStats {
    long count = 0;
    double mean_mi_preferred = 0.0;
    double median_mi_preferred = 0.0;
    double mean_mi_dispreferred = 0.0;
    double median_mi_dispreferred = 0.0;
    double mean_gap = 0.0;
    double frac_preferred_higher = 0.0;
};

MiLabelStats mi_label_stats(
    const std::vector<std::pair<PreferencePair, MiAnnotation>>& records, bool safe_query);

// Median as used throughout: mean of the two middle order statistics for
// even counts, the middle element for odd counts.
double median(std::vector<double> values);

}  // namespace bdpo
