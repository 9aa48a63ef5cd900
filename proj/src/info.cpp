#include "bdpo/info.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "bdpo/errors.hpp"

namespace bdpo {

namespace {

// Mean next-token entropy over the positions of y, teacher-forced,
// with the given context prefix already in place.
double mean_token_entropy(const PolicyParameters& model, TokenSeq context,
                          const TokenSeq& y) {
    if (y.empty()) throw std::invalid_argument("response must be nonempty");
    context.reserve(context.size() + y.size());
    double total = 0.0;
    for (TokenId tok : y) {
        const std::vector<double> logp = next_token_log_distribution(model, context);
        double h = 0.0;
        for (double lp : logp) h -= std::exp(lp) * lp;
        total += h;
        context.push_back(tok);
    }
    return total / static_cast<double>(y.size());
}

}  // namespace

double prior_entropy(const PolicyParameters& model, const TokenSeq& y) {
    TokenSeq context{model.config.bos_id};
    return mean_token_entropy(model, std::move(context), y);
}

double conditional_entropy(const PolicyParameters& model, const TokenSeq& x,
                           const TokenSeq& y) {
    TokenSeq context{model.config.bos_id};
    context.insert(context.end(), x.begin(), x.end());
    return mean_token_entropy(model, std::move(context), y);
}

double mutual_information(const PolicyParameters& model, const TokenSeq& x,
                          const TokenSeq& y) {
    return prior_entropy(model, y) - conditional_entropy(model, x, y);
}

MiAnnotation annotate_pair(const PolicyParameters& model, const PreferencePair& pair) {
    MiAnnotation ann;
    ann.mi_preferred = mutual_information(model, pair.query, pair.preferred);
    ann.mi_dispreferred = mutual_information(model, pair.query, pair.dispreferred);
    ann.gap = std::fabs(ann.mi_preferred - ann.mi_dispreferred);
    return ann;
}

AnnotationRun annotate_dataset(const ReferenceSnapshot& reference,
                               const std::vector<PreferencePair>& pairs) {
    const auto start = std::chrono::steady_clock::now();
    AnnotationRun run;
    run.records.reserve(pairs.size());
    for (size_t i = 0; i < pairs.size(); ++i) {
        try {
            run.records.emplace_back(pairs[i], annotate_pair(reference.params(), pairs[i]));
        } catch (const std::exception& e) {
            throw DataError("annotation failed at pair index " + std::to_string(i) +
                            " (id " + pairs[i].id + "): " + e.what());
        }
    }
    const auto end = std::chrono::steady_clock::now();
    run.timing.total_seconds = std::chrono::duration<double>(end - start).count();
    run.timing.seconds_per_pair =
        pairs.empty() ? 0.0 : run.timing.total_seconds / static_cast<double>(pairs.size());
    return run;
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of empty set");
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MiLabelStats mi_label_stats(
    const std::vector<std::pair<PreferencePair, MiAnnotation>>& records, bool safe_query) {
    MiLabelStats stats;
    std::vector<double> mi_w, mi_l;
    double gap_sum = 0.0;
    long higher = 0;
    for (const auto& [pair, ann] : records) {
        if (pair.safe_query != safe_query) continue;
        mi_w.push_back(ann.mi_preferred);
        mi_l.push_back(ann.mi_dispreferred);
        gap_sum += ann.gap;
        if (ann.mi_preferred > ann.mi_dispreferred) ++higher;
    }
    stats.count = static_cast<long>(mi_w.size());
    if (stats.count == 0) return stats;
    const double n = static_cast<double>(stats.count);
    for (double v : mi_w) stats.mean_mi_preferred += v;
    for (double v : mi_l) stats.mean_mi_dispreferred += v;
    stats.mean_mi_preferred /= n;
    stats.mean_mi_dispreferred /= n;
    stats.median_mi_preferred = median(mi_w);
    stats.median_mi_dispreferred = median(mi_l);
    stats.mean_gap = gap_sum / n;
    stats.frac_preferred_higher = static_cast<double>(higher) / n;
    return stats;
}

}  // namespace bdpo
