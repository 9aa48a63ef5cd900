// Test-only reference implementations, written independently of the library
// code paths they check: a naive model forward (direct softmax, no log-space
// trick), direct-summation entropies, brute-force sequence probabilities,
// central finite differences, and a sort-and-threshold dataset split.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bdpo/dataset.hpp"
#include "bdpo/model.hpp"

namespace oracles {

// Naive forward pass: plain loops, exp/sum softmax.
inline std::vector<double> naive_distribution(const bdpo::PolicyParameters& params,
                                              const bdpo::TokenSeq& context) {
    const auto& c = params.config;
    const int V = c.vocab_size, E = c.embed_dim, W = c.context_window, H = c.hidden_dim;
    const double* p = params.values.data();
    const size_t emb_off = 0;
    const size_t mixw_off = static_cast<size_t>(V) * E;
    const size_t mixb_off = mixw_off + static_cast<size_t>(H) * W * E;
    const size_t outw_off = mixb_off + static_cast<size_t>(H);
    const size_t outb_off = outw_off + static_cast<size_t>(V) * H;

    std::vector<double> window(static_cast<size_t>(W) * E, 0.0);
    for (int k = 0; k < W; ++k) {
        const long pos = static_cast<long>(context.size()) - 1 - k;
        if (pos < 0) break;
        const int tok = context[static_cast<size_t>(pos)];
        for (int e = 0; e < E; ++e) {
            window[static_cast<size_t>(k) * E + e] = p[emb_off + static_cast<size_t>(tok) * E + e];
        }
    }
    std::vector<double> hid(static_cast<size_t>(H));
    for (int h = 0; h < H; ++h) {
        double acc = p[mixb_off + static_cast<size_t>(h)];
        for (size_t j = 0; j < window.size(); ++j) {
            acc += p[mixw_off + static_cast<size_t>(h) * window.size() + j] * window[j];
        }
        hid[static_cast<size_t>(h)] = std::tanh(acc);
    }
    std::vector<double> probs(static_cast<size_t>(V));
    double z = 0.0;
    for (int v = 0; v < V; ++v) {
        double logit = p[outb_off + static_cast<size_t>(v)];
        for (int h = 0; h < H; ++h) {
            logit += p[outw_off + static_cast<size_t>(v) * H + h] * hid[static_cast<size_t>(h)];
        }
        probs[static_cast<size_t>(v)] = std::exp(logit);
        z += probs[static_cast<size_t>(v)];
    }
    for (double& q : probs) q /= z;
    return probs;
}

// Direct double summation of the mean token entropy with teacher forcing.
inline double naive_mean_entropy(const bdpo::PolicyParameters& params,
                                 const bdpo::TokenSeq& context_prefix, const bdpo::TokenSeq& y) {
    bdpo::TokenSeq context = context_prefix;
    double total = 0.0;
    for (bdpo::TokenId tok : y) {
        const std::vector<double> probs = naive_distribution(params, context);
        double h = 0.0;
        for (double q : probs) h -= q * std::log(q);
        total += h;
        context.push_back(tok);
    }
    return total / static_cast<double>(y.size());
}

inline double naive_prior_entropy(const bdpo::PolicyParameters& params, const bdpo::TokenSeq& y) {
    return naive_mean_entropy(params, {params.config.bos_id}, y);
}

inline double naive_conditional_entropy(const bdpo::PolicyParameters& params,
                                        const bdpo::TokenSeq& x, const bdpo::TokenSeq& y) {
    bdpo::TokenSeq prefix{params.config.bos_id};
    prefix.insert(prefix.end(), x.begin(), x.end());
    return naive_mean_entropy(params, prefix, y);
}

// Brute-force product of the per-step distribution entries, log at the end.
inline double naive_sequence_logprob(const bdpo::PolicyParameters& params,
                                     const bdpo::TokenSeq& prefix, const bdpo::TokenSeq& target) {
    bdpo::TokenSeq context = prefix;
    double product = 1.0;
    for (bdpo::TokenId tok : target) {
        product *= naive_distribution(params, context)[static_cast<size_t>(tok)];
        context.push_back(tok);
    }
    return std::log(product);
}

// Central finite differences of an arbitrary scalar objective.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(const bdpo::PolicyParameters&)>& f,
    const bdpo::PolicyParameters& at, double h = 1e-5) {
    std::vector<double> grad(at.values.size());
    bdpo::PolicyParameters probe = at;
    for (size_t i = 0; i < at.values.size(); ++i) {
        const double v = at.values[i];
        probe.values[i] = v + h;
        const double up = f(probe);
        probe.values[i] = v - h;
        const double down = f(probe);
        probe.values[i] = v;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

// max-norm difference scaled by the larger vector max-norm
inline double scaled_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, scale = 1e-300;
    for (size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::fabs(a[i] - b[i]));
        scale = std::max({scale, std::fabs(a[i]), std::fabs(b[i])});
    }
    return diff / scale;
}

// Independent re-partition: per label, sort the gaps, take the median
// (mean of middles for even counts), threshold with ties to balanced.
struct SplitOracle {
    std::set<std::string> balanced, imbalanced;
    std::map<std::string, double> medians;
};

inline SplitOracle sort_and_threshold_split(const bdpo::AnnotatedDataset& dataset) {
    SplitOracle oracle;
    for (const bool safe : {true, false}) {
        std::vector<double> gaps;
        for (const auto& rec : dataset.records) {
            if (rec.pair.safe_query == safe) gaps.push_back(rec.mi.gap);
        }
        if (gaps.empty()) continue;
        std::sort(gaps.begin(), gaps.end());
        const size_t n = gaps.size();
        const double med =
            n % 2 == 1 ? gaps[n / 2] : 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]);
        oracle.medians[safe ? "safe" : "unsafe"] = med;
        for (const auto& rec : dataset.records) {
            if (rec.pair.safe_query != safe) continue;
            (rec.mi.gap <= med ? oracle.balanced : oracle.imbalanced).insert(rec.pair.id);
        }
    }
    return oracle;
}

}  // namespace oracles
