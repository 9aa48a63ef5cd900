#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bdpo/vocab.hpp"

namespace bdpo {

struct ModelConfig {
    int vocab_size = 0;
    int embed_dim = 0;
    int context_window = 0;
    int hidden_dim = 0;
    uint64_t seed = 0;
    TokenId bos_id = 0;  // reserved begin-of-sequence index, prepended to every context

    void validate() const;
    size_t param_count() const;

    void save_json(const std::string& path) const;
    static ModelConfig load_json(const std::string& path);

    bool operator==(const ModelConfig&) const = default;
};

// Offsets of the named slices inside the flat parameter vector:
// token embeddings (V x E), window mixing layer (H x W*E plus bias),
// output projection (V x H plus bias).
struct ParamLayout {
    int V, E, W, H;
    size_t embeddings, mix_weight, mix_bias, out_weight, out_bias, total;

    static ParamLayout from(const ModelConfig& config);
    size_t embedding_row(TokenId token) const {
        return embeddings + static_cast<size_t>(token) * static_cast<size_t>(E);
    }
};

struct PolicyParameters {
    ModelConfig config;
    std::vector<double> values;

    bool operator==(const PolicyParameters&) const = default;
};

// FNV-1a over config fields and raw parameter bytes, as a hex string.
std::string fingerprint_params(const PolicyParameters& params);

// Frozen copy of a parameter vector; plays the reference-model role.
class ReferenceSnapshot {
public:
    explicit ReferenceSnapshot(PolicyParameters params)
        : params_(std::move(params)), fingerprint_(fingerprint_params(params_)) {}

    const PolicyParameters& params() const { return params_; }
    const std::string& fingerprint() const { return fingerprint_; }

private:
    PolicyParameters params_;
    std::string fingerprint_;
};

// Deterministic in config.seed; symmetric uniform values in (-0.2, 0.2).
PolicyParameters init_params(const ModelConfig& config);

// Distribution over the next token given a context that starts with the
// bos id. Softmax normalized in log space; every entry positive, unit sum.
std::vector<double> next_token_distribution(const PolicyParameters& params,
                                            const TokenSeq& context);
std::vector<double> next_token_log_distribution(const PolicyParameters& params,
                                                const TokenSeq& context);

// Sum over target positions of log P(target_t | prefix + target_{<t}).
// Raw sequence log-probability, not length-normalized.
double sequence_logprob(const PolicyParameters& params, const TokenSeq& prefix,
                        const TokenSeq& target);

// Exact reverse-mode derivative of sequence_logprob w.r.t. every parameter.
std::vector<double> logprob_gradient(const PolicyParameters& params,
                                     const TokenSeq& prefix, const TokenSeq& target);

// Parameter blob: "BDPOPARM" magic, u32 layout version, u64 length,
// then little-endian float64 values.
void save_param_values(const std::vector<double>& values, const std::string& path);
std::vector<double> load_param_values(const std::string& path);
PolicyParameters load_params(const std::string& path, const ModelConfig& config);

}  // namespace bdpo
