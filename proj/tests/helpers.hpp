#pragma once

#include "bdpo/model.hpp"
#include "bdpo/rng.hpp"

namespace testutil {

inline bdpo::ModelConfig small_config(uint64_t seed, int V = 5, int E = 3, int W = 10, int H = 4) {
    bdpo::ModelConfig config;
    config.vocab_size = V;
    config.embed_dim = E;
    config.context_window = W;
    config.hidden_dim = H;
    config.seed = seed;
    config.bos_id = 0;
    return config;
}

// Random small model with parameter spread beyond the init scale.
inline bdpo::PolicyParameters random_model(bdpo::Rng& rng, int max_vocab = 8) {
    bdpo::ModelConfig config = small_config(rng.next_u64());
    config.vocab_size = static_cast<int>(2 + rng.below(static_cast<uint64_t>(max_vocab - 1)));
    config.embed_dim = static_cast<int>(2 + rng.below(3));
    config.hidden_dim = static_cast<int>(2 + rng.below(4));
    bdpo::PolicyParameters params = bdpo::init_params(config);
    const double spread = 0.5 + 2.0 * rng.next_unit();
    for (double& v : params.values) v *= spread;
    return params;
}

inline bdpo::TokenSeq random_seq(bdpo::Rng& rng, int vocab_size, size_t len) {
    bdpo::TokenSeq out;
    for (size_t i = 0; i < len; ++i) {
        out.push_back(static_cast<bdpo::TokenId>(
            1 + rng.below(static_cast<uint64_t>(vocab_size - 1))));
    }
    return out;
}

}  // namespace testutil
