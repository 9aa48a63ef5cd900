#include "bdpo/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "bdpo/errors.hpp"
#include "bdpo/rng.hpp"

namespace bdpo {

namespace {

constexpr double kInitScale = 0.2;
constexpr char kParamMagic[8] = {'B', 'D', 'P', 'O', 'P', 'A', 'R', 'M'};
constexpr uint32_t kLayoutVersion = 1;

void check_context(const ModelConfig& config, const TokenSeq& context) {
    if (context.empty()) throw std::invalid_argument("context must be nonempty");
    if (static_cast<int>(context.size()) > config.context_window) {
        throw std::invalid_argument("context length " + std::to_string(context.size()) +
                                    " exceeds context window " +
                                    std::to_string(config.context_window));
    }
    for (TokenId id : context) {
        if (id < 0 || id >= config.vocab_size) {
            throw std::invalid_argument("invalid token id " + std::to_string(id));
        }
    }
}

// Forward pass state for one context position.
struct Activations {
    std::vector<double> window;     // W*E, slot 0 = most recent token
    std::vector<TokenId> slot_tok;  // token per slot, -1 past the start
    std::vector<double> hid;        // H, post-tanh
    std::vector<double> logp;       // V
};

void forward(const PolicyParameters& params, const ParamLayout& lay,
             const TokenSeq& context, size_t context_len, Activations& act) {
    const double* p = params.values.data();
    const size_t we = static_cast<size_t>(lay.W) * static_cast<size_t>(lay.E);

    act.window.assign(we, 0.0);
    act.slot_tok.assign(static_cast<size_t>(lay.W), -1);
    for (int k = 0; k < lay.W; ++k) {
        const long pos = static_cast<long>(context_len) - 1 - k;
        if (pos < 0) break;
        const TokenId tok = context[static_cast<size_t>(pos)];
        act.slot_tok[static_cast<size_t>(k)] = tok;
        const double* row = p + lay.embedding_row(tok);
        std::copy(row, row + lay.E, act.window.begin() + static_cast<long>(k) * lay.E);
    }

    act.hid.assign(static_cast<size_t>(lay.H), 0.0);
    for (int h = 0; h < lay.H; ++h) {
        const double* wrow = p + lay.mix_weight + static_cast<size_t>(h) * we;
        double acc = p[lay.mix_bias + static_cast<size_t>(h)];
        for (size_t j = 0; j < we; ++j) acc += wrow[j] * act.window[j];
        act.hid[static_cast<size_t>(h)] = std::tanh(acc);
    }

    act.logp.assign(static_cast<size_t>(lay.V), 0.0);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int v = 0; v < lay.V; ++v) {
        const double* orow = p + lay.out_weight + static_cast<size_t>(v) * lay.H;
        double acc = p[lay.out_bias + static_cast<size_t>(v)];
        for (int h = 0; h < lay.H; ++h) acc += orow[static_cast<size_t>(h)] * act.hid[static_cast<size_t>(h)];
        act.logp[static_cast<size_t>(v)] = acc;
        max_logit = std::max(max_logit, acc);
    }
    double sum = 0.0;
    for (int v = 0; v < lay.V; ++v) sum += std::exp(act.logp[static_cast<size_t>(v)] - max_logit);
    const double lse = max_logit + std::log(sum);
    for (int v = 0; v < lay.V; ++v) act.logp[static_cast<size_t>(v)] -= lse;
}

// Accumulates d(logp[target]) / d(params) into grad, given the forward state.
void backward(const PolicyParameters& params, const ParamLayout& lay,
              const Activations& act, TokenId target, std::vector<double>& grad) {
    const double* p = params.values.data();
    const size_t we = static_cast<size_t>(lay.W) * static_cast<size_t>(lay.E);

    // d logp[y] / d logit[v] = onehot(y) - softmax
    std::vector<double> dlogit(static_cast<size_t>(lay.V));
    for (int v = 0; v < lay.V; ++v) dlogit[static_cast<size_t>(v)] = -std::exp(act.logp[static_cast<size_t>(v)]);
    dlogit[static_cast<size_t>(target)] += 1.0;

    std::vector<double> dhid(static_cast<size_t>(lay.H), 0.0);
    for (int v = 0; v < lay.V; ++v) {
        const double dv = dlogit[static_cast<size_t>(v)];
        grad[lay.out_bias + static_cast<size_t>(v)] += dv;
        const double* orow = p + lay.out_weight + static_cast<size_t>(v) * lay.H;
        double* grow = grad.data() + lay.out_weight + static_cast<size_t>(v) * lay.H;
        for (int h = 0; h < lay.H; ++h) {
            grow[static_cast<size_t>(h)] += dv * act.hid[static_cast<size_t>(h)];
            dhid[static_cast<size_t>(h)] += dv * orow[static_cast<size_t>(h)];
        }
    }

    for (int h = 0; h < lay.H; ++h) {
        const double hd = act.hid[static_cast<size_t>(h)];
        const double dpre = dhid[static_cast<size_t>(h)] * (1.0 - hd * hd);
        grad[lay.mix_bias + static_cast<size_t>(h)] += dpre;
        const double* wrow = p + lay.mix_weight + static_cast<size_t>(h) * we;
        double* gwrow = grad.data() + lay.mix_weight + static_cast<size_t>(h) * we;
        for (size_t j = 0; j < we; ++j) gwrow[j] += dpre * act.window[j];
        // embedding gradient via dwindow, scattered per slot below
        for (int k = 0; k < lay.W; ++k) {
            const TokenId tok = act.slot_tok[static_cast<size_t>(k)];
            if (tok < 0) break;
            double* gemb = grad.data() + lay.embedding_row(tok);
            const double* wslice = wrow + static_cast<size_t>(k) * lay.E;
            for (int e = 0; e < lay.E; ++e) gemb[static_cast<size_t>(e)] += dpre * wslice[static_cast<size_t>(e)];
        }
    }
}

void check_pair_lengths(const ModelConfig& config, const TokenSeq& prefix,
                        const TokenSeq& target) {
    if (prefix.empty()) throw std::invalid_argument("prefix must begin with the bos id");
    if (target.empty()) throw std::invalid_argument("target must be nonempty");
    if (static_cast<int>(prefix.size() + target.size()) > config.context_window) {
        throw std::invalid_argument(
            "combined length " + std::to_string(prefix.size() + target.size()) +
            " exceeds context window " + std::to_string(config.context_window));
    }
    for (TokenId id : prefix) {
        if (id < 0 || id >= config.vocab_size) {
            throw std::invalid_argument("invalid token id " + std::to_string(id));
        }
    }
    for (TokenId id : target) {
        if (id < 0 || id >= config.vocab_size) {
            throw std::invalid_argument("invalid token id " + std::to_string(id));
        }
    }
}

}  // namespace

void ModelConfig::validate() const {
    if (vocab_size < 2) throw std::invalid_argument("vocab_size must be >= 2");
    if (vocab_size > 256) throw std::invalid_argument("vocab_size must be <= 256");
    if (embed_dim < 1) throw std::invalid_argument("embed_dim must be >= 1");
    if (context_window < 1) throw std::invalid_argument("context_window must be >= 1");
    if (hidden_dim < 1) throw std::invalid_argument("hidden_dim must be >= 1");
    if (bos_id < 0 || bos_id >= vocab_size) {
        throw std::invalid_argument("bos_id must be a valid token index");
    }
}

size_t ModelConfig::param_count() const { return ParamLayout::from(*this).total; }

ParamLayout ParamLayout::from(const ModelConfig& config) {
    config.validate();
    ParamLayout lay;
    lay.V = config.vocab_size;
    lay.E = config.embed_dim;
    lay.W = config.context_window;
    lay.H = config.hidden_dim;
    const size_t V = static_cast<size_t>(lay.V), E = static_cast<size_t>(lay.E),
                 W = static_cast<size_t>(lay.W), H = static_cast<size_t>(lay.H);
    lay.embeddings = 0;
    lay.mix_weight = V * E;
    lay.mix_bias = lay.mix_weight + H * W * E;
    lay.out_weight = lay.mix_bias + H;
    lay.out_bias = lay.out_weight + V * H;
    lay.total = lay.out_bias + V;
    return lay;
}

void ModelConfig::save_json(const std::string& path) const {
    nlohmann::ordered_json j;
    j["vocab_size"] = vocab_size;
    j["embed_dim"] = embed_dim;
    j["context_window"] = context_window;
    j["hidden_dim"] = hidden_dim;
    j["seed"] = seed;
    j["bos_id"] = bos_id;
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

ModelConfig ModelConfig::load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed model config " + path + ": " + e.what());
    }
    ModelConfig config;
    try {
        config.vocab_size = j.at("vocab_size").get<int>();
        config.embed_dim = j.at("embed_dim").get<int>();
        config.context_window = j.at("context_window").get<int>();
        config.hidden_dim = j.at("hidden_dim").get<int>();
        config.seed = j.at("seed").get<uint64_t>();
        config.bos_id = j.value("bos_id", TokenId{0});
    } catch (const nlohmann::json::exception& e) {
        throw DataError("model config " + path + " missing field: " + e.what());
    }
    try {
        config.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError("invalid model config " + path + ": " + e.what());
    }
    return config;
}

std::string fingerprint_params(const PolicyParameters& params) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto eat = [&h](const void* data, size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    eat(&params.config.vocab_size, sizeof(int));
    eat(&params.config.embed_dim, sizeof(int));
    eat(&params.config.context_window, sizeof(int));
    eat(&params.config.hidden_dim, sizeof(int));
    eat(params.values.data(), params.values.size() * sizeof(double));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

PolicyParameters init_params(const ModelConfig& config) {
    const ParamLayout lay = ParamLayout::from(config);
    PolicyParameters params;
    params.config = config;
    params.values.resize(lay.total);
    Rng rng(config.seed);
    for (double& v : params.values) v = rng.symmetric(kInitScale);
    return params;
}

std::vector<double> next_token_log_distribution(const PolicyParameters& params,
                                                const TokenSeq& context) {
    check_context(params.config, context);
    const ParamLayout lay = ParamLayout::from(params.config);
    Activations act;
    forward(params, lay, context, context.size(), act);
    return act.logp;
}

std::vector<double> next_token_distribution(const PolicyParameters& params,
                                            const TokenSeq& context) {
    std::vector<double> out = next_token_log_distribution(params, context);
    for (double& v : out) v = std::exp(v);
    return out;
}

double sequence_logprob(const PolicyParameters& params, const TokenSeq& prefix,
                        const TokenSeq& target) {
    check_pair_lengths(params.config, prefix, target);
    const ParamLayout lay = ParamLayout::from(params.config);

    TokenSeq context = prefix;
    context.reserve(prefix.size() + target.size());
    Activations act;
    double total = 0.0;
    for (TokenId tok : target) {
        forward(params, lay, context, context.size(), act);
        total += act.logp[static_cast<size_t>(tok)];
        context.push_back(tok);
    }
    return total;
}

std::vector<double> logprob_gradient(const PolicyParameters& params,
                                     const TokenSeq& prefix, const TokenSeq& target) {
    check_pair_lengths(params.config, prefix, target);
    const ParamLayout lay = ParamLayout::from(params.config);

    std::vector<double> grad(lay.total, 0.0);
    TokenSeq context = prefix;
    context.reserve(prefix.size() + target.size());
    Activations act;
    for (TokenId tok : target) {
        forward(params, lay, context, context.size(), act);
        backward(params, lay, act, tok, grad);
        context.push_back(tok);
    }
    return grad;
}

void save_param_values(const std::vector<double>& values, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out.write(kParamMagic, sizeof(kParamMagic));
    const uint32_t version = kLayoutVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const uint64_t n = values.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
    if (!out) throw DataError("write failed: " + path);
}

std::vector<double> load_param_values(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open parameter file: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kParamMagic, sizeof(magic)) != 0) {
        throw DataError("not a parameter file (bad magic): " + path);
    }
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kLayoutVersion) {
        throw DataError("unsupported parameter layout version in " + path);
    }
    uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in) throw DataError("truncated parameter file: " + path);
    std::vector<double> values(n);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw DataError("truncated parameter file: " + path);
    for (double v : values) {
        if (!std::isfinite(v)) throw DataError("non-finite parameter value in " + path);
    }
    return values;
}

PolicyParameters load_params(const std::string& path, const ModelConfig& config) {
    PolicyParameters params;
    params.config = config;
    params.values = load_param_values(path);
    if (params.values.size() != config.param_count()) {
        throw DataError("parameter file " + path + " holds " +
                        std::to_string(params.values.size()) +
                        " values but the model config implies " +
                        std::to_string(config.param_count()));
    }
    return params;
}

}  // namespace bdpo
