#include "bdpo/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "bdpo/errors.hpp"
#include "bdpo/rng.hpp"

namespace bdpo {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void check_finite(double value, const char* what, long step) {
    if (!std::isfinite(value)) {
        throw NumericalError(std::string("non-finite ") + what + " at step " +
                             std::to_string(step));
    }
}

void check_all_finite(const std::vector<double>& values, const char* what, long step) {
    for (double v : values) check_finite(v, what, step);
}

}  // namespace

Optimizer parse_optimizer(const std::string& tag) {
    if (tag == "sgd") return Optimizer::kSgd;
    if (tag == "adaptive-moment") return Optimizer::kAdaptiveMoment;
    throw std::invalid_argument("unknown optimizer '" + tag +
                                "' (expected sgd or adaptive-moment)");
}

const char* optimizer_tag(Optimizer optimizer) {
    return optimizer == Optimizer::kSgd ? "sgd" : "adaptive-moment";
}

void TrainConfig::validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
    if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
    // learning_rate 0 is allowed: it makes training a checkable no-op
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
}

double reward_margin(const PolicyParameters& policy, const ReferenceSnapshot& ref,
                     const PreferencePair& pair, double beta) {
    return implicit_reward(policy, ref, pair.query, pair.preferred, beta).value -
           implicit_reward(policy, ref, pair.query, pair.dispreferred, beta).value;
}

TrainResult train(const TrainConfig& config, const AnnotatedDataset& data,
                  const PolicyParameters& init) {
    config.validate();
    if (data.records.empty()) throw std::invalid_argument("training dataset is empty");
    if (init.values.size() != init.config.param_count()) {
        throw std::invalid_argument("init parameter vector does not match its model config");
    }

    const auto start = std::chrono::steady_clock::now();
    const ReferenceSnapshot ref(init);
    const size_t n = data.records.size();
    const size_t param_count = init.values.size();

    // Reference log-probabilities never change; compute them once.
    std::vector<PairScalars> cached(n);
    for (size_t i = 0; i < n; ++i) {
        const auto& pair = data.records[i].pair;
        const TokenSeq prefix = response_prefix(init.config, pair.query);
        cached[i].lp_w_ref = sequence_logprob(ref.params(), prefix, pair.preferred);
        cached[i].lp_l_ref = sequence_logprob(ref.params(), prefix, pair.dispreferred);
    }

    TrainResult result;
    result.params = init;
    std::vector<double> grad(param_count), m, v;
    if (config.optimizer == Optimizer::kAdaptiveMoment) {
        m.assign(param_count, 0.0);
        v.assign(param_count, 0.0);
    }

    std::vector<size_t> order(n);
    long step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), size_t{0});
        Rng shuffle_rng(Rng::mix(config.seed, static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        for (size_t begin = 0; begin < n; begin += static_cast<size_t>(config.batch_size)) {
            const size_t end = std::min(n, begin + static_cast<size_t>(config.batch_size));
            const double count = static_cast<double>(end - begin);
            ++step;

            std::fill(grad.begin(), grad.end(), 0.0);
            double loss_sum = 0.0, margin_sum = 0.0;
            double lw_sum = 0.0, ll_sum = 0.0, factor_sum = 0.0;
            for (size_t b = begin; b < end; ++b) {
                const auto& rec = data.records[order[b]];
                PairScalars s = cached[order[b]];
                const TokenSeq prefix = response_prefix(init.config, rec.pair.query);
                s.lp_w_policy = sequence_logprob(result.params, prefix, rec.pair.preferred);
                s.lp_l_policy = sequence_logprob(result.params, prefix, rec.pair.dispreferred);

                const LossEval eval = variant_loss_eval(config.variant, s, config.beta, rec.weights);
                check_finite(eval.loss, "loss", step);
                loss_sum += eval.loss;
                margin_sum += eval.reward_w - eval.reward_l;
                const bool weighted = config.variant != LossVariant::kDpo;
                lw_sum += weighted ? rec.weights.lambda_w : 1.0;
                ll_sum += weighted ? rec.weights.lambda_l : 1.0;
                factor_sum += eval.factor;

                const std::vector<double> gw =
                    logprob_gradient(result.params, prefix, rec.pair.preferred);
                const std::vector<double> gl =
                    logprob_gradient(result.params, prefix, rec.pair.dispreferred);
                for (size_t i = 0; i < param_count; ++i) {
                    grad[i] += eval.d_lp_w * gw[i] + eval.d_lp_l * gl[i];
                }
            }
            for (double& g : grad) g /= count;
            check_all_finite(grad, "gradient", step);

            if (config.optimizer == Optimizer::kSgd) {
                for (size_t i = 0; i < param_count; ++i) {
                    result.params.values[i] -= config.learning_rate * grad[i];
                }
            } else {
                const double t = static_cast<double>(step);
                const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
                const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
                for (size_t i = 0; i < param_count; ++i) {
                    m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * grad[i];
                    v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
                    result.params.values[i] -=
                        config.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kAdamEps);
                }
            }
            check_all_finite(result.params.values, "parameter", step);

            MetricsRow row;
            row.step = step;
            row.mean_loss = loss_sum / count;
            row.mean_reward_margin = margin_sum / count;
            row.mean_lambda_w = lw_sum / count;
            row.mean_lambda_l = ll_sum / count;
            row.mean_scaling_factor = factor_sum / count;
            result.metrics.push_back(row);
        }
    }

    const auto stop = std::chrono::steady_clock::now();
    result.training_seconds = std::chrono::duration<double>(stop - start).count();
    return result;
}

EvalResult evaluate(const PolicyParameters& policy, const ReferenceSnapshot& ref,
                    const std::vector<PreferencePair>& pairs, double beta) {
    if (pairs.empty()) throw std::invalid_argument("evaluate requires a nonempty pair list");
    EvalResult result;
    long wins = 0;
    for (const auto& pair : pairs) {
        const double margin = reward_margin(policy, ref, pair, beta);
        if (margin > 0.0) ++wins;  // a margin of exactly 0 is not a win
        result.mean_margin += margin;
    }
    result.preference_accuracy = static_cast<double>(wins) / static_cast<double>(pairs.size());
    result.mean_margin /= static_cast<double>(pairs.size());
    return result;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "step,mean_loss,mean_reward_margin,mean_lambda_w,mean_lambda_l,mean_scaling_factor\n";
    char buf[256];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.step,
                      row.mean_loss, row.mean_reward_margin, row.mean_lambda_w, row.mean_lambda_l,
                      row.mean_scaling_factor);
        out << buf;
    }
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace bdpo
