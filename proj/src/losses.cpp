#include "bdpo/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "bdpo/autodiff.hpp"

namespace bdpo {

namespace {

constexpr double kMiFloor = 1e-6;
constexpr double kLambdaFloor = 1e-12;

void check_beta(double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
}

// Tape expression for a variant loss over the two policy-logprob leaves.
// Scaling factors are computed outside the tape and applied via scale(),
// so no gradient flows through them.
struct TapeLoss {
    ScalarTape tape;
    ScalarTape::Var lp_w, lp_l, loss;
    double factor = 1.0;
    double reward_w = 0.0, reward_l = 0.0;
};

TapeLoss build_variant_loss(LossVariant variant, const PairScalars& s, double beta,
                            const BalancedWeights& weights) {
    TapeLoss t;
    t.lp_w = t.tape.leaf(s.lp_w_policy);
    t.lp_l = t.tape.leaf(s.lp_l_policy);
    const auto r_w = t.tape.scale(t.tape.sub(t.lp_w, t.tape.constant(s.lp_w_ref)), beta);
    const auto r_l = t.tape.scale(t.tape.sub(t.lp_l, t.tape.constant(s.lp_l_ref)), beta);
    t.reward_w = t.tape.value(r_w);
    t.reward_l = t.tape.value(r_l);

    const bool weighted_inner = variant == LossVariant::kDpoBw || variant == LossVariant::kBdpo;
    const auto margin = weighted_inner
                            ? t.tape.sub(t.tape.scale(r_w, weights.lambda_w),
                                         t.tape.scale(r_l, weights.lambda_l))
                            : t.tape.sub(r_w, r_l);
    const auto inner = t.tape.neg(t.tape.log_sigmoid(margin));

    if (variant == LossVariant::kDpoSf || variant == LossVariant::kBdpo) {
        t.factor = scaling_factor(ImplicitReward{t.reward_w}, ImplicitReward{t.reward_l}, weights);
        t.loss = t.tape.scale(inner, t.factor);
    } else {
        t.loss = inner;
    }
    return t;
}

std::vector<double> combine(double d_lp_w, const std::vector<double>& grad_w, double d_lp_l,
                            const std::vector<double>& grad_l) {
    std::vector<double> out(grad_w.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = d_lp_w * grad_w[i] + d_lp_l * grad_l[i];
    return out;
}

}  // namespace

TokenSeq response_prefix(const ModelConfig& config, const TokenSeq& x) {
    TokenSeq prefix{config.bos_id};
    prefix.insert(prefix.end(), x.begin(), x.end());
    return prefix;
}

BalancedWeights balanced_weights(double mi_w, double mi_l, double alpha) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
    const double iw = std::max(mi_w, kMiFloor);
    const double il = std::max(mi_l, kMiFloor);
    // lambda_w = 2 il^a / (iw^a + il^a) = 2 sigma(a (log il - log iw))
    const double t = alpha * (std::log(il) - std::log(iw));
    BalancedWeights w;
    w.alpha = alpha;
    if (t <= 0.0) {
        const double e = std::exp(t);
        w.lambda_w = 2.0 * e / (1.0 + e);
        w.lambda_l = 2.0 / (1.0 + e);
    } else {
        const double e = std::exp(-t);
        w.lambda_w = 2.0 / (1.0 + e);
        w.lambda_l = 2.0 * e / (1.0 + e);
    }
    // exp() underflow at extreme ratios would land exactly on {0, 2};
    // pin back to the open interval, preserving the sum.
    if (w.lambda_w < kLambdaFloor) {
        w.lambda_w = kLambdaFloor;
        w.lambda_l = 2.0 - kLambdaFloor;
    } else if (w.lambda_l < kLambdaFloor) {
        w.lambda_l = kLambdaFloor;
        w.lambda_w = 2.0 - kLambdaFloor;
    }
    return w;
}

LossVariant parse_variant(const std::string& tag) {
    if (tag == "dpo") return LossVariant::kDpo;
    if (tag == "dpo-bw") return LossVariant::kDpoBw;
    if (tag == "dpo-sf") return LossVariant::kDpoSf;
    if (tag == "bdpo") return LossVariant::kBdpo;
    throw std::invalid_argument("unknown loss variant '" + tag +
                                "' (expected dpo, dpo-bw, dpo-sf, or bdpo)");
}

const char* variant_tag(LossVariant variant) {
    switch (variant) {
        case LossVariant::kDpo: return "dpo";
        case LossVariant::kDpoBw: return "dpo-bw";
        case LossVariant::kDpoSf: return "dpo-sf";
        case LossVariant::kBdpo: return "bdpo";
    }
    throw std::invalid_argument("unknown loss variant");
}

ImplicitReward implicit_reward(const PolicyParameters& policy, const ReferenceSnapshot& ref,
                               const TokenSeq& x, const TokenSeq& y, double beta) {
    check_beta(beta);
    const TokenSeq prefix = response_prefix(policy.config, x);
    const double lp_policy = sequence_logprob(policy, prefix, y);
    const double lp_ref = sequence_logprob(ref.params(), prefix, y);
    return ImplicitReward{beta * (lp_policy - lp_ref)};
}

PairScalars pair_scalars(const PolicyParameters& policy, const ReferenceSnapshot& ref,
                         const TokenSeq& x, const TokenSeq& y_w, const TokenSeq& y_l) {
    const TokenSeq prefix = response_prefix(policy.config, x);
    PairScalars s;
    s.lp_w_policy = sequence_logprob(policy, prefix, y_w);
    s.lp_l_policy = sequence_logprob(policy, prefix, y_l);
    s.lp_w_ref = sequence_logprob(ref.params(), prefix, y_w);
    s.lp_l_ref = sequence_logprob(ref.params(), prefix, y_l);
    return s;
}

LossEval variant_loss_eval(LossVariant variant, const PairScalars& scalars, double beta,
                           const BalancedWeights& weights) {
    check_beta(beta);
    TapeLoss t = build_variant_loss(variant, scalars, beta, weights);
    t.tape.backward(t.loss);
    LossEval eval;
    eval.loss = t.tape.value(t.loss);
    eval.d_lp_w = t.tape.adjoint(t.lp_w);
    eval.d_lp_l = t.tape.adjoint(t.lp_l);
    eval.factor = t.factor;
    eval.reward_w = t.reward_w;
    eval.reward_l = t.reward_l;
    return eval;
}

double dpo_loss(const PolicyParameters& policy, const ReferenceSnapshot& ref, const TokenSeq& x,
                const TokenSeq& y_w, const TokenSeq& y_l, double beta) {
    return variant_loss(LossVariant::kDpo, policy, ref, x, y_w, y_l, beta, BalancedWeights{});
}

double bdpo_inner_loss(const PolicyParameters& policy, const ReferenceSnapshot& ref,
                       const TokenSeq& x, const TokenSeq& y_w, const TokenSeq& y_l, double beta,
                       const BalancedWeights& weights) {
    return variant_loss(LossVariant::kDpoBw, policy, ref, x, y_w, y_l, beta, weights);
}

double scaling_factor(ImplicitReward reward_w, ImplicitReward reward_l,
                      const BalancedWeights& weights) {
    if (!std::isfinite(reward_w.value) || !std::isfinite(reward_l.value)) {
        throw std::invalid_argument("scaling_factor requires finite rewards");
    }
    const double num = reward_l.value - reward_w.value;
    const double den = weights.lambda_l * reward_l.value - weights.lambda_w * reward_w.value;
    return std::exp(ScalarTape::log_sigmoid_value(num) - ScalarTape::log_sigmoid_value(den));
}

double bdpo_loss(const PolicyParameters& policy, const ReferenceSnapshot& ref, const TokenSeq& x,
                 const TokenSeq& y_w, const TokenSeq& y_l, double beta,
                 const BalancedWeights& weights) {
    return variant_loss(LossVariant::kBdpo, policy, ref, x, y_w, y_l, beta, weights);
}

double variant_loss(LossVariant variant, const PolicyParameters& policy,
                    const ReferenceSnapshot& ref, const TokenSeq& x, const TokenSeq& y_w,
                    const TokenSeq& y_l, double beta, const BalancedWeights& weights) {
    check_beta(beta);
    return variant_loss_eval(variant, pair_scalars(policy, ref, x, y_w, y_l), beta, weights).loss;
}

std::vector<double> variant_loss_gradient(LossVariant variant, const PolicyParameters& policy,
                                          const ReferenceSnapshot& ref, const TokenSeq& x,
                                          const TokenSeq& y_w, const TokenSeq& y_l, double beta,
                                          const BalancedWeights& weights) {
    check_beta(beta);
    const LossEval eval = variant_loss_eval(variant, pair_scalars(policy, ref, x, y_w, y_l),
                                            beta, weights);
    const TokenSeq prefix = response_prefix(policy.config, x);
    return combine(eval.d_lp_w, logprob_gradient(policy, prefix, y_w), eval.d_lp_l,
                   logprob_gradient(policy, prefix, y_l));
}

std::vector<double> bdpo_inner_analytic_gradient(const PolicyParameters& policy,
                                                 const ReferenceSnapshot& ref, const TokenSeq& x,
                                                 const TokenSeq& y_w, const TokenSeq& y_l,
                                                 double beta, const BalancedWeights& weights) {
    check_beta(beta);
    const ImplicitReward r_w = implicit_reward(policy, ref, x, y_w, beta);
    const ImplicitReward r_l = implicit_reward(policy, ref, x, y_l, beta);
    const double strength =
        -beta * ScalarTape::sigmoid_value(weights.lambda_l * r_l.value -
                                          weights.lambda_w * r_w.value);
    const TokenSeq prefix = response_prefix(policy.config, x);
    return combine(strength * weights.lambda_w, logprob_gradient(policy, prefix, y_w),
                   -strength * weights.lambda_l, logprob_gradient(policy, prefix, y_l));
}

std::vector<double> bdpo_analytic_gradient(const PolicyParameters& policy,
                                           const ReferenceSnapshot& ref, const TokenSeq& x,
                                           const TokenSeq& y_w, const TokenSeq& y_l, double beta,
                                           const BalancedWeights& weights) {
    const ImplicitReward r_w = implicit_reward(policy, ref, x, y_w, beta);
    const ImplicitReward r_l = implicit_reward(policy, ref, x, y_l, beta);
    const double factor = scaling_factor(r_w, r_l, weights);
    std::vector<double> grad = bdpo_inner_analytic_gradient(policy, ref, x, y_w, y_l, beta, weights);
    for (double& g : grad) g *= factor;
    return grad;
}

std::vector<double> bdpo_unfrozen_total_gradient(const PolicyParameters& policy,
                                                 const ReferenceSnapshot& ref, const TokenSeq& x,
                                                 const TokenSeq& y_w, const TokenSeq& y_l,
                                                 double beta, const BalancedWeights& weights) {
    check_beta(beta);
    const PairScalars s = pair_scalars(policy, ref, x, y_w, y_l);
    ScalarTape tape;
    const auto lp_w = tape.leaf(s.lp_w_policy);
    const auto lp_l = tape.leaf(s.lp_l_policy);
    const auto r_w = tape.scale(tape.sub(lp_w, tape.constant(s.lp_w_ref)), beta);
    const auto r_l = tape.scale(tape.sub(lp_l, tape.constant(s.lp_l_ref)), beta);
    const auto weighted_margin =
        tape.sub(tape.scale(r_w, weights.lambda_w), tape.scale(r_l, weights.lambda_l));
    const auto inner = tape.neg(tape.log_sigmoid(weighted_margin));
    // factor differentiated through: sigma(r_l - r_w) / sigma(lambda_l r_l - lambda_w r_w)
    const auto log_num = tape.log_sigmoid(tape.sub(r_l, r_w));
    const auto log_den = tape.log_sigmoid(tape.neg(weighted_margin));
    const auto factor = tape.exp_of(tape.sub(log_num, log_den));
    const auto loss = tape.mul(factor, inner);
    tape.backward(loss);
    const TokenSeq prefix = response_prefix(policy.config, x);
    return combine(tape.adjoint(lp_w), logprob_gradient(policy, prefix, y_w), tape.adjoint(lp_l),
                   logprob_gradient(policy, prefix, y_l));
}

double dpo_loss(const PolicyParameters& policy, const ReferenceSnapshot& ref,
                const PreferencePair& pair, double beta) {
    return dpo_loss(policy, ref, pair.query, pair.preferred, pair.dispreferred, beta);
}

double bdpo_loss(const PolicyParameters& policy, const ReferenceSnapshot& ref,
                 const PreferencePair& pair, double beta, const BalancedWeights& weights) {
    return bdpo_loss(policy, ref, pair.query, pair.preferred, pair.dispreferred, beta, weights);
}

double variant_loss(LossVariant variant, const PolicyParameters& policy,
                    const ReferenceSnapshot& ref, const PreferencePair& pair, double beta,
                    const BalancedWeights& weights) {
    return variant_loss(variant, policy, ref, pair.query, pair.preferred, pair.dispreferred, beta,
                        weights);
}

}  // namespace bdpo
