#pragma once

#include <string>
#include <vector>

#include "bdpo/model.hpp"
#include "bdpo/pair.hpp"

namespace bdpo {

// Per-pair loss weights: the better-understood response of a pair gets the
// smaller weight. Always sums to 2 and stays strictly inside (0, 2).
struct BalancedWeights {
    double lambda_w = 1.0;
    double lambda_l = 1.0;
    double alpha = 0.0;

    bool operator==(const BalancedWeights&) const = default;
};

// MI values are clamped to 1e-6 from below, then
//   lambda_w = 2 * mi_l^alpha / (mi_w^alpha + mi_l^alpha)
//   lambda_l = 2 * mi_w^alpha / (mi_w^alpha + mi_l^alpha)
// evaluated in log space so extreme ratios saturate gracefully.
BalancedWeights balanced_weights(double mi_w, double mi_l, double alpha);

enum class LossVariant { kDpo, kDpoBw, kDpoSf, kBdpo };

// Canonical tags: dpo, dpo-bw, dpo-sf, bdpo. parse throws on unknown tags.
LossVariant parse_variant(const std::string& tag);
const char* variant_tag(LossVariant variant);

// beta-scaled log probability ratio of policy to reference.
struct ImplicitReward {
    double value = 0.0;
};

ImplicitReward implicit_reward(const PolicyParameters& policy, const ReferenceSnapshot& ref,
                               const TokenSeq& x, const TokenSeq& y, double beta);

// -log sigma(r_w - r_l)
double dpo_loss(const PolicyParameters& policy, const ReferenceSnapshot& ref,
                const TokenSeq& x, const TokenSeq& y_w, const TokenSeq& y_l, double beta);

// -log sigma(lambda_w * r_w - lambda_l * r_l)
double bdpo_inner_loss(const PolicyParameters& policy, const ReferenceSnapshot& ref,
                       const TokenSeq& x, const TokenSeq& y_w, const TokenSeq& y_l,
                       double beta, const BalancedWeights& weights);

// sigma(r_l - r_w) / sigma(lambda_l * r_l - lambda_w * r_w). Evaluated at the
// current parameters and treated as a constant during differentiation.
double scaling_factor(ImplicitReward reward_w, ImplicitReward reward_l,
                      const BalancedWeights& weights);

// scaling_factor x inner loss; the factor is frozen in the gradient.
double bdpo_loss(const PolicyParameters& policy, const ReferenceSnapshot& ref,
                 const TokenSeq& x, const TokenSeq& y_w, const TokenSeq& y_l, double beta,
                 const BalancedWeights& weights);

double variant_loss(LossVariant variant, const PolicyParameters& policy,
                    const ReferenceSnapshot& ref, const TokenSeq& x, const TokenSeq& y_w,
                    const TokenSeq& y_l, double beta, const BalancedWeights& weights);

// ---- scalar core shared by the gradient paths and the training loop ----

// Sequence log-probabilities of both responses under policy and reference.
struct PairScalars {
    double lp_w_policy = 0.0;
    double lp_l_policy = 0.0;
    double lp_w_ref = 0.0;
    double lp_l_ref = 0.0;
};

PairScalars pair_scalars(const PolicyParameters& policy, const ReferenceSnapshot& ref,
                         const TokenSeq& x, const TokenSeq& y_w, const TokenSeq& y_l);

// Loss value plus its partials w.r.t. the two policy log-probabilities,
// computed by reverse mode over the scalar tape. Scaling factors enter the
// tape as constants (stop-gradient), and `factor` reports what was applied:
// exactly 1 for dpo and dpo-bw.
struct LossEval {
    double loss = 0.0;
    double d_lp_w = 0.0;
    double d_lp_l = 0.0;
    double factor = 1.0;
    double reward_w = 0.0;
    double reward_l = 0.0;
};

LossEval variant_loss_eval(LossVariant variant, const PairScalars& scalars, double beta,
                           const BalancedWeights& weights);

// Reverse-mode gradient of variant_loss w.r.t. the policy parameters.
std::vector<double> variant_loss_gradient(LossVariant variant, const PolicyParameters& policy,
                                          const ReferenceSnapshot& ref, const TokenSeq& x,
                                          const TokenSeq& y_w, const TokenSeq& y_l, double beta,
                                          const BalancedWeights& weights);

// Closed-form gradient of the inner loss:
//   -beta * sigma(lambda_l r_l - lambda_w r_w)
//         * [lambda_w grad log pi(y_w|x) - lambda_l grad log pi(y_l|x)]
std::vector<double> bdpo_inner_analytic_gradient(const PolicyParameters& policy,
                                                 const ReferenceSnapshot& ref, const TokenSeq& x,
                                                 const TokenSeq& y_w, const TokenSeq& y_l,
                                                 double beta, const BalancedWeights& weights);

// The inner closed form multiplied by the frozen scaling factor.
std::vector<double> bdpo_analytic_gradient(const PolicyParameters& policy,
                                           const ReferenceSnapshot& ref, const TokenSeq& x,
                                           const TokenSeq& y_w, const TokenSeq& y_l, double beta,
                                           const BalancedWeights& weights);

// Diagnostic: total derivative of factor x inner with gradient flowing
// through the factor as well. This is NOT the training gradient; it exists
// so checks can confirm the stop-gradient path differs from it.
std::vector<double> bdpo_unfrozen_total_gradient(const PolicyParameters& policy,
                                                 const ReferenceSnapshot& ref, const TokenSeq& x,
                                                 const TokenSeq& y_w, const TokenSeq& y_l,
                                                 double beta, const BalancedWeights& weights);

// Convenience overloads on preference pairs.
double dpo_loss(const PolicyParameters& policy, const ReferenceSnapshot& ref,
                const PreferencePair& pair, double beta);
double bdpo_loss(const PolicyParameters& policy, const ReferenceSnapshot& ref,
                 const PreferencePair& pair, double beta, const BalancedWeights& weights);
double variant_loss(LossVariant variant, const PolicyParameters& policy,
                    const ReferenceSnapshot& ref, const PreferencePair& pair, double beta,
                    const BalancedWeights& weights);

// bos followed by the query; the context every response is scored under.
TokenSeq response_prefix(const ModelConfig& config, const TokenSeq& x);

}  // namespace bdpo
