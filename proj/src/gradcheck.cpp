#include "bdpo/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <vector>

#include "bdpo/losses.hpp"
#include "bdpo/model.hpp"
#include "bdpo/rng.hpp"

namespace bdpo {

namespace {

constexpr double kFdStep = 1e-5;

// max-norm difference scaled by the larger max-norm
double scaled_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, scale = 1e-300;
    for (size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::fabs(a[i] - b[i]));
        scale = std::max({scale, std::fabs(a[i]), std::fabs(b[i])});
    }
    return diff / scale;
}

std::vector<double> central_differences(const std::function<double(const PolicyParameters&)>& f,
                                        const PolicyParameters& at) {
    std::vector<double> grad(at.values.size());
    PolicyParameters probe = at;
    for (size_t i = 0; i < at.values.size(); ++i) {
        const double v = at.values[i];
        probe.values[i] = v + kFdStep;
        const double up = f(probe);
        probe.values[i] = v - kFdStep;
        const double down = f(probe);
        probe.values[i] = v;
        grad[i] = (up - down) / (2.0 * kFdStep);
    }
    return grad;
}

struct Instance {
    PolicyParameters policy;
    ReferenceSnapshot ref;
    TokenSeq x, y_w, y_l;
    double beta;
    BalancedWeights weights;
};

TokenSeq random_seq(Rng& rng, int vocab_size, size_t len) {
    TokenSeq out;
    for (size_t i = 0; i < len; ++i) {
        out.push_back(static_cast<TokenId>(1 + rng.below(static_cast<uint64_t>(vocab_size - 1))));
    }
    return out;
}

Instance random_instance(Rng& rng) {
    ModelConfig config;
    config.vocab_size = static_cast<int>(4 + rng.below(5));
    config.embed_dim = static_cast<int>(2 + rng.below(3));
    config.hidden_dim = static_cast<int>(2 + rng.below(4));
    config.context_window = 12;
    config.seed = rng.next_u64();
    config.bos_id = 0;

    PolicyParameters policy = init_params(config);
    const double spread = 0.5 + 2.0 * rng.next_unit();
    for (double& v : policy.values) v *= spread;

    ModelConfig ref_config = config;
    ref_config.seed = rng.next_u64();
    PolicyParameters ref_params = init_params(ref_config);
    ref_params.config = config;

    TokenSeq x = random_seq(rng, config.vocab_size, 1 + rng.below(3));
    TokenSeq y_w = random_seq(rng, config.vocab_size, 1 + rng.below(4));
    TokenSeq y_l = random_seq(rng, config.vocab_size, 1 + rng.below(4));
    while (y_l == y_w) y_l = random_seq(rng, config.vocab_size, 1 + rng.below(4));

    const double mi_w = -0.5 + 3.5 * rng.next_unit();
    const double mi_l = -0.5 + 3.5 * rng.next_unit();
    const double alpha = 0.5 + 2.0 * rng.next_unit();

    return Instance{std::move(policy), ReferenceSnapshot(std::move(ref_params)), std::move(x),
                    std::move(y_w), std::move(y_l), 0.05 + 0.45 * rng.next_unit(),
                    balanced_weights(mi_w, mi_l, alpha)};
}

// Loss as a function of the parameters with any scaling factor frozen at
// the base point; this is the objective whose gradient the library claims.
std::function<double(const PolicyParameters&)> frozen_objective(LossVariant variant,
                                                                const Instance& inst) {
    double factor = 1.0;
    if (variant == LossVariant::kDpoSf || variant == LossVariant::kBdpo) {
        const ImplicitReward r_w = implicit_reward(inst.policy, inst.ref, inst.x, inst.y_w, inst.beta);
        const ImplicitReward r_l = implicit_reward(inst.policy, inst.ref, inst.x, inst.y_l, inst.beta);
        factor = scaling_factor(r_w, r_l, inst.weights);
    }
    const LossVariant inner =
        (variant == LossVariant::kDpoSf || variant == LossVariant::kDpo) ? LossVariant::kDpo
                                                                         : LossVariant::kDpoBw;
    return [=, &inst](const PolicyParameters& p) {
        return factor * variant_loss(inner, p, inst.ref, inst.x, inst.y_w, inst.y_l, inst.beta,
                                     inst.weights);
    };
}

// Fixed instance with clearly unequal weights and policy != ref, used for
// the frozen-vs-unfrozen distinctness check.
Instance canonical_instance() {
    Rng rng(12345);
    Instance inst = random_instance(rng);
    inst.weights = balanced_weights(2.0, 1.0, 1.0);  // (2/3, 4/3)
    inst.beta = 0.25;
    return inst;
}

}  // namespace

std::string GradcheckReport::summary() const {
    std::ostringstream out;
    char buf[160];
    const char* tags[4] = {"dpo", "dpo-bw", "dpo-sf", "bdpo"};
    for (int i = 0; i < 4; ++i) {
        std::snprintf(buf, sizeof(buf), "fd-vs-autodiff    %-7s max rel err %.3e (tol %.0e)\n",
                      tags[i], max_fd_rel[static_cast<size_t>(i)], kFdTol);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "analytic-vs-autodiff inner  max rel err %.3e (tol %.0e)\n",
                  max_analytic_inner_rel, kAnalyticTol);
    out << buf;
    std::snprintf(buf, sizeof(buf), "analytic-vs-autodiff full   max rel err %.3e (tol %.0e)\n",
                  max_analytic_full_rel, kAnalyticTol);
    out << buf;
    std::snprintf(buf, sizeof(buf), "stop-gradient contract      max rel err %.3e (tol %.0e)\n",
                  max_stopgrad_rel, kStopgradTol);
    out << buf;
    std::snprintf(buf, sizeof(buf), "frozen-vs-unfrozen gradient rel diff %.3e (must exceed %.0e)\n",
                  unfrozen_diff, kUnfrozenMinDiff);
    out << buf;
    out << (pass ? "gradcheck PASS" : "gradcheck FAIL") << " (" << trials << " trials)\n";
    return out.str();
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
    if (options.trials < 1) throw std::invalid_argument("trials must be >= 1");
    GradcheckReport report;
    report.trials = options.trials;

    Rng rng(options.seed);
    const LossVariant variants[4] = {LossVariant::kDpo, LossVariant::kDpoBw, LossVariant::kDpoSf,
                                     LossVariant::kBdpo};
    for (int trial = 0; trial < options.trials; ++trial) {
        const Instance inst = random_instance(rng);

        for (size_t vi = 0; vi < 4; ++vi) {
            std::vector<double> autodiff =
                variant_loss_gradient(variants[vi], inst.policy, inst.ref, inst.x, inst.y_w,
                                      inst.y_l, inst.beta, inst.weights);
            if (options.corrupt) autodiff[0] += 1e-2;
            const std::vector<double> fd =
                central_differences(frozen_objective(variants[vi], inst), inst.policy);
            report.max_fd_rel[vi] = std::max(report.max_fd_rel[vi], scaled_rel_diff(autodiff, fd));
        }

        const std::vector<double> inner_autodiff =
            variant_loss_gradient(LossVariant::kDpoBw, inst.policy, inst.ref, inst.x, inst.y_w,
                                  inst.y_l, inst.beta, inst.weights);
        const std::vector<double> inner_analytic = bdpo_inner_analytic_gradient(
            inst.policy, inst.ref, inst.x, inst.y_w, inst.y_l, inst.beta, inst.weights);
        report.max_analytic_inner_rel = std::max(report.max_analytic_inner_rel,
                                                 scaled_rel_diff(inner_analytic, inner_autodiff));

        const std::vector<double> full_autodiff =
            variant_loss_gradient(LossVariant::kBdpo, inst.policy, inst.ref, inst.x, inst.y_w,
                                  inst.y_l, inst.beta, inst.weights);
        const std::vector<double> full_analytic = bdpo_analytic_gradient(
            inst.policy, inst.ref, inst.x, inst.y_w, inst.y_l, inst.beta, inst.weights);
        report.max_analytic_full_rel = std::max(report.max_analytic_full_rel,
                                                scaled_rel_diff(full_analytic, full_autodiff));

        // stop-gradient contract: implemented bdpo gradient is the frozen
        // factor times the inner-loss gradient
        const ImplicitReward r_w = implicit_reward(inst.policy, inst.ref, inst.x, inst.y_w, inst.beta);
        const ImplicitReward r_l = implicit_reward(inst.policy, inst.ref, inst.x, inst.y_l, inst.beta);
        const double factor = scaling_factor(r_w, r_l, inst.weights);
        std::vector<double> scaled_inner = inner_autodiff;
        for (double& g : scaled_inner) g *= factor;
        report.max_stopgrad_rel =
            std::max(report.max_stopgrad_rel, scaled_rel_diff(full_autodiff, scaled_inner));
    }

    const Instance canon = canonical_instance();
    const std::vector<double> frozen =
        variant_loss_gradient(LossVariant::kBdpo, canon.policy, canon.ref, canon.x, canon.y_w,
                              canon.y_l, canon.beta, canon.weights);
    const std::vector<double> unfrozen = bdpo_unfrozen_total_gradient(
        canon.policy, canon.ref, canon.x, canon.y_w, canon.y_l, canon.beta, canon.weights);
    report.unfrozen_diff = scaled_rel_diff(frozen, unfrozen);

    bool pass = true;
    for (double v : report.max_fd_rel) pass = pass && v < GradcheckReport::kFdTol;
    pass = pass && report.max_analytic_inner_rel < GradcheckReport::kAnalyticTol;
    pass = pass && report.max_analytic_full_rel < GradcheckReport::kAnalyticTol;
    pass = pass && report.max_stopgrad_rel < GradcheckReport::kStopgradTol;
    pass = pass && report.unfrozen_diff > GradcheckReport::kUnfrozenMinDiff;
    report.pass = pass;
    return report;
}

}  // namespace bdpo
