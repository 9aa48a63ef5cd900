#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace bdpo {

struct GradcheckOptions {
    uint64_t seed = 0;
    int trials = 100;
    // Test hook: perturbs one autodiff gradient entry so the check must fail.
    bool corrupt = false;
};

// Tolerances are fixed here, not configurable: finite differences at h=1e-5
// against every variant's implemented gradient, the closed-form gradient
// against reverse mode, and the stop-gradient contract.
struct GradcheckReport {
    int trials = 0;
    // max scaled relative error per variant, order: dpo, dpo-bw, dpo-sf, bdpo
    std::array<double, 4> max_fd_rel{};
    double max_analytic_inner_rel = 0.0;  // closed form vs reverse mode, inner loss
    double max_analytic_full_rel = 0.0;   // with the frozen factor applied
    double max_stopgrad_rel = 0.0;        // implemented grad vs factor x inner grad
    double unfrozen_diff = 0.0;           // frozen vs unfrozen on the canonical instance
    bool pass = false;

    static constexpr double kFdTol = 1e-4;
    static constexpr double kAnalyticTol = 1e-10;
    static constexpr double kStopgradTol = 1e-12;
    static constexpr double kUnfrozenMinDiff = 1e-9;

    std::string summary() const;
};

GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace bdpo
