#pragma once

#include <string>
#include <vector>

#include "bdpo/dataset.hpp"
#include "bdpo/losses.hpp"
#include "bdpo/model.hpp"

namespace bdpo {

enum class Optimizer { kSgd, kAdaptiveMoment };

Optimizer parse_optimizer(const std::string& tag);  // "sgd" | "adaptive-moment"
const char* optimizer_tag(Optimizer optimizer);

struct TrainConfig {
    LossVariant variant = LossVariant::kDpo;
    double beta = 0.1;
    double alpha = 1.5;
    double learning_rate = 0.0;
    int epochs = 1;
    int batch_size = 16;
    uint64_t seed = 0;
    Optimizer optimizer = Optimizer::kSgd;

    void validate() const;
};

// One row per optimizer step. Lambda and factor columns log what actually
// entered the loss: (1, 1) for plain dpo, factor 1 for dpo and dpo-bw.
struct MetricsRow {
    long step = 0;
    double mean_loss = 0.0;
    double mean_reward_margin = 0.0;
    double mean_lambda_w = 0.0;
    double mean_lambda_l = 0.0;
    double mean_scaling_factor = 0.0;

    bool operator==(const MetricsRow&) const = default;
};

// r_hat(x, y_w) - r_hat(x, y_l) at the current policy.
double reward_margin(const PolicyParameters& policy, const ReferenceSnapshot& ref,
                     const PreferencePair& pair, double beta);

struct TrainResult {
    PolicyParameters params;
    std::vector<MetricsRow> metrics;
    double training_seconds = 0.0;
};

// Deterministic minibatch training over the chosen loss variant. The
// reference is frozen from init before the first step; the per-epoch
// shuffle depends only on (seed, epoch); batch loss and gradient are
// ordered arithmetic means; the last partial batch is kept. Aborts with
// NumericalError naming the step if a loss, gradient, or parameter goes
// non-finite.
TrainResult train(const TrainConfig& config, const AnnotatedDataset& data,
                  const PolicyParameters& init);

struct EvalResult {
    double preference_accuracy = 0.0;  // fraction of pairs with margin > 0
    double mean_margin = 0.0;
};

EvalResult evaluate(const PolicyParameters& policy, const ReferenceSnapshot& ref,
                    const std::vector<PreferencePair>& pairs, double beta);

// Header: step,mean_loss,mean_reward_margin,mean_lambda_w,mean_lambda_l,mean_scaling_factor
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

}  // namespace bdpo
