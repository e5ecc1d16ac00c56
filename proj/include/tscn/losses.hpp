#pragma once

#include <optional>
#include <span>
#include <vector>

namespace tscn {

struct LossConfig {
    double alpha = 0.1;   // attention normalization weight
    double gamma = 2.0;   // pseudo ground truth weight
    std::size_t s = 8;    // top/bottom selection divisor

    void validate() const;
};

// Value and gradient of a loss with respect to its first argument.
struct LossValue {
    double value = 0.0;
    std::vector<double> grad;
};

// Cross entropy -sum_c y_c log(max(y_hat_c, 1e-12)); grad is w.r.t. y_hat.
LossValue classification_loss(std::span<const double> label, std::span<const double> prediction);

struct AttentionNormLoss {
    double value = 0.0;
    std::vector<double> grad;           // w.r.t. attention
    std::vector<std::size_t> top;       // selected indices, descending value
    std::vector<std::size_t> bottom;    // selected indices, ascending value
};

// Mean of the l smallest attentions minus mean of the l largest,
// l = max(1, floor(T / s)). Ties go to the lowest snippet index.
AttentionNormLoss attention_norm_loss(std::span<const double> attention, std::size_t s);

// (1/T) sum (A_i - G_i)^2; grad is w.r.t. attention.
LossValue pseudo_gt_loss(std::span<const double> attention, std::span<const double> pseudo_gt);

// Weighted objective. iteration 0 uses cls + alpha * att and rejects a
// pseudo ground truth term; later iterations require it.
double total_loss(double cls, double att, std::optional<double> gt, const LossConfig& config,
                  std::size_t iteration);

}  // namespace tscn
