#include "tscn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tscn/errors.hpp"

namespace tscn {

namespace {
constexpr double kLogFloor = 1e-12;
}

void LossConfig::validate() const {
    if (!(alpha >= 0.0)) throw std::invalid_argument("LossConfig: alpha must be >= 0");
    if (!(gamma >= 0.0)) throw std::invalid_argument("LossConfig: gamma must be >= 0");
    if (s < 1) throw std::invalid_argument("LossConfig: s must be >= 1");
}

LossValue classification_loss(std::span<const double> label, std::span<const double> prediction) {
    if (label.size() != prediction.size()) {
        throw ShapeError("classification_loss: label has " + std::to_string(label.size()) + " classes, prediction " +
                         std::to_string(prediction.size()));
    }
    LossValue out;
    out.grad.assign(label.size(), 0.0);
    for (std::size_t c = 0; c < label.size(); ++c) {
        if (label[c] == 0.0) continue;
        if (prediction[c] > kLogFloor) {
            out.value -= label[c] * std::log(prediction[c]);
            out.grad[c] = -label[c] / prediction[c];
        } else {
            out.value -= label[c] * std::log(kLogFloor);
        }
    }
    return out;
}

AttentionNormLoss attention_norm_loss(std::span<const double> attention, std::size_t s) {
    if (attention.empty()) {
        throw ShapeError("attention_norm_loss: empty attention sequence");
    }
    if (s == 0) {
        throw std::invalid_argument("attention_norm_loss: s must be >= 1");
    }
    const std::size_t steps = attention.size();
    const std::size_t l = std::max<std::size_t>(1, steps / s);

    std::vector<std::size_t> idx(steps);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    AttentionNormLoss out;
    out.top = idx;
    out.bottom = idx;
    auto by_desc = [&](std::size_t a, std::size_t b) {
        return attention[a] != attention[b] ? attention[a] > attention[b] : a < b;
    };
    auto by_asc = [&](std::size_t a, std::size_t b) {
        return attention[a] != attention[b] ? attention[a] < attention[b] : a < b;
    };
    std::partial_sort(out.top.begin(), out.top.begin() + static_cast<std::ptrdiff_t>(l), out.top.end(), by_desc);
    std::partial_sort(out.bottom.begin(), out.bottom.begin() + static_cast<std::ptrdiff_t>(l), out.bottom.end(),
                      by_asc);
    out.top.resize(l);
    out.bottom.resize(l);

    const double inv = 1.0 / static_cast<double>(l);
    out.grad.assign(steps, 0.0);
    // Pairing the k-th smallest with the k-th largest makes every term
    // nonpositive, so rounding can never push the loss above zero.
    double diff_sum = 0.0;
    for (std::size_t k = 0; k < l; ++k) {
        diff_sum += attention[out.bottom[k]] - attention[out.top[k]];
        out.grad[out.top[k]] -= inv;
        out.grad[out.bottom[k]] += inv;
    }
    out.value = diff_sum * inv;
    return out;
}

LossValue pseudo_gt_loss(std::span<const double> attention, std::span<const double> pseudo_gt) {
    if (attention.size() != pseudo_gt.size()) {
        throw ShapeError("pseudo_gt_loss: attention length " + std::to_string(attention.size()) +
                         " != pseudo ground truth length " + std::to_string(pseudo_gt.size()));
    }
    if (attention.empty()) {
        throw ShapeError("pseudo_gt_loss: empty sequence");
    }
    const double inv = 1.0 / static_cast<double>(attention.size());
    LossValue out;
    out.grad.resize(attention.size());
    for (std::size_t i = 0; i < attention.size(); ++i) {
        const double diff = attention[i] - pseudo_gt[i];
        out.value += diff * diff;
        out.grad[i] = 2.0 * diff * inv;
    }
    out.value *= inv;
    return out;
}

double total_loss(double cls, double att, std::optional<double> gt, const LossConfig& config,
                  std::size_t iteration) {
    if (iteration == 0) {
        if (gt) {
            throw std::invalid_argument("total_loss: refinement iteration 0 has no pseudo ground truth term");
        }
        return cls + config.alpha * att;
    }
    if (!gt) {
        throw std::invalid_argument("total_loss: iteration " + std::to_string(iteration) +
                                    " requires a pseudo ground truth term");
    }
    return cls + config.alpha * att + config.gamma * *gt;
}

}  // namespace tscn
