#pragma once
//
// Reference implementations used as test oracles. They are written directly
// from the metric and loss definitions and share no code with the library
// beyond plain data types.
//

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "tscn/tscn.hpp"

namespace oracle {

inline double interval_iou(double a0, double a1, double b0, double b1) {
    const double inter = std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
    const double uni = (a1 - a0) + (b1 - b0) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

// Rank order: score descending, start ascending, video id ascending.
inline std::vector<tscn::ActionProposal> ranked(std::vector<tscn::ActionProposal> props) {
    std::stable_sort(props.begin(), props.end(), [](const auto& a, const auto& b) {
        return std::tie(b.score, a.start, a.video_id) < std::tie(a.score, b.start, b.video_id);
    });
    return props;
}

// True-positive count among the first k ranked proposals, matching from
// scratch: each proposal takes the unmatched same-video GT of highest IoU
// at or above the threshold.
inline std::size_t prefix_true_positives(const std::vector<tscn::ActionProposal>& ranked_props, std::size_t k,
                                         const std::vector<tscn::GroundTruthSegment>& gt, double threshold) {
    std::vector<bool> used(gt.size(), false);
    std::size_t tp = 0;
    for (std::size_t r = 0; r < k; ++r) {
        const auto& p = ranked_props[r];
        double best = -1.0;
        std::size_t best_j = gt.size();
        for (std::size_t j = 0; j < gt.size(); ++j) {
            if (used[j] || gt[j].video_id != p.video_id || gt[j].category != p.category) continue;
            const double v = interval_iou(p.start, p.end, gt[j].start, gt[j].end);
            if (v >= threshold && v > best) {
                best = v;
                best_j = j;
            }
        }
        if (best_j < gt.size()) {
            used[best_j] = true;
            ++tp;
        }
    }
    return tp;
}

// Area under the stepwise precision/recall curve built from every rank prefix.
inline double average_precision(const std::vector<tscn::ActionProposal>& props,
                                const std::vector<tscn::GroundTruthSegment>& gt, double threshold) {
    const auto order = ranked(props);
    const double n_gt = static_cast<double>(gt.size());
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t k = 1; k <= order.size(); ++k) {
        const double tp = static_cast<double>(prefix_true_positives(order, k, gt, threshold));
        const double recall = tp / n_gt;
        const double precision = tp / static_cast<double>(k);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

// Mean AP over classes that have ground truth.
inline double mean_average_precision(const std::vector<tscn::ActionProposal>& props,
                                     const std::vector<tscn::GroundTruthSegment>& gt, std::size_t num_classes,
                                     double threshold) {
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::vector<tscn::ActionProposal> pc;
        std::vector<tscn::GroundTruthSegment> gc;
        for (const auto& p : props)
            if (p.category == c) pc.push_back(p);
        for (const auto& g : gt)
            if (g.category == c) gc.push_back(g);
        if (gc.empty()) continue;
        sum += average_precision(pc, gc, threshold);
        ++counted;
    }
    return counted ? sum / static_cast<double>(counted) : 0.0;
}

// Attention-weighted outer-inner contrast on a 1-based inclusive proposal,
// evaluated from the definition with explicit loops.
inline double oic(std::size_t ts, std::size_t te, const std::vector<double>& w) {
    const double len = static_cast<double>(te - ts);
    const long lo = std::max(1L, static_cast<long>(std::floor(static_cast<double>(ts) - len / 4.0)));
    const long hi = std::min(static_cast<long>(w.size()), static_cast<long>(std::ceil(static_cast<double>(te) + len / 4.0)));
    double inner = 0.0;
    double outer = 0.0;
    std::size_t n_inner = 0;
    std::size_t n_outer = 0;
    for (long i = lo; i <= hi; ++i) {
        const double v = w[static_cast<std::size_t>(i - 1)];
        if (i >= static_cast<long>(ts) && i <= static_cast<long>(te)) {
            inner += v;
            ++n_inner;
        } else {
            outer += v;
            ++n_outer;
        }
    }
    const double margin = n_outer ? outer / static_cast<double>(n_outer) : 0.0;
    return inner / static_cast<double>(n_inner) - margin;
}

// Total objective of one stream on one video: cross entropy on the video
// prediction, attention normalization, and (when given) the pseudo ground
// truth term.
inline double stream_objective(const tscn::StreamModel& model, const tscn::Matrix& x, const std::vector<double>& label,
                               const std::vector<double>* gt, const tscn::LossConfig& lc) {
    const auto out = tscn::forward(model, x);
    double loss = 0.0;
    for (std::size_t c = 0; c < label.size(); ++c) {
        if (label[c] > 0.0) loss -= label[c] * std::log(std::max(out.video_prediction[c], 1e-12));
    }
    std::vector<double> a = out.attention;
    std::sort(a.begin(), a.end());
    const std::size_t l = std::max<std::size_t>(1, a.size() / lc.s);
    const double bottom = std::accumulate(a.begin(), a.begin() + static_cast<long>(l), 0.0) / static_cast<double>(l);
    const double top = std::accumulate(a.end() - static_cast<long>(l), a.end(), 0.0) / static_cast<double>(l);
    loss += lc.alpha * (bottom - top);
    if (gt) {
        double se = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) se += (out.attention[i] - (*gt)[i]) * (out.attention[i] - (*gt)[i]);
        loss += lc.gamma * se / static_cast<double>(a.size());
    }
    return loss;
}

// Analytic gradient of stream_objective through the library's backward pass.
inline std::vector<double> stream_gradient(const tscn::StreamModel& model, const tscn::Matrix& x,
                                           const std::vector<double>& label, const std::vector<double>* gt,
                                           const tscn::LossConfig& lc) {
    const auto rec = tscn::forward_recorded(model, x);
    tscn::OutputGrads up;
    up.video_prediction = tscn::classification_loss(label, rec.out.video_prediction).grad;
    const auto att = tscn::attention_norm_loss(rec.out.attention, lc.s);
    up.attention.assign(rec.out.attention.size(), 0.0);
    for (std::size_t i = 0; i < up.attention.size(); ++i) up.attention[i] = lc.alpha * att.grad[i];
    if (gt) {
        const auto g = tscn::pseudo_gt_loss(rec.out.attention, *gt);
        for (std::size_t i = 0; i < up.attention.size(); ++i) up.attention[i] += lc.gamma * g.grad[i];
    }
    return tscn::backward(model, rec, up).flatten();
}

}  // namespace oracle
