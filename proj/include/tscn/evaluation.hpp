#pragma once
//
// Temporal detection metrics: interval IoU, per-class average precision with
// greedy score-ordered matching, mAP over IoU thresholds, and
// precision / recall / F-measure.
//

#include <map>
#include <span>
#include <string>
#include <vector>

#include "tscn/localization.hpp"
#include "tscn/synthdata.hpp"

namespace tscn {

struct Interval {
    double start = 0.0;
    double end = 0.0;
};

double iou(const Interval& a, const Interval& b);

struct GroundTruthSegment {
    std::string video_id;
    double start = 0.0;
    double end = 0.0;
    std::size_t category = 0;
};

// Converts 1-based inclusive snippet segments to continuous intervals
// [start - 1, end] in snippet units.
std::vector<GroundTruthSegment> ground_truth_of(const Dataset& dataset);

// Proposals sorted by descending score, then earlier start, then video id.
std::vector<ActionProposal> rank_proposals(std::vector<ActionProposal> proposals);

// For each ranked proposal: true positive or not. Each GT matches at most once.
std::vector<bool> match_proposals(std::span<const ActionProposal> ranked, std::span<const GroundTruthSegment> gt,
                                  double iou_threshold);

// All-point AP for one class. Throws std::domain_error when gt is empty.
double average_precision(std::span<const ActionProposal> proposals, std::span<const GroundTruthSegment> gt,
                         double iou_threshold);

struct ThresholdRow {
    double iou_threshold = 0.0;
    double map = 0.0;
    std::vector<double> class_ap;  // NaN for classes without ground truth
};

struct EvalReport {
    std::vector<ThresholdRow> rows;
    double average_map = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t num_ground_truth = 0;
    std::size_t num_proposals = 0;
    std::vector<std::string> notes;

    double map_at(double threshold) const;
    std::string to_json(const std::vector<std::string>& class_names) const;
    std::string to_table(const std::vector<std::string>& class_names) const;
};

struct PrfResult {
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
    std::size_t true_positives = 0;
};

PrfResult precision_recall_f(std::span<const ActionProposal> proposals, std::span<const GroundTruthSegment> gt,
                             double iou_threshold = 0.5);

// mAP at each threshold (classes without GT excluded and noted) plus P/R/F at
// IoU 0.5. Throws std::invalid_argument when gt is empty.
EvalReport evaluate(std::span<const ActionProposal> proposals, std::span<const GroundTruthSegment> gt,
                    std::size_t num_classes, std::span<const double> thresholds);

// 0.1, 0.2, ..., 0.9 and 0.5, 0.55, ..., 0.95.
std::vector<double> thumos_thresholds();
std::vector<double> activitynet_thresholds();

}  // namespace tscn
