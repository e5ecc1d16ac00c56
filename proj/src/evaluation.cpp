#include "tscn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tscn {

using json = nlohmann::ordered_json;

double iou(const Interval& a, const Interval& b) {
    if (!(a.start <= a.end) || !(b.start <= b.end)) {
        throw std::invalid_argument("iou: interval start must not exceed its end");
    }
    const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
    const double uni = (a.end - a.start) + (b.end - b.start) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<GroundTruthSegment> ground_truth_of(const Dataset& dataset) {
    std::vector<GroundTruthSegment> out;
    for (const auto& v : dataset.videos) {
        if (!v.gt_segments) continue;
        for (const auto& s : *v.gt_segments) {
            out.push_back({v.id, static_cast<double>(s.start - 1), static_cast<double>(s.end), s.category});
        }
    }
    return out;
}

std::vector<ActionProposal> rank_proposals(std::vector<ActionProposal> proposals) {
    std::stable_sort(proposals.begin(), proposals.end(), [](const ActionProposal& a, const ActionProposal& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.start != b.start) return a.start < b.start;
        return a.video_id < b.video_id;
    });
    return proposals;
}

std::vector<bool> match_proposals(std::span<const ActionProposal> ranked, std::span<const GroundTruthSegment> gt,
                                  double iou_threshold) {
    std::vector<bool> used(gt.size(), false);
    std::vector<bool> hits(ranked.size(), false);
    for (std::size_t p = 0; p < ranked.size(); ++p) {
        const auto& prop = ranked[p];
        double best = -1.0;
        std::size_t best_gt = gt.size();
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (used[g] || gt[g].video_id != prop.video_id || gt[g].category != prop.category) continue;
            const double overlap = iou({prop.start, prop.end}, {gt[g].start, gt[g].end});
            if (overlap > best) {
                best = overlap;
                best_gt = g;
            }
        }
        if (best_gt < gt.size() && best >= iou_threshold) {
            used[best_gt] = true;
            hits[p] = true;
        }
    }
    return hits;
}

double average_precision(std::span<const ActionProposal> proposals, std::span<const GroundTruthSegment> gt,
                         double iou_threshold) {
    if (gt.empty()) {
        throw std::domain_error("average_precision: no ground truth segments for this class");
    }
    const auto ranked = rank_proposals({proposals.begin(), proposals.end()});
    const auto hits = match_proposals(ranked, gt, iou_threshold);
    double sum = 0.0;
    std::size_t tp = 0;
    for (std::size_t k = 0; k < hits.size(); ++k) {
        if (hits[k]) {
            ++tp;
            sum += static_cast<double>(tp) / static_cast<double>(k + 1);
        }
    }
    return sum / static_cast<double>(gt.size());
}

PrfResult precision_recall_f(std::span<const ActionProposal> proposals, std::span<const GroundTruthSegment> gt,
                             double iou_threshold) {
    PrfResult r;
    if (proposals.empty()) {
        return r;
    }
    const auto ranked = rank_proposals({proposals.begin(), proposals.end()});
    const auto hits = match_proposals(ranked, gt, iou_threshold);
    r.true_positives = static_cast<std::size_t>(std::count(hits.begin(), hits.end(), true));
    r.precision = static_cast<double>(r.true_positives) / static_cast<double>(proposals.size());
    r.recall = gt.empty() ? 0.0 : static_cast<double>(r.true_positives) / static_cast<double>(gt.size());
    r.f_measure = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

EvalReport evaluate(std::span<const ActionProposal> proposals, std::span<const GroundTruthSegment> gt,
                    std::size_t num_classes, std::span<const double> thresholds) {
    if (gt.empty()) {
        throw std::invalid_argument("evaluate: no ground truth segments at all");
    }
    EvalReport report;
    std::vector<std::vector<ActionProposal>> by_class(num_classes);
    std::vector<std::vector<GroundTruthSegment>> gt_by_class(num_classes);
    for (const auto& p : proposals) {
        if (p.category >= num_classes) throw std::invalid_argument("evaluate: proposal category out of range");
        by_class[p.category].push_back(p);
    }
    for (const auto& g : gt) {
        if (g.category >= num_classes) throw std::invalid_argument("evaluate: ground truth category out of range");
        gt_by_class[g.category].push_back(g);
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (gt_by_class[c].empty()) {
            report.notes.push_back("class " + std::to_string(c) + " has no ground truth; excluded from mAP");
        }
    }

    for (double thr : thresholds) {
        ThresholdRow row;
        row.iou_threshold = thr;
        double total = 0.0;
        std::size_t counted = 0;
        for (std::size_t c = 0; c < num_classes; ++c) {
            if (gt_by_class[c].empty()) {
                row.class_ap.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            const double ap = average_precision(by_class[c], gt_by_class[c], thr);
            row.class_ap.push_back(ap);
            total += ap;
            ++counted;
        }
        row.map = total / static_cast<double>(counted);
        report.average_map += row.map;
        report.rows.push_back(std::move(row));
    }
    if (!report.rows.empty()) {
        report.average_map /= static_cast<double>(report.rows.size());
    }

    const auto prf = precision_recall_f(proposals, gt, 0.5);
    report.precision = prf.precision;
    report.recall = prf.recall;
    report.f_measure = prf.f_measure;
    report.true_positives = prf.true_positives;
    report.num_proposals = proposals.size();
    report.false_positives = proposals.size() - prf.true_positives;
    report.num_ground_truth = gt.size();
    return report;
}

double EvalReport::map_at(double threshold) const {
    for (const auto& r : rows) {
        if (std::abs(r.iou_threshold - threshold) < 1e-9) return r.map;
    }
    throw std::out_of_range("EvalReport::map_at: threshold " + std::to_string(threshold) + " was not evaluated");
}

std::string EvalReport::to_json(const std::vector<std::string>& class_names) const {
    json doc;
    json rows_json = json::array();
    for (const auto& r : rows) {
        json per_class = json::object();
        for (std::size_t c = 0; c < r.class_ap.size(); ++c) {
            const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
            per_class[name] = std::isnan(r.class_ap[c]) ? json(nullptr) : json(r.class_ap[c]);
        }
        rows_json.push_back({{"iou_threshold", r.iou_threshold}, {"mAP", r.map}, {"class_ap", per_class}});
    }
    doc["thresholds"] = std::move(rows_json);
    doc["average_mAP"] = average_map;
    doc["precision"] = precision;
    doc["recall"] = recall;
    doc["f_measure"] = f_measure;
    doc["counts"] = {{"true_positives", true_positives},
                     {"false_positives", false_positives},
                     {"ground_truth", num_ground_truth},
                     {"proposals", num_proposals}};
    doc["notes"] = notes;
    return doc.dump(2) + "\n";
}

std::string EvalReport::to_table(const std::vector<std::string>& class_names) const {
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-10s %8s", "IoU", "mAP(%)");
    os << buf;
    for (const auto& name : class_names) {
        std::snprintf(buf, sizeof buf, " %10.10s", name.c_str());
        os << buf;
    }
    os << '\n';
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-10.2f %8.2f", r.iou_threshold, 100.0 * r.map);
        os << buf;
        for (double ap : r.class_ap) {
            if (std::isnan(ap)) {
                std::snprintf(buf, sizeof buf, " %10s", "-");
            } else {
                std::snprintf(buf, sizeof buf, " %10.2f", 100.0 * ap);
            }
            os << buf;
        }
        os << '\n';
    }
    std::snprintf(buf, sizeof buf, "%-10s %8.2f\n", "average", 100.0 * average_map);
    os << buf;
    std::snprintf(buf, sizeof buf, "precision@0.5 %.2f%%  recall@0.5 %.2f%%  F-measure %.4f\n", 100.0 * precision,
                  100.0 * recall, f_measure);
    os << buf;
    std::snprintf(buf, sizeof buf, "TP %zu  FP %zu  GT %zu\n", true_positives, false_positives, num_ground_truth);
    os << buf;
    for (const auto& n : notes) os << "note: " << n << '\n';
    return os.str();
}

std::vector<double> thumos_thresholds() {
    std::vector<double> out;
    for (int i = 1; i <= 9; ++i) out.push_back(i / 10.0);
    return out;
}

std::vector<double> activitynet_thresholds() {
    std::vector<double> out;
    for (int i = 0; i < 10; ++i) out.push_back((50 + 5 * i) / 100.0);
    return out;
}

}  // namespace tscn
