#pragma once
//
// Static per-video plot emission: an upsampled attention CSV and an SVG with
// one row per attention sequence plus ground-truth and proposal boxes.
//

#include <optional>
#include <string>
#include <vector>

#include "tscn/basemodel.hpp"
#include "tscn/localization.hpp"
#include "tscn/synthdata.hpp"

namespace tscn {

struct VideoPlotData {
    std::string video_id;
    std::size_t upsample_factor = 8;
    std::vector<double> time;  // snippet units, centre of each upsampled step
    std::vector<double> rgb;
    std::vector<double> flow;
    std::vector<double> fused;
    std::optional<std::vector<double>> pseudo_gt;  // held constant within a snippet
    std::vector<Segment> ground_truth;
    std::vector<ActionProposal> proposals;
};

VideoPlotData make_plot_data(const VideoSample& video, const AttentionTcam& rgb, const AttentionTcam& flow,
                             double beta, std::size_t upsample_factor, const std::vector<ActionProposal>& proposals,
                             const std::vector<double>* pseudo_gt = nullptr);

// Columns: time,A_rgb,A_flow,A_fuse[,pseudo_gt]; one row per upsampled step.
std::string plot_csv(const VideoPlotData& data);

std::string plot_svg(const VideoPlotData& data, const std::vector<std::string>& class_names);

}  // namespace tscn
