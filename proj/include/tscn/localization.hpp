#pragma once
//
// Test-time proposal generation from the two streams: late fusion, linear
// upsampling, category selection, attention thresholding and OIC scoring.
//

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tscn/basemodel.hpp"
#include "tscn/numkit.hpp"

namespace tscn {

// Boundaries are continuous positions in snippet units: snippet i (1-based)
// covers [i - 1, i].
struct ActionProposal {
    std::string video_id;
    double start = 0.0;
    double end = 0.0;
    std::size_t category = 0;  // 0-based
    double score = 0.0;
};

struct LocalizationConfig {
    std::size_t upsample_factor = 8;
    double attention_threshold = 0.5;
    std::size_t top_k = 2;
    double class_score_floor = 0.1;
    double beta = 0.4;

    void validate() const;
};

std::vector<double> upsample_linear(std::span<const double> sequence, std::size_t factor);
Matrix upsample_linear(const Matrix& sequence, std::size_t factor);

// 0-based indices of the top_k categories, dropping any below floor.
std::vector<std::size_t> select_categories(std::span<const double> prediction, std::size_t top_k, double floor);

// Maximal runs with attention > threshold as 1-based inclusive pairs.
std::vector<std::pair<std::size_t, std::size_t>> extract_segments(std::span<const double> attention,
                                                                  double threshold);

// Outer-inner contrast of attention-weighted T-CAM for the 1-based inclusive
// proposal [start, end] of `category`.
double oic_score(std::size_t start, std::size_t end, std::size_t category, std::span<const double> attention,
                 const Matrix& tcam);

// Same score from a precomputed weight sequence w_i = A_i * s_{i,c}.
double oic_score(std::size_t start, std::size_t end, std::span<const double> weights);

// Fused outputs of two streams for one video.
struct FusedOutputs {
    std::vector<double> attention;
    Matrix tcam;
    std::vector<double> video_prediction;
};

FusedOutputs fuse_outputs(const AttentionTcam& rgb, const AttentionTcam& flow, double beta);

std::vector<ActionProposal> localize(const std::string& video_id, const AttentionTcam& rgb,
                                     const AttentionTcam& flow, const LocalizationConfig& config);

// Single-stream localization (the stream's own outputs are used unfused).
std::vector<ActionProposal> localize_single(const std::string& video_id, const AttentionTcam& stream,
                                            const LocalizationConfig& config);

// {"results": {video_id: [{"label", "score", "segment": [start, end]}]}}
std::string proposals_to_json(const std::vector<ActionProposal>& proposals,
                              const std::vector<std::string>& class_names,
                              const std::vector<std::string>& video_ids);
std::vector<ActionProposal> proposals_from_json(const std::string& text, const std::vector<std::string>& class_names);

}  // namespace tscn
