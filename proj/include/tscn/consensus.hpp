#pragma once
//
// Two-stream late fusion, pseudo ground truth generation and the iterative
// refinement training loop.
//

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tscn/basemodel.hpp"
#include "tscn/losses.hpp"
#include "tscn/synthdata.hpp"

namespace tscn {

enum class PseudoGtKind { soft, hard };

std::string to_string(PseudoGtKind kind);
PseudoGtKind pseudo_gt_kind_from_string(const std::string& s);

struct PseudoGroundTruth {
    std::string video_id;
    std::vector<double> values;
    PseudoGtKind kind = PseudoGtKind::hard;
    std::size_t source_iteration = 0;  // iteration whose checkpoints produced it
};

struct RefinementConfig {
    double beta = 0.4;
    double theta = 0.5;
    PseudoGtKind kind = PseudoGtKind::hard;
    std::size_t iterations = 4;
    std::size_t epochs_initial = 80;
    std::size_t epochs_refine = 40;
    std::optional<std::size_t> smoothing_kernel;  // temporal max pooling before pseudo GT

    void validate() const;
};

struct OptimizerConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

std::vector<double> fuse_attention(std::span<const double> rgb, std::span<const double> flow, double beta);

// Centered max over a window truncated at the sequence ends.
std::vector<double> max_pool_smooth(std::span<const double> attention, std::size_t kernel);

PseudoGroundTruth make_pseudo_gt(std::span<const double> fused, PseudoGtKind kind, double theta);

// Fused (optionally smoothed) attention of two frozen streams turned into
// pseudo ground truth for every video.
std::vector<PseudoGroundTruth> generate_pseudo_gt(const StreamModel& rgb, const StreamModel& flow,
                                                  const Dataset& dataset, const RefinementConfig& config,
                                                  std::size_t source_iteration);

struct TrainingLogRow {
    std::size_t iteration = 0;
    std::size_t epoch = 0;  // 1-based within the iteration
    Modality stream = Modality::rgb;
    double mean_cls_loss = 0.0;
    double mean_att_loss = 0.0;
    double mean_gt_loss = 0.0;
    double mean_total_loss = 0.0;
};

struct PseudoGtStats {
    std::size_t iteration = 0;  // iteration that consumes the pseudo GT
    double mean_value = 0.0;
    double foreground_fraction = 0.0;  // share of snippets with G > 0.5
    std::size_t snippets = 0;
};

struct TrainingLog {
    std::vector<TrainingLogRow> epochs;
    std::vector<PseudoGtStats> pseudo_gt;

    // CSV with header iteration,epoch,stream,mean_cls_loss,mean_att_loss,
    // mean_gt_loss,mean_total_loss; numbers printed with 17 significant digits.
    std::string to_csv() const;
};

// The lowest-loss checkpoint of each stream within one iteration.
struct IterationCheckpoints {
    std::size_t iteration = 0;
    StreamModel rgb;
    StreamModel flow;
    CheckpointInfo rgb_info;
    CheckpointInfo flow_info;
};

struct RefinementResult {
    std::vector<IterationCheckpoints> iterations;
    std::vector<std::vector<PseudoGroundTruth>> pseudo_gt;  // [n] used by iteration n; [0] empty
    TrainingLog log;
};

using EpochObserver = std::function<void(const TrainingLogRow&)>;

RefinementResult run_refinement(const Dataset& train, const ModelConfig& model_config,
                                const LossConfig& loss_config, const RefinementConfig& refine_config,
                                const OptimizerConfig& optimizer, std::uint64_t seed,
                                const EpochObserver& observer = {});

}  // namespace tscn
