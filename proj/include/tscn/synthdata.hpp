#pragma once
//
// Synthetic two-modality video features with planted action segments, and
// the on-disk dataset format (manifest.json + raw float32 feature files).
//

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tscn/numkit.hpp"

namespace tscn {

// 1-based inclusive snippet range with a 0-based category index.
struct Segment {
    std::size_t start = 1;
    std::size_t end = 1;
    std::size_t category = 0;

    friend bool operator==(const Segment&, const Segment&) = default;
};

// Generator bookkeeping for one video. Not needed for training; kept so tests
// can cross-check what was planted.
struct PlantedEvents {
    std::vector<Segment> rgb_confounders;  // RGB-only signal over background
    std::vector<Segment> flow_missed;      // actions whose flow signal was suppressed

    friend bool operator==(const PlantedEvents&, const PlantedEvents&) = default;
};

struct VideoSample {
    std::string id;
    std::size_t length = 0;  // T
    std::vector<double> label;
    Matrix rgb;
    Matrix flow;
    std::optional<std::vector<Segment>> gt_segments;
    std::optional<PlantedEvents> planted;

    friend bool operator==(const VideoSample&, const VideoSample&) = default;
};

struct Dataset {
    std::size_t num_classes = 0;
    std::size_t feature_dim = 0;
    std::vector<std::string> class_names;
    std::optional<double> seconds_per_snippet;
    std::vector<VideoSample> videos;

    // True when every video carries ground-truth segments.
    bool evaluable() const;
    const VideoSample& find(const std::string& id) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SyntheticDataset {
    Dataset train;
    Dataset test;
};

struct GeneratorConfig {
    std::size_t num_train = 60;
    std::size_t num_test = 30;
    std::size_t length_min = 40;
    std::size_t length_max = 80;
    std::size_t num_classes = 5;
    std::size_t feature_dim = 32;
    std::size_t actions_min = 1;
    std::size_t actions_max = 3;
    std::size_t classes_per_video_max = 2;
    std::size_t action_length_min = 4;
    std::size_t action_length_max = 12;
    double rgb_signal = 3.5;
    double flow_signal = 4.0;
    double rgb_noise = 1.0;
    double flow_noise = 1.0;
    // Share of an RGB action's signal energy carried by its category's scene
    // direction. Confounders carry the same energy purely along the scene
    // direction, so only frame-level supervision can tell them apart.
    double rgb_scene_share = 0.5;
    double rgb_false_positive_rate = 0.5;
    double flow_miss_rate = 0.2;
    // Amplitude fraction of the flow pattern kept on missed (slow) actions.
    double flow_miss_residual = 0.7;
    std::uint64_t seed = 0;

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

SyntheticDataset generate(const GeneratorConfig& config);

enum class SignalKind { rgb_actor = 0, flow_motion = 1, rgb_scene = 2 };

// Unit-norm direction planted for one signal kind and category.
std::vector<double> signal_direction(const GeneratorConfig& config, SignalKind kind, std::size_t category);

// The per-snippet patterns added to features: RGB inside actions, RGB inside
// confounders, and flow inside (non-suppressed) actions.
std::vector<double> rgb_action_pattern(const GeneratorConfig& config, std::size_t category);
std::vector<double> rgb_confounder_pattern(const GeneratorConfig& config, std::size_t category);
std::vector<double> flow_action_pattern(const GeneratorConfig& config, std::size_t category);

// Checks label / segment invariants; throws DataError.
void validate_video(const VideoSample& video, std::size_t num_classes, std::size_t feature_dim);

void save(const Dataset& dataset, const std::filesystem::path& directory);
Dataset load(const std::filesystem::path& directory);

}  // namespace tscn
