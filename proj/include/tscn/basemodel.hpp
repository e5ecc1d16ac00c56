#pragma once
//
// One stream of the two-stream model: temporal conv embedding, class-agnostic
// attention, attention-weighted pooling, a softmax classifier applied to the
// pooled feature (video prediction) and to every snippet (T-CAM).
//

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tscn/numkit.hpp"

namespace tscn {

enum class Modality { rgb, flow };

std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

struct ModelConfig {
    std::size_t input_dim = 32;
    std::size_t embed_dim = 32;  // D'
    std::size_t num_classes = 5;
    std::size_t conv_layers = 2;
    std::size_t conv_kernel = 3;
};

// Parameter tensors of one stream. Also used to hold gradients.
struct StreamParams {
    std::vector<Matrix> conv_weights;  // (K * D_in) x D_out per layer
    std::vector<Matrix> conv_biases;   // 1 x D_out per layer
    Matrix attention_weights;          // D' x 1
    Matrix attention_bias;             // 1 x 1
    Matrix class_weights;              // D' x C
    Matrix class_bias;                 // 1 x C

    static StreamParams zeros_like(const StreamParams& other);

    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;
    std::vector<std::string> tensor_names() const;
    std::size_t parameter_count() const;

    std::vector<double> flatten() const;
    void assign(std::span<const double> flat);

    void scale(double factor);
    bool all_finite() const;

    friend bool operator==(const StreamParams&, const StreamParams&) = default;
};

struct StreamModel {
    ModelConfig config;
    Modality modality = Modality::rgb;
    StreamParams params;

    std::size_t conv_kernel() const { return config.conv_kernel; }
};

// Fan-in uniform initialization, zero biases.
StreamModel init_stream_model(const ModelConfig& config, Modality modality, std::uint64_t seed);

struct AttentionTcam {
    std::vector<double> attention;         // A_i in (0, 1), length T
    Matrix tcam;                           // T x C, softmax rows
    std::vector<double> video_prediction;  // length C
    Matrix embedded;                       // T x D'
    std::vector<double> foreground;        // length D'
};

// Activations kept from a forward pass for the backward pass.
struct ForwardRecord {
    AttentionTcam out;
    std::vector<Matrix> conv_inputs;       // input to each conv layer
    std::vector<Matrix> conv_outputs;      // pre-ReLU output of each conv layer
    std::vector<double> class_logits;      // pooled logits
};

AttentionTcam forward(const StreamModel& model, const Matrix& features);
ForwardRecord forward_recorded(const StreamModel& model, const Matrix& features);

// Gradients of some scalar loss with respect to the three model outputs.
// Empty members are treated as zero.
struct OutputGrads {
    std::vector<double> attention;         // length T
    std::vector<double> video_prediction;  // length C
    Matrix tcam;                           // T x C
};

StreamParams backward(const StreamModel& model, const ForwardRecord& record, const OutputGrads& upstream);

// Checkpoint metadata stored in the JSON header.
struct CheckpointInfo {
    std::uint64_t seed = 0;
    std::size_t iteration = 0;
    std::size_t epoch = 0;
    double epoch_mean_loss = 0.0;
};

void save_checkpoint(const StreamModel& model, const CheckpointInfo& info, const std::filesystem::path& path);
StreamModel load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

}  // namespace tscn
