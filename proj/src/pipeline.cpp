#include "tscn/pipeline.hpp"

#include "tscn/errors.hpp"

namespace tscn {

std::string to_string(ProposalSource source) {
    switch (source) {
        case ProposalSource::fused: return "fused";
        case ProposalSource::rgb: return "rgb";
        case ProposalSource::flow: return "flow";
    }
    return "unknown";
}

void check_compatible(const StreamModel& model, const Dataset& dataset) {
    if (model.config.input_dim != dataset.feature_dim || model.config.num_classes != dataset.num_classes) {
        throw DataError(to_string(model.modality) + " checkpoint expects D=" + std::to_string(model.config.input_dim) +
                        ", C=" + std::to_string(model.config.num_classes) + " but the dataset has D=" +
                        std::to_string(dataset.feature_dim) + ", C=" + std::to_string(dataset.num_classes));
    }
}

std::vector<ActionProposal> localize_dataset(const StreamModel& rgb, const StreamModel& flow, const Dataset& dataset,
                                             const LocalizationConfig& config, ProposalSource source) {
    check_compatible(rgb, dataset);
    check_compatible(flow, dataset);
    std::vector<ActionProposal> out;
    for (const auto& video : dataset.videos) {
        std::vector<ActionProposal> props;
        switch (source) {
            case ProposalSource::fused:
                props = localize(video.id, forward(rgb, video.rgb), forward(flow, video.flow), config);
                break;
            case ProposalSource::rgb:
                props = localize_single(video.id, forward(rgb, video.rgb), config);
                break;
            case ProposalSource::flow:
                props = localize_single(video.id, forward(flow, video.flow), config);
                break;
        }
        out.insert(out.end(), props.begin(), props.end());
    }
    return out;
}

EvalReport evaluate_models(const StreamModel& rgb, const StreamModel& flow, const Dataset& dataset,
                           const LocalizationConfig& config, std::span<const double> thresholds,
                           ProposalSource source) {
    if (!dataset.evaluable()) {
        throw DataError("dataset has videos without ground-truth segments; it cannot be evaluated");
    }
    const auto proposals = localize_dataset(rgb, flow, dataset, config, source);
    return evaluate(proposals, ground_truth_of(dataset), dataset.num_classes, thresholds);
}

double mean_attention_variance(const StreamModel& model, const Dataset& dataset) {
    check_compatible(model, dataset);
    double total = 0.0;
    for (const auto& video : dataset.videos) {
        const auto a = forward(model, model.modality == Modality::rgb ? video.rgb : video.flow).attention;
        double mean = 0.0;
        for (double v : a) mean += v;
        mean /= static_cast<double>(a.size());
        double var = 0.0;
        for (double v : a) var += (v - mean) * (v - mean);
        total += var / static_cast<double>(a.size());
    }
    return dataset.videos.empty() ? 0.0 : total / static_cast<double>(dataset.videos.size());
}

}  // namespace tscn
