#include "tscn/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tscn/errors.hpp"
#include "tscn/random.hpp"

namespace tscn {

std::string to_string(PseudoGtKind kind) { return kind == PseudoGtKind::soft ? "soft" : "hard"; }

PseudoGtKind pseudo_gt_kind_from_string(const std::string& s) {
    if (s == "soft") return PseudoGtKind::soft;
    if (s == "hard") return PseudoGtKind::hard;
    throw std::invalid_argument("unknown pseudo ground truth kind '" + s + "' (expected soft or hard)");
}

void RefinementConfig::validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("RefinementConfig: beta must lie in [0, 1]");
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("RefinementConfig: theta must lie in (0, 1)");
    if (smoothing_kernel && *smoothing_kernel % 2 == 0) {
        throw std::invalid_argument("RefinementConfig: smoothing kernel must be odd");
    }
}

std::vector<double> fuse_attention(std::span<const double> rgb, std::span<const double> flow, double beta) {
    if (rgb.size() != flow.size()) {
        throw ShapeError("fuse_attention: rgb length " + std::to_string(rgb.size()) + " != flow length " +
                         std::to_string(flow.size()));
    }
    if (!(beta >= 0.0 && beta <= 1.0)) {
        throw std::invalid_argument("fuse_attention: beta must lie in [0, 1]");
    }
    std::vector<double> out(rgb.size());
    for (std::size_t i = 0; i < rgb.size(); ++i) {
        // Agreeing streams pass through exactly.
        out[i] = rgb[i] == flow[i] ? rgb[i] : beta * rgb[i] + (1.0 - beta) * flow[i];
    }
    return out;
}

std::vector<double> max_pool_smooth(std::span<const double> attention, std::size_t kernel) {
    if (kernel == 0 || kernel % 2 == 0) {
        throw std::invalid_argument("max_pool_smooth: kernel must be odd, got " + std::to_string(kernel));
    }
    const std::size_t half = kernel / 2;
    const std::size_t n = attention.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        out[i] = *std::max_element(attention.begin() + static_cast<std::ptrdiff_t>(lo),
                                   attention.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    }
    return out;
}

PseudoGroundTruth make_pseudo_gt(std::span<const double> fused, PseudoGtKind kind, double theta) {
    PseudoGroundTruth gt;
    gt.kind = kind;
    gt.values.reserve(fused.size());
    for (double v : fused) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("make_pseudo_gt: fused attention value " + std::to_string(v) +
                                        " outside [0, 1]");
        }
        gt.values.push_back(kind == PseudoGtKind::soft ? v : (v > theta ? 1.0 : 0.0));
    }
    return gt;
}

std::vector<PseudoGroundTruth> generate_pseudo_gt(const StreamModel& rgb, const StreamModel& flow,
                                                  const Dataset& dataset, const RefinementConfig& config,
                                                  std::size_t source_iteration) {
    std::vector<PseudoGroundTruth> out;
    out.reserve(dataset.videos.size());
    for (const auto& video : dataset.videos) {
        const auto a_rgb = forward(rgb, video.rgb).attention;
        const auto a_flow = forward(flow, video.flow).attention;
        auto fused = fuse_attention(a_rgb, a_flow, config.beta);
        if (config.smoothing_kernel) {
            fused = max_pool_smooth(fused, *config.smoothing_kernel);
        }
        auto gt = make_pseudo_gt(fused, config.kind, config.theta);
        gt.video_id = video.id;
        gt.source_iteration = source_iteration;
        out.push_back(std::move(gt));
    }
    return out;
}

std::string TrainingLog::to_csv() const {
    std::ostringstream os;
    os << "iteration,epoch,stream,mean_cls_loss,mean_att_loss,mean_gt_loss,mean_total_loss\n";
    char buf[256];
    for (const auto& r : epochs) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%s,%.17g,%.17g,%.17g,%.17g\n", r.iteration, r.epoch,
                      to_string(r.stream).c_str(), r.mean_cls_loss, r.mean_att_loss, r.mean_gt_loss,
                      r.mean_total_loss);
        os << buf;
    }
    return os.str();
}

namespace {

struct StreamRun {
    std::vector<TrainingLogRow> rows;
    StreamModel best;
    CheckpointInfo best_info;
};

const Matrix& features_of(const VideoSample& v, Modality m) { return m == Modality::rgb ? v.rgb : v.flow; }

// Trains one stream for one refinement iteration, starting from `model`
// (updated in place) with a fresh optimizer.
StreamRun train_stream(StreamModel& model, const Dataset& train, const std::vector<PseudoGroundTruth>* pseudo_gt,
                       const LossConfig& loss_config, const OptimizerConfig& opt, std::size_t iteration,
                       std::size_t epochs, std::uint64_t seed) {
    AdamState adam;
    adam.learning_rate = opt.learning_rate;
    adam.beta1 = opt.beta1;
    adam.beta2 = opt.beta2;
    adam.epsilon = opt.epsilon;

    StreamRun run;
    run.best = model;
    double best_loss = INFINITY;
    const std::size_t n = train.videos.size();
    std::vector<std::size_t> order(n);

    for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(seed, 0x5eed, iteration, epoch));
        rng.shuffle(std::span<std::size_t>(order));

        TrainingLogRow row;
        row.iteration = iteration;
        row.epoch = epoch;
        row.stream = model.modality;
        for (std::size_t idx : order) {
            const auto& video = train.videos[idx];
            const ForwardRecord rec = forward_recorded(model, features_of(video, model.modality));
            const auto cls = classification_loss(video.label, rec.out.video_prediction);
            const auto att = attention_norm_loss(rec.out.attention, loss_config.s);

            OutputGrads up;
            up.video_prediction = cls.grad;
            up.attention.resize(att.grad.size());
            for (std::size_t i = 0; i < att.grad.size(); ++i) up.attention[i] = loss_config.alpha * att.grad[i];

            std::optional<double> gt_value;
            if (pseudo_gt) {
                const auto gt = pseudo_gt_loss(rec.out.attention, (*pseudo_gt)[idx].values);
                gt_value = gt.value;
                for (std::size_t i = 0; i < gt.grad.size(); ++i) up.attention[i] += loss_config.gamma * gt.grad[i];
            }
            const double total = total_loss(cls.value, att.value, gt_value, loss_config, iteration);
            if (!std::isfinite(total)) {
                throw NumericError("non-finite loss in stream " + to_string(model.modality) + ", iteration " +
                                   std::to_string(iteration) + ", epoch " + std::to_string(epoch) + ", video " +
                                   video.id);
            }
            row.mean_cls_loss += cls.value;
            row.mean_att_loss += att.value;
            row.mean_gt_loss += gt_value.value_or(0.0);
            row.mean_total_loss += total;

            const StreamParams grads = backward(model, rec, up);
            if (!grads.all_finite()) {
                throw NumericError("non-finite gradient in stream " + to_string(model.modality) + ", iteration " +
                                   std::to_string(iteration) + ", epoch " + std::to_string(epoch) + ", video " +
                                   video.id);
            }
            const auto p = model.params.tensors();
            const auto g = grads.tensors();
            adam_step(std::span<const std::span<double>>(p), std::span<const std::span<const double>>(g), adam);
        }
        const double inv = 1.0 / static_cast<double>(n);
        row.mean_cls_loss *= inv;
        row.mean_att_loss *= inv;
        row.mean_gt_loss *= inv;
        row.mean_total_loss *= inv;
        run.rows.push_back(row);
        if (row.mean_total_loss < best_loss) {
            best_loss = row.mean_total_loss;
            run.best = model;
            run.best_info = {seed, iteration, epoch, row.mean_total_loss};
        }
    }
    if (epochs == 0) {
        run.best_info = {seed, iteration, 0, 0.0};
    }
    return run;
}

PseudoGtStats summarize(const std::vector<PseudoGroundTruth>& gts, std::size_t iteration) {
    PseudoGtStats s;
    s.iteration = iteration;
    double fg = 0.0;
    for (const auto& g : gts) {
        for (double v : g.values) {
            s.mean_value += v;
            fg += v > 0.5 ? 1.0 : 0.0;
        }
        s.snippets += g.values.size();
    }
    if (s.snippets > 0) {
        s.mean_value /= static_cast<double>(s.snippets);
        s.foreground_fraction = fg / static_cast<double>(s.snippets);
    }
    return s;
}

}  // namespace

RefinementResult run_refinement(const Dataset& train, const ModelConfig& model_config,
                                const LossConfig& loss_config, const RefinementConfig& refine_config,
                                const OptimizerConfig& optimizer, std::uint64_t seed, const EpochObserver& observer) {
    if (train.videos.empty()) {
        throw std::invalid_argument("run_refinement: training set is empty");
    }
    loss_config.validate();
    refine_config.validate();
    for (const auto& v : train.videos) {
        validate_video(v, train.num_classes, train.feature_dim);
    }
    if (model_config.input_dim != train.feature_dim || model_config.num_classes != train.num_classes) {
        throw ShapeError("run_refinement: model dimensions do not match the dataset");
    }

    StreamModel rgb = init_stream_model(model_config, Modality::rgb, seed);
    StreamModel flow = init_stream_model(model_config, Modality::flow, seed);

    RefinementResult result;
    result.pseudo_gt.emplace_back();
    const EpochObserver* obs = observer ? &observer : nullptr;

    for (std::size_t iteration = 0; iteration <= refine_config.iterations; ++iteration) {
        const std::vector<PseudoGroundTruth>* gt = nullptr;
        if (iteration > 0) {
            const auto& prev = result.iterations.back();
            result.pseudo_gt.push_back(generate_pseudo_gt(prev.rgb, prev.flow, train, refine_config, iteration - 1));
            result.log.pseudo_gt.push_back(summarize(result.pseudo_gt.back(), iteration));
            gt = &result.pseudo_gt.back();
            // Warm start from the checkpoints that produced the pseudo GT.
            rgb = prev.rgb;
            flow = prev.flow;
        }
        const std::size_t epochs = iteration == 0 ? refine_config.epochs_initial : refine_config.epochs_refine;

        // The streams are independent once the pseudo GT is fixed.
        auto flow_job = std::async(std::launch::async, [&] {
            return train_stream(flow, train, gt, loss_config, optimizer, iteration, epochs, seed);
        });
        StreamRun rgb_run;
        try {
            rgb_run = train_stream(rgb, train, gt, loss_config, optimizer, iteration, epochs, seed);
        } catch (...) {
            flow_job.wait();
            throw;
        }
        StreamRun flow_run = flow_job.get();

        for (std::size_t e = 0; e < epochs; ++e) {
            for (const auto* run : {&rgb_run, &flow_run}) {
                result.log.epochs.push_back(run->rows[e]);
                if (obs) (*obs)(run->rows[e]);
            }
        }
        result.iterations.push_back(
            {iteration, std::move(rgb_run.best), std::move(flow_run.best), rgb_run.best_info, flow_run.best_info});
    }
    return result;
}

}  // namespace tscn
