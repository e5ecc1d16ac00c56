#include "tscn/localization.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "tscn/consensus.hpp"
#include "tscn/errors.hpp"

namespace tscn {

using json = nlohmann::ordered_json;

void LocalizationConfig::validate() const {
    if (upsample_factor < 1) throw std::invalid_argument("LocalizationConfig: upsample_factor must be >= 1");
    if (!(attention_threshold > 0.0 && attention_threshold < 1.0)) {
        throw std::invalid_argument("LocalizationConfig: attention_threshold must lie in (0, 1)");
    }
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("LocalizationConfig: beta must lie in [0, 1]");
}

namespace {

// Source coordinate and interpolation weight for output index j.
struct Tap {
    std::size_t lo;
    std::size_t hi;
    double frac;
};

Tap tap_for(std::size_t j, std::size_t factor, std::size_t length) {
    double p = (static_cast<double>(j) + 0.5) / static_cast<double>(factor) - 0.5;
    p = std::clamp(p, 0.0, static_cast<double>(length - 1));
    const auto lo = static_cast<std::size_t>(std::floor(p));
    const std::size_t hi = std::min(lo + 1, length - 1);
    return {lo, hi, p - static_cast<double>(lo)};
}

}  // namespace

std::vector<double> upsample_linear(std::span<const double> sequence, std::size_t factor) {
    if (factor == 0) throw std::invalid_argument("upsample_linear: factor must be >= 1");
    if (sequence.empty()) throw ShapeError("upsample_linear: empty sequence");
    std::vector<double> out(sequence.size() * factor);
    for (std::size_t j = 0; j < out.size(); ++j) {
        const Tap tap = tap_for(j, factor, sequence.size());
        out[j] = tap.frac == 0.0 ? sequence[tap.lo]
                                 : (1.0 - tap.frac) * sequence[tap.lo] + tap.frac * sequence[tap.hi];
    }
    return out;
}

Matrix upsample_linear(const Matrix& sequence, std::size_t factor) {
    if (factor == 0) throw std::invalid_argument("upsample_linear: factor must be >= 1");
    if (sequence.rows() == 0) throw ShapeError("upsample_linear: empty sequence");
    Matrix out(sequence.rows() * factor, sequence.cols());
    for (std::size_t j = 0; j < out.rows(); ++j) {
        const Tap tap = tap_for(j, factor, sequence.rows());
        for (std::size_t c = 0; c < sequence.cols(); ++c) {
            out(j, c) = tap.frac == 0.0 ? sequence(tap.lo, c)
                                        : (1.0 - tap.frac) * sequence(tap.lo, c) + tap.frac * sequence(tap.hi, c);
        }
    }
    return out;
}

std::vector<std::size_t> select_categories(std::span<const double> prediction, std::size_t top_k, double floor) {
    std::vector<std::size_t> idx(prediction.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return prediction[a] > prediction[b]; });
    idx.resize(std::min(top_k, idx.size()));
    std::erase_if(idx, [&](std::size_t c) { return prediction[c] < floor; });
    return idx;
}

std::vector<std::pair<std::size_t, std::size_t>> extract_segments(std::span<const double> attention,
                                                                  double threshold) {
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    std::size_t i = 0;
    while (i < attention.size()) {
        if (attention[i] > threshold) {
            std::size_t j = i;
            while (j + 1 < attention.size() && attention[j + 1] > threshold) ++j;
            runs.emplace_back(i + 1, j + 1);
            i = j + 1;
        } else {
            ++i;
        }
    }
    return runs;
}

double oic_score(std::size_t start, std::size_t end, std::span<const double> weights) {
    const std::size_t length = weights.size();
    if (start < 1 || start > end || end > length) {
        throw std::out_of_range("oic_score: proposal [" + std::to_string(start) + ", " + std::to_string(end) +
                                "] outside 1.." + std::to_string(length));
    }
    const double span = static_cast<double>(end - start);
    const double margin = span / 4.0;
    const double outer_lo = std::floor(static_cast<double>(start) - margin);
    const double outer_hi = std::ceil(static_cast<double>(end) + margin);
    const std::size_t lo = outer_lo < 1.0 ? 1 : static_cast<std::size_t>(outer_lo);
    const std::size_t hi = std::min(length, static_cast<std::size_t>(outer_hi));

    double inner = 0.0;
    for (std::size_t i = start; i <= end; ++i) inner += weights[i - 1];
    double outer = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) outer += weights[i - 1];

    const auto inner_len = static_cast<double>(end - start + 1);
    const auto outer_len = static_cast<double>(hi - lo + 1);
    const double inner_mean = inner / inner_len;
    if (outer_len == inner_len) {
        return inner_mean;
    }
    return inner_mean - (outer - inner) / (outer_len - inner_len);
}

double oic_score(std::size_t start, std::size_t end, std::size_t category, std::span<const double> attention,
                 const Matrix& tcam) {
    if (tcam.rows() != attention.size() || category >= tcam.cols()) {
        throw ShapeError("oic_score: attention/T-CAM shape mismatch or category out of range");
    }
    std::vector<double> w(attention.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = attention[i] * tcam(i, category);
    return oic_score(start, end, w);
}

FusedOutputs fuse_outputs(const AttentionTcam& rgb, const AttentionTcam& flow, double beta) {
    if (!rgb.tcam.same_shape(flow.tcam)) {
        throw ShapeError("fuse_outputs: stream T-CAM shapes differ");
    }
    FusedOutputs f;
    f.attention = fuse_attention(rgb.attention, flow.attention, beta);
    f.video_prediction = fuse_attention(rgb.video_prediction, flow.video_prediction, beta);
    f.tcam = Matrix(rgb.tcam.rows(), rgb.tcam.cols());
    for (std::size_t i = 0; i < f.tcam.size(); ++i) {
        f.tcam.values()[i] = beta * rgb.tcam.values()[i] + (1.0 - beta) * flow.tcam.values()[i];
    }
    return f;
}

namespace {

std::vector<ActionProposal> localize_fused(const std::string& video_id, const FusedOutputs& fused,
                                           const LocalizationConfig& config) {
    config.validate();
    const auto attention = upsample_linear(fused.attention, config.upsample_factor);
    const Matrix tcam = upsample_linear(fused.tcam, config.upsample_factor);
    const auto categories = select_categories(fused.video_prediction, config.top_k, config.class_score_floor);
    const auto segments = extract_segments(attention, config.attention_threshold);
    const auto factor = static_cast<double>(config.upsample_factor);

    std::vector<ActionProposal> out;
    for (std::size_t c : categories) {
        for (const auto& [s, e] : segments) {
            const double psi = oic_score(s, e, c, attention, tcam);
            if (psi > 0.0) {
                out.push_back({video_id, static_cast<double>(s - 1) / factor, static_cast<double>(e) / factor, c, psi});
            }
        }
    }
    return out;
}

}  // namespace

std::vector<ActionProposal> localize(const std::string& video_id, const AttentionTcam& rgb,
                                     const AttentionTcam& flow, const LocalizationConfig& config) {
    return localize_fused(video_id, fuse_outputs(rgb, flow, config.beta), config);
}

std::vector<ActionProposal> localize_single(const std::string& video_id, const AttentionTcam& stream,
                                            const LocalizationConfig& config) {
    return localize_fused(video_id, {stream.attention, stream.tcam, stream.video_prediction}, config);
}

std::string proposals_to_json(const std::vector<ActionProposal>& proposals,
                              const std::vector<std::string>& class_names,
                              const std::vector<std::string>& video_ids) {
    json results = json::object();
    for (const auto& id : video_ids) results[id] = json::array();
    for (const auto& p : proposals) {
        if (p.category >= class_names.size()) {
            throw ShapeError("proposals_to_json: category index out of range");
        }
        results[p.video_id].push_back(
            {{"label", class_names[p.category]}, {"score", p.score}, {"segment", {p.start, p.end}}});
    }
    return json{{"results", std::move(results)}}.dump(2) + "\n";
}

std::vector<ActionProposal> proposals_from_json(const std::string& text, const std::vector<std::string>& class_names) {
    std::map<std::string, std::size_t> index;
    for (std::size_t c = 0; c < class_names.size(); ++c) index[class_names[c]] = c;
    std::vector<ActionProposal> out;
    try {
        const json doc = json::parse(text);
        for (const auto& [vid, items] : doc.at("results").items()) {
            for (const auto& item : items) {
                const auto label = item.at("label").get<std::string>();
                const auto it = index.find(label);
                if (it == index.end()) {
                    throw DataError("proposal for video '" + vid + "' has unknown label '" + label + "'");
                }
                const auto& seg = item.at("segment");
                out.push_back({vid, seg.at(0).get<double>(), seg.at(1).get<double>(), it->second,
                               item.at("score").get<double>()});
            }
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed proposal JSON: ") + e.what());
    }
    return out;
}

}  // namespace tscn
