#include "tscn/basemodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "tscn/errors.hpp"
#include "tscn/random.hpp"

namespace tscn {

using json = nlohmann::ordered_json;

std::string to_string(Modality m) { return m == Modality::rgb ? "rgb" : "flow"; }

Modality modality_from_string(const std::string& s) {
    if (s == "rgb") return Modality::rgb;
    if (s == "flow") return Modality::flow;
    throw std::invalid_argument("unknown modality '" + s + "'");
}

StreamParams StreamParams::zeros_like(const StreamParams& other) {
    StreamParams p;
    for (const auto& w : other.conv_weights) p.conv_weights.emplace_back(w.rows(), w.cols());
    for (const auto& b : other.conv_biases) p.conv_biases.emplace_back(b.rows(), b.cols());
    p.attention_weights = Matrix(other.attention_weights.rows(), other.attention_weights.cols());
    p.attention_bias = Matrix(other.attention_bias.rows(), other.attention_bias.cols());
    p.class_weights = Matrix(other.class_weights.rows(), other.class_weights.cols());
    p.class_bias = Matrix(other.class_bias.rows(), other.class_bias.cols());
    return p;
}

std::vector<std::span<double>> StreamParams::tensors() {
    std::vector<std::span<double>> out;
    for (std::size_t l = 0; l < conv_weights.size(); ++l) {
        out.push_back(conv_weights[l].values());
        out.push_back(conv_biases[l].values());
    }
    out.push_back(attention_weights.values());
    out.push_back(attention_bias.values());
    out.push_back(class_weights.values());
    out.push_back(class_bias.values());
    return out;
}

std::vector<std::span<const double>> StreamParams::tensors() const {
    std::vector<std::span<const double>> out;
    for (std::size_t l = 0; l < conv_weights.size(); ++l) {
        out.push_back(conv_weights[l].values());
        out.push_back(conv_biases[l].values());
    }
    out.push_back(attention_weights.values());
    out.push_back(attention_bias.values());
    out.push_back(class_weights.values());
    out.push_back(class_bias.values());
    return out;
}

std::vector<std::string> StreamParams::tensor_names() const {
    std::vector<std::string> out;
    for (std::size_t l = 0; l < conv_weights.size(); ++l) {
        out.push_back("conv" + std::to_string(l) + ".weight");
        out.push_back("conv" + std::to_string(l) + ".bias");
    }
    out.insert(out.end(), {"attention.weight", "attention.bias", "classifier.weight", "classifier.bias"});
    return out;
}

std::size_t StreamParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors()) n += t.size();
    return n;
}

std::vector<double> StreamParams::flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& t : tensors()) out.insert(out.end(), t.begin(), t.end());
    return out;
}

void StreamParams::assign(std::span<const double> flat) {
    if (flat.size() != parameter_count()) {
        throw ShapeError("StreamParams::assign: expected " + std::to_string(parameter_count()) + " values, got " +
                         std::to_string(flat.size()));
    }
    std::size_t offset = 0;
    for (auto t : tensors()) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), t.size(), t.begin());
        offset += t.size();
    }
}

void StreamParams::scale(double factor) {
    for (auto t : tensors()) {
        for (auto& v : t) v *= factor;
    }
}

bool StreamParams::all_finite() const {
    for (const auto& t : tensors()) {
        if (!std::all_of(t.begin(), t.end(), [](double v) { return std::isfinite(v); })) return false;
    }
    return true;
}

StreamModel init_stream_model(const ModelConfig& config, Modality modality, std::uint64_t seed) {
    if (config.conv_kernel % 2 == 0) {
        throw ShapeError("conv_kernel must be odd");
    }
    if (config.num_classes < 2 || config.input_dim == 0 || config.embed_dim == 0) {
        throw ShapeError("model dimensions must be positive (and num_classes >= 2)");
    }
    StreamModel model;
    model.config = config;
    model.modality = modality;
    Rng rng(derive_seed(seed, 0x30de1, modality == Modality::rgb ? 0 : 1));

    auto uniform_fill = [&](Matrix& m, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (auto& v : m.values()) v = rng.uniform(-bound, bound);
    };

    std::size_t in_dim = config.input_dim;
    for (std::size_t l = 0; l < config.conv_layers; ++l) {
        Matrix w(config.conv_kernel * in_dim, config.embed_dim);
        uniform_fill(w, config.conv_kernel * in_dim);
        model.params.conv_weights.push_back(std::move(w));
        model.params.conv_biases.emplace_back(1, config.embed_dim);
        in_dim = config.embed_dim;
    }
    model.params.attention_weights = Matrix(in_dim, 1);
    uniform_fill(model.params.attention_weights, in_dim);
    model.params.attention_bias = Matrix(1, 1);
    model.params.class_weights = Matrix(in_dim, config.num_classes);
    uniform_fill(model.params.class_weights, in_dim);
    model.params.class_bias = Matrix(1, config.num_classes);
    return model;
}

// ---------------------------------------------------------------------------

ForwardRecord forward_recorded(const StreamModel& model, const Matrix& features) {
    const auto& p = model.params;
    if (features.rows() == 0) {
        throw ShapeError("forward: video has no snippets");
    }
    if (features.cols() != model.config.input_dim) {
        throw ShapeError("forward: feature width " + std::to_string(features.cols()) + " does not match model input " +
                         std::to_string(model.config.input_dim));
    }
    ForwardRecord rec;
    Matrix h = features;
    for (std::size_t l = 0; l < p.conv_weights.size(); ++l) {
        rec.conv_inputs.push_back(h);
        Matrix pre = temporal_conv_forward(h, p.conv_weights[l], p.conv_biases[l], model.config.conv_kernel);
        h = relu_forward(pre);
        rec.conv_outputs.push_back(std::move(pre));
    }
    const std::size_t steps = h.rows();
    const std::size_t width = h.cols();

    auto& out = rec.out;
    out.attention.resize(steps);
    double mass = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
        double z = p.attention_bias(0, 0);
        const auto x = h.row_span(t);
        for (std::size_t d = 0; d < width; ++d) z += x[d] * p.attention_weights(d, 0);
        out.attention[t] = sigmoid(z);
        mass += out.attention[t];
    }

    out.foreground.assign(width, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
        const auto x = h.row_span(t);
        for (std::size_t d = 0; d < width; ++d) out.foreground[d] += out.attention[t] * x[d];
    }
    for (auto& v : out.foreground) v /= mass;

    const Matrix pooled_logits = fc_forward(Matrix::row(out.foreground), p.class_weights, p.class_bias);
    rec.class_logits = pooled_logits.data();
    out.video_prediction = softmax(rec.class_logits);

    const Matrix snippet_logits = fc_forward(h, p.class_weights, p.class_bias);
    out.tcam = Matrix(steps, snippet_logits.cols());
    for (std::size_t t = 0; t < steps; ++t) {
        const auto s = softmax(snippet_logits.row_span(t));
        std::copy(s.begin(), s.end(), out.tcam.row_span(t).begin());
    }
    out.embedded = std::move(h);
    return rec;
}

AttentionTcam forward(const StreamModel& model, const Matrix& features) {
    return std::move(forward_recorded(model, features).out);
}

StreamParams backward(const StreamModel& model, const ForwardRecord& record, const OutputGrads& upstream) {
    const auto& out = record.out;
    if (out.attention.empty() || record.conv_inputs.size() != model.params.conv_weights.size()) {
        throw std::logic_error("backward: no recorded forward pass for this model");
    }
    const auto& p = model.params;
    const Matrix& x = out.embedded;
    const std::size_t steps = x.rows();
    const std::size_t width = x.cols();
    const std::size_t classes = p.class_weights.cols();

    if (!upstream.attention.empty() && upstream.attention.size() != steps) {
        throw ShapeError("backward: attention gradient length mismatch");
    }
    if (!upstream.video_prediction.empty() && upstream.video_prediction.size() != classes) {
        throw ShapeError("backward: video prediction gradient length mismatch");
    }
    if (!upstream.tcam.empty() && (upstream.tcam.rows() != steps || upstream.tcam.cols() != classes)) {
        throw ShapeError("backward: tcam gradient shape mismatch");
    }

    StreamParams g = StreamParams::zeros_like(p);
    Matrix dx(steps, width);
    std::vector<double> d_attention = upstream.attention.empty() ? std::vector<double>(steps, 0.0) : upstream.attention;

    if (!upstream.video_prediction.empty()) {
        const auto dz = softmax_backward(out.video_prediction, upstream.video_prediction);
        std::vector<double> d_fg(width, 0.0);
        for (std::size_t d = 0; d < width; ++d) {
            const auto w = p.class_weights.row_span(d);
            auto gw = g.class_weights.row_span(d);
            for (std::size_t c = 0; c < classes; ++c) {
                gw[c] += out.foreground[d] * dz[c];
                d_fg[d] += w[c] * dz[c];
            }
        }
        for (std::size_t c = 0; c < classes; ++c) g.class_bias(0, c) += dz[c];

        // x_fg = sum_t A_t x_t / sum_t A_t
        double mass = 0.0;
        for (double a : out.attention) mass += a;
        for (std::size_t t = 0; t < steps; ++t) {
            const auto xt = x.row_span(t);
            auto dxt = dx.row_span(t);
            const double share = out.attention[t] / mass;
            double proj = 0.0;
            for (std::size_t d = 0; d < width; ++d) {
                dxt[d] += share * d_fg[d];
                proj += (xt[d] - out.foreground[d]) * d_fg[d];
            }
            d_attention[t] += proj / mass;
        }
    }

    if (!upstream.tcam.empty()) {
        Matrix dz(steps, classes);
        for (std::size_t t = 0; t < steps; ++t) {
            const auto row = softmax_backward(out.tcam.row_span(t), upstream.tcam.row_span(t));
            std::copy(row.begin(), row.end(), dz.row_span(t).begin());
        }
        const DenseGrads dg = fc_backward(x, p.class_weights, dz);
        for (std::size_t i = 0; i < g.class_weights.size(); ++i) g.class_weights.values()[i] += dg.weights.values()[i];
        for (std::size_t i = 0; i < g.class_bias.size(); ++i) g.class_bias.values()[i] += dg.bias.values()[i];
        for (std::size_t i = 0; i < dx.size(); ++i) dx.values()[i] += dg.input.values()[i];
    }

    for (std::size_t t = 0; t < steps; ++t) {
        const double a = out.attention[t];
        const double dl = d_attention[t] * a * (1.0 - a);
        if (dl == 0.0) continue;
        const auto xt = x.row_span(t);
        auto dxt = dx.row_span(t);
        for (std::size_t d = 0; d < width; ++d) {
            g.attention_weights(d, 0) += xt[d] * dl;
            dxt[d] += p.attention_weights(d, 0) * dl;
        }
        g.attention_bias(0, 0) += dl;
    }

    for (std::size_t l = p.conv_weights.size(); l-- > 0;) {
        const Matrix d_pre = relu_backward(record.conv_outputs[l], dx);
        ConvGrads cg = temporal_conv_backward(record.conv_inputs[l], p.conv_weights[l], model.config.conv_kernel, d_pre);
        g.conv_weights[l] = std::move(cg.weights);
        g.conv_biases[l] = std::move(cg.bias);
        dx = std::move(cg.input);
    }
    return g;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'T', 'S', 'C', 'N', 'C', 'K', 'P', 'T'};

std::uint64_t to_le(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
        return r;
    }
}

}  // namespace

void save_checkpoint(const StreamModel& model, const CheckpointInfo& info, const std::filesystem::path& path) {
    json header;
    header["format"] = 1;
    header["modality"] = to_string(model.modality);
    header["config"] = {{"input_dim", model.config.input_dim},     {"embed_dim", model.config.embed_dim},
                        {"num_classes", model.config.num_classes}, {"conv_layers", model.config.conv_layers},
                        {"conv_kernel", model.config.conv_kernel}};
    header["seed"] = info.seed;
    header["iteration"] = info.iteration;
    header["epoch"] = info.epoch;
    header["epoch_mean_loss"] = info.epoch_mean_loss;
    json tensors = json::array();
    const auto names = model.params.tensor_names();
    std::vector<const Matrix*> mats;
    for (std::size_t l = 0; l < model.params.conv_weights.size(); ++l) {
        mats.push_back(&model.params.conv_weights[l]);
        mats.push_back(&model.params.conv_biases[l]);
    }
    mats.insert(mats.end(), {&model.params.attention_weights, &model.params.attention_bias,
                             &model.params.class_weights, &model.params.class_bias});
    for (std::size_t i = 0; i < mats.size(); ++i) {
        tensors.push_back({{"name", names[i]}, {"rows", mats[i]->rows()}, {"cols", mats[i]->cols()}});
    }
    header["tensors"] = std::move(tensors);
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write checkpoint " + path.string());
    }
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t len = to_le(text.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (double v : model.params.flatten()) {
        const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v));
        out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    if (!out) {
        throw DataError("write failed for checkpoint " + path.string());
    }
}

StreamModel load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("missing checkpoint " + path.string());
    }
    char magic[8];
    std::uint64_t len = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw DataError(path.string() + " is not a checkpoint file");
    }
    len = to_le(len);
    if (len > (1u << 24)) {
        throw DataError(path.string() + ": implausible header length");
    }
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) {
        throw DataError(path.string() + ": truncated header");
    }

    StreamModel model;
    try {
        const json header = json::parse(text);
        const auto& c = header.at("config");
        model.config.input_dim = c.at("input_dim").get<std::size_t>();
        model.config.embed_dim = c.at("embed_dim").get<std::size_t>();
        model.config.num_classes = c.at("num_classes").get<std::size_t>();
        model.config.conv_layers = c.at("conv_layers").get<std::size_t>();
        model.config.conv_kernel = c.at("conv_kernel").get<std::size_t>();
        model.modality = modality_from_string(header.at("modality").get<std::string>());
        if (info) {
            info->seed = header.at("seed").get<std::uint64_t>();
            info->iteration = header.at("iteration").get<std::size_t>();
            info->epoch = header.at("epoch").get<std::size_t>();
            info->epoch_mean_loss = header.at("epoch_mean_loss").get<double>();
        }
        model.params = init_stream_model(model.config, model.modality, 0).params;
        const auto names = model.params.tensor_names();
        const auto& tensors = header.at("tensors");
        auto spans = model.params.tensors();
        if (tensors.size() != spans.size()) {
            throw DataError(path.string() + ": tensor count does not match the declared architecture");
        }
        for (std::size_t i = 0; i < spans.size(); ++i) {
            const auto rows = tensors[i].at("rows").get<std::size_t>();
            const auto cols = tensors[i].at("cols").get<std::size_t>();
            if (tensors[i].at("name").get<std::string>() != names[i] || rows * cols != spans[i].size()) {
                throw DataError(path.string() + ": tensor " + names[i] + " has an unexpected shape");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": bad checkpoint header: " + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(path.string() + ": " + e.what());
    }

    std::vector<double> flat(model.params.parameter_count());
    for (auto& v : flat) {
        std::uint64_t bits = 0;
        in.read(reinterpret_cast<char*>(&bits), sizeof bits);
        v = std::bit_cast<double>(to_le(bits));
    }
    if (!in) {
        throw DataError(path.string() + ": truncated parameter block");
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw DataError(path.string() + ": trailing bytes after parameter block");
    }
    model.params.assign(flat);
    return model;
}

}  // namespace tscn
