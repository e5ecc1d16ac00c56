#include "tscn/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tscn/errors.hpp"

namespace tscn {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " + std::to_string(rows_) +
                         "x" + std::to_string(cols_));
    }
}

Matrix Matrix::row(std::vector<double> values) {
    const auto n = values.size();
    return Matrix(1, n, std::move(values));
}

Matrix Matrix::column(std::vector<double> values) {
    const auto n = values.size();
    return Matrix(n, 1, std::move(values));
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double sigmoid_grad_from_output(double y) { return y * (1.0 - y); }

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    if (logits.empty()) {
        return out;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        total += out[i];
    }
    for (auto& v : out) {
        v /= total;
    }
    return out;
}

std::vector<double> softmax_backward(std::span<const double> probs, std::span<const double> upstream) {
    if (probs.size() != upstream.size()) {
        throw ShapeError("softmax_backward: length mismatch");
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        dot += probs[i] * upstream[i];
    }
    std::vector<double> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        out[i] = probs[i] * (upstream[i] - dot);
    }
    return out;
}

namespace {

void check_conv_shapes(const Matrix& input, const Matrix& weights, std::size_t kernel) {
    if (kernel == 0 || kernel % 2 == 0) {
        throw ShapeError("temporal_conv: kernel size must be odd, got " + std::to_string(kernel));
    }
    if (input.rows() == 0) {
        throw ShapeError("temporal_conv: input has no rows");
    }
    if (weights.rows() != kernel * input.cols()) {
        throw ShapeError("temporal_conv: weights have " + std::to_string(weights.rows()) + " rows, expected " +
                         std::to_string(kernel * input.cols()));
    }
}

}  // namespace

Matrix temporal_conv_forward(const Matrix& input, const Matrix& weights, const Matrix& bias, std::size_t kernel) {
    check_conv_shapes(input, weights, kernel);
    const std::size_t steps = input.rows();
    const std::size_t in_dim = input.cols();
    const std::size_t out_dim = weights.cols();
    if (bias.size() != out_dim) {
        throw ShapeError("temporal_conv: bias length mismatch");
    }
    const auto half = static_cast<std::ptrdiff_t>(kernel / 2);

    Matrix out(steps, out_dim);
    for (std::size_t t = 0; t < steps; ++t) {
        auto dst = out.row_span(t);
        std::copy(bias.values().begin(), bias.values().end(), dst.begin());
        for (std::size_t k = 0; k < kernel; ++k) {
            const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - half;
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) {
                continue;
            }
            const auto x = input.row_span(static_cast<std::size_t>(src));
            for (std::size_t i = 0; i < in_dim; ++i) {
                const double xi = x[i];
                if (xi == 0.0) {
                    continue;
                }
                const auto w = weights.row_span(k * in_dim + i);
                for (std::size_t o = 0; o < out_dim; ++o) {
                    dst[o] += xi * w[o];
                }
            }
        }
    }
    return out;
}

ConvGrads temporal_conv_backward(const Matrix& input, const Matrix& weights, std::size_t kernel,
                                 const Matrix& upstream) {
    check_conv_shapes(input, weights, kernel);
    const std::size_t steps = input.rows();
    const std::size_t in_dim = input.cols();
    const std::size_t out_dim = weights.cols();
    if (upstream.rows() != steps || upstream.cols() != out_dim) {
        throw ShapeError("temporal_conv_backward: upstream shape mismatch");
    }
    const auto half = static_cast<std::ptrdiff_t>(kernel / 2);

    ConvGrads g{Matrix(steps, in_dim), Matrix(weights.rows(), out_dim), Matrix(1, out_dim)};
    for (std::size_t t = 0; t < steps; ++t) {
        const auto up = upstream.row_span(t);
        auto gb = g.bias.row_span(0);
        for (std::size_t o = 0; o < out_dim; ++o) {
            gb[o] += up[o];
        }
        for (std::size_t k = 0; k < kernel; ++k) {
            const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - half;
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) {
                continue;
            }
            const auto s = static_cast<std::size_t>(src);
            const auto x = input.row_span(s);
            auto gx = g.input.row_span(s);
            for (std::size_t i = 0; i < in_dim; ++i) {
                const auto w = weights.row_span(k * in_dim + i);
                auto gw = g.weights.row_span(k * in_dim + i);
                const double xi = x[i];
                double acc = 0.0;
                for (std::size_t o = 0; o < out_dim; ++o) {
                    acc += up[o] * w[o];
                    gw[o] += xi * up[o];
                }
                gx[i] += acc;
            }
        }
    }
    return g;
}

Matrix fc_forward(const Matrix& input, const Matrix& weights, const Matrix& bias) {
    if (input.cols() != weights.rows() || bias.size() != weights.cols()) {
        throw ShapeError("fc_forward: input " + std::to_string(input.rows()) + "x" + std::to_string(input.cols()) +
                         ", weights " + std::to_string(weights.rows()) + "x" + std::to_string(weights.cols()) +
                         ", bias " + std::to_string(bias.size()));
    }
    Matrix out(input.rows(), weights.cols());
    for (std::size_t r = 0; r < input.rows(); ++r) {
        auto dst = out.row_span(r);
        std::copy(bias.values().begin(), bias.values().end(), dst.begin());
        const auto x = input.row_span(r);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto w = weights.row_span(i);
            for (std::size_t o = 0; o < dst.size(); ++o) {
                dst[o] += x[i] * w[o];
            }
        }
    }
    return out;
}

DenseGrads fc_backward(const Matrix& input, const Matrix& weights, const Matrix& upstream) {
    if (input.cols() != weights.rows() || upstream.rows() != input.rows() || upstream.cols() != weights.cols()) {
        throw ShapeError("fc_backward: shape mismatch");
    }
    DenseGrads g{Matrix(input.rows(), input.cols()), Matrix(weights.rows(), weights.cols()),
                 Matrix(1, weights.cols())};
    for (std::size_t r = 0; r < input.rows(); ++r) {
        const auto x = input.row_span(r);
        const auto up = upstream.row_span(r);
        auto gx = g.input.row_span(r);
        for (std::size_t o = 0; o < up.size(); ++o) {
            g.bias(0, o) += up[o];
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto w = weights.row_span(i);
            auto gw = g.weights.row_span(i);
            double acc = 0.0;
            for (std::size_t o = 0; o < up.size(); ++o) {
                acc += up[o] * w[o];
                gw[o] += x[i] * up[o];
            }
            gx[i] = acc;
        }
    }
    return g;
}

Matrix relu_forward(const Matrix& input) {
    Matrix out = input;
    for (auto& v : out.values()) {
        v = v > 0.0 ? v : 0.0;
    }
    return out;
}

Matrix relu_backward(const Matrix& input, const Matrix& upstream) {
    if (!input.same_shape(upstream)) {
        throw ShapeError("relu_backward: shape mismatch");
    }
    Matrix out = upstream;
    const auto x = input.values();
    auto g = out.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] <= 0.0) {
            g[i] = 0.0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
const T& recorded(const std::optional<T>& cache, const char* layer) {
    if (!cache) {
        throw std::logic_error(std::string(layer) + ": backward called without a recorded forward pass");
    }
    return *cache;
}

}  // namespace

TemporalConv::TemporalConv(std::size_t kernel, std::size_t in_dim, std::size_t out_dim)
    : weights(kernel * in_dim, out_dim), bias(1, out_dim), kernel_(kernel) {
    if (kernel == 0 || kernel % 2 == 0) {
        throw ShapeError("TemporalConv: kernel size must be odd");
    }
}

Matrix TemporalConv::forward(const Matrix& input) {
    Matrix out = temporal_conv_forward(input, weights, bias, kernel_);
    input_ = input;
    return out;
}

ConvGrads TemporalConv::backward(const Matrix& upstream) const {
    return temporal_conv_backward(recorded(input_, "TemporalConv"), weights, kernel_, upstream);
}

Dense::Dense(std::size_t in_dim, std::size_t out_dim) : weights(in_dim, out_dim), bias(1, out_dim) {}

Matrix Dense::forward(const Matrix& input) {
    Matrix out = fc_forward(input, weights, bias);
    input_ = input;
    return out;
}

DenseGrads Dense::backward(const Matrix& upstream) const {
    return fc_backward(recorded(input_, "Dense"), weights, upstream);
}

Matrix Relu::forward(const Matrix& input) {
    input_ = input;
    return relu_forward(input);
}

Matrix Relu::backward(const Matrix& upstream) const { return relu_backward(recorded(input_, "Relu"), upstream); }

Matrix Sigmoid::forward(const Matrix& input) {
    Matrix out = input;
    for (auto& v : out.values()) {
        v = sigmoid(v);
    }
    output_ = out;
    return out;
}

Matrix Sigmoid::backward(const Matrix& upstream) const {
    const Matrix& y = recorded(output_, "Sigmoid");
    if (!y.same_shape(upstream)) {
        throw ShapeError("Sigmoid::backward: shape mismatch");
    }
    Matrix out = upstream;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.values()[i] *= sigmoid_grad_from_output(y.values()[i]);
    }
    return out;
}

Matrix Softmax::forward(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto p = softmax(logits.row_span(r));
        std::copy(p.begin(), p.end(), out.row_span(r).begin());
    }
    output_ = out;
    return out;
}

Matrix Softmax::backward(const Matrix& upstream) const {
    const Matrix& y = recorded(output_, "Softmax");
    if (!y.same_shape(upstream)) {
        throw ShapeError("Softmax::backward: shape mismatch");
    }
    Matrix out(y.rows(), y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r) {
        const auto g = softmax_backward(y.row_span(r), upstream.row_span(r));
        std::copy(g.begin(), g.end(), out.row_span(r).begin());
    }
    return out;
}

// ---------------------------------------------------------------------------

void AdamState::reset() {
    step_count = 0;
    first_moment.clear();
    second_moment.clear();
}

void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state) {
    if (params.size() != grads.size()) {
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameter tensors but " +
                         std::to_string(grads.size()) + " gradients");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].size() != grads[i].size()) {
            throw ShapeError("adam_step: tensor " + std::to_string(i) + " shape mismatch");
        }
    }
    if (state.first_moment.empty() && state.step_count == 0) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.size(), 0.0);
            state.second_moment.emplace_back(p.size(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw ShapeError("adam_step: optimizer state tracks a different parameter list");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (state.first_moment[i].size() != params[i].size()) {
            throw ShapeError("adam_step: optimizer state shape mismatch at tensor " + std::to_string(i));
        }
    }

    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        const auto p = params[i];
        const auto g = grads[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            p[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
    const std::span<double> p[] = {params};
    const std::span<const double> g[] = {grads};
    adam_step(std::span<const std::span<double>>(p), std::span<const std::span<const double>>(g), state);
}

// ---------------------------------------------------------------------------

double relative_error(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& loss,
                                     std::span<double> params, double h) {
    std::vector<double> out(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        const double up = loss(params);
        params[i] = saved - h;
        const double down = loss(params);
        params[i] = saved;
        out[i] = (up - down) / (2.0 * h);
    }
    return out;
}

GradCheckReport grad_check(const std::function<double(std::span<const double>)>& loss, std::span<double> params,
                           std::span<const double> analytic, double h, double tol) {
    if (analytic.size() != params.size()) {
        throw ShapeError("grad_check: analytic gradient length mismatch");
    }
    const auto numeric = numeric_gradient(loss, params, h);
    GradCheckReport report;
    report.coordinates = params.size();
    for (std::size_t i = 0; i < numeric.size(); ++i) {
        const double err = relative_error(analytic[i], numeric[i]);
        if (i == 0 || err > report.max_relative_error) {
            report.max_relative_error = err;
            report.worst_index = i;
            report.analytic_at_worst = analytic[i];
            report.numeric_at_worst = numeric[i];
        }
    }
    report.passed = report.max_relative_error < tol;
    return report;
}

}  // namespace tscn
