#pragma once
//
// Dense numeric kernel: a row-major double matrix, the layer primitives the
// stream models are built from (each with an explicit backward pass), Adam,
// and a central finite-difference gradient checker.
//

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace tscn {

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix row(std::vector<double> values);
    static Matrix column(std::vector<double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row_span(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    const std::vector<double>& data() const { return data_; }

    void fill(double v);
    bool all_finite() const;
    bool same_shape(const Matrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double sigmoid(double x);
double sigmoid_grad_from_output(double y);
std::vector<double> softmax(std::span<const double> logits);
// Vector-Jacobian product of softmax given its output.
std::vector<double> softmax_backward(std::span<const double> probs, std::span<const double> upstream);

// ---------------------------------------------------------------------------
// Temporal convolution over a T x D_in sequence with zero padding.
// weights is (K * D_in) x D_out; row k * D_in + i holds tap k for input
// channel i, where tap k reads input row t + k - K/2.

struct ConvGrads {
    Matrix input;
    Matrix weights;
    Matrix bias;
};

Matrix temporal_conv_forward(const Matrix& input, const Matrix& weights, const Matrix& bias, std::size_t kernel);
ConvGrads temporal_conv_backward(const Matrix& input, const Matrix& weights, std::size_t kernel,
                                 const Matrix& upstream);

struct DenseGrads {
    Matrix input;
    Matrix weights;
    Matrix bias;
};

// Affine map applied to every row: input (N x D) * weights (D x M) + bias (1 x M).
Matrix fc_forward(const Matrix& input, const Matrix& weights, const Matrix& bias);
DenseGrads fc_backward(const Matrix& input, const Matrix& weights, const Matrix& upstream);

Matrix relu_forward(const Matrix& input);
Matrix relu_backward(const Matrix& input, const Matrix& upstream);

// Layer objects record their forward inputs so that backward can be called
// without re-supplying them. Calling backward before forward throws
// std::logic_error.

class TemporalConv {
public:
    TemporalConv(std::size_t kernel, std::size_t in_dim, std::size_t out_dim);

    Matrix forward(const Matrix& input);
    ConvGrads backward(const Matrix& upstream) const;

    std::size_t kernel() const { return kernel_; }
    Matrix weights;
    Matrix bias;

private:
    std::size_t kernel_;
    std::optional<Matrix> input_;
};

class Dense {
public:
    Dense(std::size_t in_dim, std::size_t out_dim);

    Matrix forward(const Matrix& input);
    DenseGrads backward(const Matrix& upstream) const;

    Matrix weights;
    Matrix bias;

private:
    std::optional<Matrix> input_;
};

class Relu {
public:
    Matrix forward(const Matrix& input);
    Matrix backward(const Matrix& upstream) const;

private:
    std::optional<Matrix> input_;
};

class Sigmoid {
public:
    Matrix forward(const Matrix& input);
    Matrix backward(const Matrix& upstream) const;

private:
    std::optional<Matrix> output_;
};

// Row-wise softmax.
class Softmax {
public:
    Matrix forward(const Matrix& logits);
    Matrix backward(const Matrix& upstream) const;

private:
    std::optional<Matrix> output_;
};

// ---------------------------------------------------------------------------

struct AdamState {
    std::size_t step_count = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void reset();
};

// One bias-corrected Adam update over a list of parameter tensors. Moments are
// allocated on the first call; later calls must pass identically shaped lists.
void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state);

// Single-tensor convenience overload.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
    std::size_t coordinates = 0;
    bool passed = true;
};

double relative_error(double a, double b);

// Compares `analytic` against central differences of `loss` around `params`.
// `params` is perturbed in place and restored before returning.
GradCheckReport grad_check(const std::function<double(std::span<const double>)>& loss, std::span<double> params,
                           std::span<const double> analytic, double h = 1e-5, double tol = 1e-4);

// Central-difference gradient of a scalar function.
std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& loss,
                                     std::span<double> params, double h = 1e-5);

}  // namespace tscn
