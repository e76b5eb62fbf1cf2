#pragma once

// Data-parallel kernels used by training, evaluation and gradient checking.
//
// Every kernel has a serial reference and an OpenMP version. Each output
// element is produced by the same sequence of floating-point operations in
// both, so results are bitwise identical regardless of thread count.

#include <cstddef>
#include <span>

#include "cmm/loss.hpp"
#include "cmm/schema.hpp"

namespace cmm::kernels {

enum class Execution { serial, parallel };

// Row-major view of a dense matrix.
struct MatrixView {
    std::span<const double> data;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::span<const double> row(std::size_t i) const { return data.subspan(i * cols, cols); }
};

// Dot product with four interleaved accumulators combined as (a0+a1)+(a2+a3).
double dot(std::span<const double> a, std::span<const double> b) noexcept;

namespace serial {

// out (n x out_dim) = x (n x in_dim) * weights^T (out_dim x in_dim) + bias
void affine_forward(MatrixView x, MatrixView weights, std::span<const double> bias, std::span<double> out);
// grad_weights += upstream^T * x ; grad_bias += column sums of upstream
void affine_backward_params(MatrixView x, MatrixView upstream, std::span<double> grad_weights,
                            std::span<double> grad_bias);
// grad_x (n x in_dim) = upstream (n x out_dim) * weights (out_dim x in_dim)
void affine_backward_input(MatrixView upstream, MatrixView weights, std::span<double> grad_x);
// Per-row loss values and logit gradients; returns the row-order sum.
double loss_rows(MatrixView logits, std::span<const LabelSet* const> labels, const LossConfig& cfg,
                 std::span<double> row_values, std::span<double> grads);

} // namespace serial

namespace parallel {

void affine_forward(MatrixView x, MatrixView weights, std::span<const double> bias, std::span<double> out);
void affine_backward_params(MatrixView x, MatrixView upstream, std::span<double> grad_weights,
                            std::span<double> grad_bias);
void affine_backward_input(MatrixView upstream, MatrixView weights, std::span<double> grad_x);
double loss_rows(MatrixView logits, std::span<const LabelSet* const> labels, const LossConfig& cfg,
                 std::span<double> row_values, std::span<double> grads);

} // namespace parallel

void affine_forward(Execution ex, MatrixView x, MatrixView weights, std::span<const double> bias,
                    std::span<double> out);
void affine_backward_params(Execution ex, MatrixView x, MatrixView upstream, std::span<double> grad_weights,
                            std::span<double> grad_bias);
void affine_backward_input(Execution ex, MatrixView upstream, MatrixView weights, std::span<double> grad_x);
double loss_rows(Execution ex, MatrixView logits, std::span<const LabelSet* const> labels, const LossConfig& cfg,
                 std::span<double> row_values, std::span<double> grads);

} // namespace cmm::kernels
