#include "cmm/kernels.hpp"

#include <algorithm>
#include <exception>
#include <limits>

#include <fmt/format.h>

#include "cmm/error.hpp"

namespace cmm::kernels {

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    const std::size_t n = a.size();
    double acc0 = 0.0;
    double acc1 = 0.0;
    double acc2 = 0.0;
    double acc3 = 0.0;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        acc0 += a[j] * b[j];
        acc1 += a[j + 1] * b[j + 1];
        acc2 += a[j + 2] * b[j + 2];
        acc3 += a[j + 3] * b[j + 3];
    }
    for (; j < n; ++j) {
        acc0 += a[j] * b[j];
    }
    return (acc0 + acc1) + (acc2 + acc3);
}

namespace {

void check_forward(MatrixView x, MatrixView w, std::span<const double> bias, std::span<double> out) {
    if (x.cols != w.cols || bias.size() != w.rows || out.size() != x.rows * w.rows ||
        x.data.size() != x.rows * x.cols || w.data.size() != w.rows * w.cols) {
        throw SchemaError(fmt::format("affine_forward: shape mismatch (x {}x{}, w {}x{}, bias {}, out {})", x.rows,
                                      x.cols, w.rows, w.cols, bias.size(), out.size()));
    }
}

void check_backward_params(MatrixView x, MatrixView up, std::span<double> gw, std::span<double> gb) {
    if (x.rows != up.rows || gw.size() != up.cols * x.cols || gb.size() != up.cols) {
        throw SchemaError(fmt::format("affine_backward_params: shape mismatch (x {}x{}, upstream {}x{})", x.rows,
                                      x.cols, up.rows, up.cols));
    }
}

void check_backward_input(MatrixView up, MatrixView w, std::span<double> gx) {
    if (up.cols != w.rows || gx.size() != up.rows * w.cols) {
        throw SchemaError(fmt::format("affine_backward_input: shape mismatch (upstream {}x{}, w {}x{})", up.rows,
                                      up.cols, w.rows, w.cols));
    }
}

void check_loss_rows(MatrixView logits, std::span<const LabelSet* const> labels, std::span<double> values,
                     std::span<double> grads) {
    if (labels.size() != logits.rows || values.size() != logits.rows || grads.size() != logits.data.size()) {
        throw SchemaError(fmt::format("loss_rows: {} logit rows, {} label sets, {} value slots, {} gradient slots",
                                      logits.rows, labels.size(), values.size(), grads.size()));
    }
}

inline void forward_row(MatrixView x, MatrixView w, std::span<const double> bias, std::span<double> out,
                        std::size_t i) {
    const auto xi = x.row(i);
    for (std::size_t o = 0; o < w.rows; ++o) {
        out[i * w.rows + o] = bias[o] + dot(xi, w.row(o));
    }
}

inline void backward_params_row(MatrixView x, MatrixView up, std::span<double> gw, std::span<double> gb,
                                std::size_t i, std::size_t o) {
    const double u = up.data[i * up.cols + o];
    gb[o] += u;
    const auto xi = x.row(i);
    double* g = gw.data() + o * x.cols;
    for (std::size_t j = 0; j < x.cols; ++j) {
        g[j] += u * xi[j];
    }
}

inline void backward_input_row(MatrixView up, MatrixView w, std::span<double> gx, std::size_t i) {
    double* g = gx.data() + i * w.cols;
    std::fill(g, g + w.cols, 0.0);
    for (std::size_t o = 0; o < w.rows; ++o) {
        const double u = up.data[i * up.cols + o];
        const auto wo = w.row(o);
        for (std::size_t j = 0; j < w.cols; ++j) {
            g[j] += u * wo[j];
        }
    }
}

} // namespace

namespace serial {

void affine_forward(MatrixView x, MatrixView weights, std::span<const double> bias, std::span<double> out) {
    check_forward(x, weights, bias, out);
    for (std::size_t i = 0; i < x.rows; ++i) {
        forward_row(x, weights, bias, out, i);
    }
}

void affine_backward_params(MatrixView x, MatrixView upstream, std::span<double> grad_weights,
                            std::span<double> grad_bias) {
    check_backward_params(x, upstream, grad_weights, grad_bias);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t o = 0; o < upstream.cols; ++o) {
            backward_params_row(x, upstream, grad_weights, grad_bias, i, o);
        }
    }
}

void affine_backward_input(MatrixView upstream, MatrixView weights, std::span<double> grad_x) {
    check_backward_input(upstream, weights, grad_x);
    for (std::size_t i = 0; i < upstream.rows; ++i) {
        backward_input_row(upstream, weights, grad_x, i);
    }
}

double loss_rows(MatrixView logits, std::span<const LabelSet* const> labels, const LossConfig& cfg,
                 std::span<double> row_values, std::span<double> grads) {
    check_loss_rows(logits, labels, row_values, grads);
    double total = 0.0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        row_values[i] = loss_value_and_grad(logits.row(i), *labels[i], cfg, grads.subspan(i * logits.cols, logits.cols));
        total += row_values[i];
    }
    return total;
}

} // namespace serial

namespace parallel {

void affine_forward(MatrixView x, MatrixView weights, std::span<const double> bias, std::span<double> out) {
    check_forward(x, weights, bias, out);
    const auto n = static_cast<std::ptrdiff_t>(x.rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        forward_row(x, weights, bias, out, static_cast<std::size_t>(i));
    }
}

void affine_backward_params(MatrixView x, MatrixView upstream, std::span<double> grad_weights,
                            std::span<double> grad_bias) {
    check_backward_params(x, upstream, grad_weights, grad_bias);
    const auto outputs = static_cast<std::ptrdiff_t>(upstream.cols);
    // Parallel over output units; each unit still accumulates rows in order.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t o = 0; o < outputs; ++o) {
        for (std::size_t i = 0; i < x.rows; ++i) {
            backward_params_row(x, upstream, grad_weights, grad_bias, i, static_cast<std::size_t>(o));
        }
    }
}

void affine_backward_input(MatrixView upstream, MatrixView weights, std::span<double> grad_x) {
    check_backward_input(upstream, weights, grad_x);
    const auto n = static_cast<std::ptrdiff_t>(upstream.rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        backward_input_row(upstream, weights, grad_x, static_cast<std::size_t>(i));
    }
}

double loss_rows(MatrixView logits, std::span<const LabelSet* const> labels, const LossConfig& cfg,
                 std::span<double> row_values, std::span<double> grads) {
    check_loss_rows(logits, labels, row_values, grads);
    const auto n = static_cast<std::ptrdiff_t>(logits.rows);
    std::exception_ptr first_error;
    std::ptrdiff_t first_error_row = std::numeric_limits<std::ptrdiff_t>::max();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto row = static_cast<std::size_t>(i);
        try {
            row_values[row] =
                loss_value_and_grad(logits.row(row), *labels[row], cfg, grads.subspan(row * logits.cols, logits.cols));
        } catch (...) {
#pragma omp critical(cmm_loss_rows_error)
            if (i < first_error_row) {
                first_error_row = i;
                first_error = std::current_exception();
            }
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
    double total = 0.0;
    for (double v : row_values) {
        total += v;
    }
    return total;
}

} // namespace parallel

void affine_forward(Execution ex, MatrixView x, MatrixView weights, std::span<const double> bias,
                    std::span<double> out) {
    ex == Execution::parallel ? parallel::affine_forward(x, weights, bias, out)
                              : serial::affine_forward(x, weights, bias, out);
}

void affine_backward_params(Execution ex, MatrixView x, MatrixView upstream, std::span<double> grad_weights,
                            std::span<double> grad_bias) {
    ex == Execution::parallel ? parallel::affine_backward_params(x, upstream, grad_weights, grad_bias)
                              : serial::affine_backward_params(x, upstream, grad_weights, grad_bias);
}

void affine_backward_input(Execution ex, MatrixView upstream, MatrixView weights, std::span<double> grad_x) {
    ex == Execution::parallel ? parallel::affine_backward_input(upstream, weights, grad_x)
                              : serial::affine_backward_input(upstream, weights, grad_x);
}

double loss_rows(Execution ex, MatrixView logits, std::span<const LabelSet* const> labels, const LossConfig& cfg,
                 std::span<double> row_values, std::span<double> grads) {
    return ex == Execution::parallel ? parallel::loss_rows(logits, labels, cfg, row_values, grads)
                                     : serial::loss_rows(logits, labels, cfg, row_values, grads);
}

} // namespace cmm::kernels
