#include "cmm/encoder.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "cmm/error.hpp"
#include "cmm/random.hpp"

namespace cmm {

const char* to_string(Architecture a) noexcept {
    return a == Architecture::one_hidden ? "one_hidden" : "linear";
}

Architecture architecture_from_string(const std::string& s) {
    if (s == "linear") return Architecture::linear;
    if (s == "one_hidden") return Architecture::one_hidden;
    throw ConfigError(fmt::format("train.architecture: unknown architecture '{}'", s));
}

EncoderParams::EncoderParams(Architecture arch, std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim)
    : arch_(arch), input_dim_(input_dim), hidden_dim_(arch == Architecture::linear ? 0 : hidden_dim),
      output_dim_(output_dim) {
    if (input_dim_ == 0 || output_dim_ < 2 || (arch_ == Architecture::one_hidden && hidden_dim_ == 0)) {
        throw SchemaError(fmt::format("encoder dimensions invalid (F={}, H={}, out={})", input_dim_, hidden_dim_,
                                      output_dim_));
    }
    std::size_t offset = 0;
    auto add = [&](std::string name, std::size_t rows, std::size_t cols, bool decayed) {
        layout_.push_back(ParamBlock{std::move(name), offset, rows, cols, decayed});
        offset += rows * cols;
    };
    if (arch_ == Architecture::linear) {
        add("W", output_dim_, input_dim_, true);
        add("b", output_dim_, 1, false);
    } else {
        add("W1", hidden_dim_, input_dim_, true);
        add("b1", hidden_dim_, 1, false);
        add("W2", output_dim_, hidden_dim_, true);
        add("b2", output_dim_, 1, false);
    }
    values_.assign(offset, 0.0);
}

EncoderParams EncoderParams::initialize(Architecture arch, std::size_t input_dim, std::size_t hidden_dim,
                                        std::size_t output_dim, std::uint64_t seed) {
    EncoderParams p(arch, input_dim, hidden_dim, output_dim);
    Engine rng = make_engine(seed, {0x1417});
    for (const auto& b : p.layout_) {
        if (!b.decayed) {
            continue;  // biases stay zero
        }
        const double bound = 1.0 / std::sqrt(static_cast<double>(b.cols));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t i = 0; i < b.size(); ++i) {
            p.values_[b.offset + i] = dist(rng);
        }
    }
    return p;
}

std::vector<std::uint8_t> EncoderParams::decay_mask() const {
    std::vector<std::uint8_t> mask(values_.size(), 0);
    for (const auto& b : layout_) {
        std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(b.offset), b.size(), b.decayed ? 1 : 0);
    }
    return mask;
}

bool EncoderParams::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void forward_batch(const EncoderParams& params, std::span<const double> inputs, std::size_t n, EncoderWorkspace& ws,
                   kernels::Execution ex) {
    const std::size_t F = params.input_dim();
    if (inputs.size() != n * F) {
        throw SchemaError(fmt::format("encoder expects feature dimension {}, got {} values for {} rows", F,
                                      inputs.size(), n));
    }
    const kernels::MatrixView x{inputs, n, F};
    ws.logits.resize(n * params.output_dim());
    if (params.architecture() == Architecture::linear) {
        kernels::affine_forward(ex, x, params.matrix(params.block(0)), params.slice(params.block(1)), ws.logits);
        return;
    }
    const std::size_t H = params.hidden_dim();
    ws.hidden.resize(n * H);
    kernels::affine_forward(ex, x, params.matrix(params.block(0)), params.slice(params.block(1)), ws.hidden);
    for (auto& h : ws.hidden) {
        h = std::tanh(h);
    }
    kernels::affine_forward(ex, {ws.hidden, n, H}, params.matrix(params.block(2)), params.slice(params.block(3)),
                            ws.logits);
}

LogitRow encode(const EncoderParams& params, std::span<const double> features) {
    if (features.size() != params.input_dim()) {
        throw SchemaError(fmt::format("encoder expects feature dimension {}, got {}", params.input_dim(),
                                      features.size()));
    }
    EncoderWorkspace ws;
    forward_batch(params, features, 1, ws);
    return LogitRow(std::move(ws.logits));
}

double accumulate_gradients(const EncoderParams& params, std::span<const double> inputs,
                            std::span<const LabelSet* const> labels, const LossConfig& loss, double scale,
                            std::span<double> grads, EncoderWorkspace& ws, kernels::Execution ex) {
    if (grads.size() != params.values().size()) {
        throw SchemaError("gradient buffer does not match parameter count");
    }
    const std::size_t n = labels.size();
    const std::size_t out = params.output_dim();
    forward_batch(params, inputs, n, ws, ex);

    ws.row_losses.resize(n);
    ws.logit_grads.resize(n * out);
    const double total =
        kernels::loss_rows(ex, {ws.logits, n, out}, labels, loss, ws.row_losses, ws.logit_grads);
    if (scale != 1.0) {
        for (auto& g : ws.logit_grads) g *= scale;
    }

    auto grad_block = [&](std::size_t i) {
        const auto& b = params.block(i);
        return grads.subspan(b.offset, b.size());
    };
    const kernels::MatrixView x{inputs, n, params.input_dim()};
    const kernels::MatrixView upstream{ws.logit_grads, n, out};
    if (params.architecture() == Architecture::linear) {
        kernels::affine_backward_params(ex, x, upstream, grad_block(0), grad_block(1));
        return total;
    }

    const std::size_t H = params.hidden_dim();
    kernels::affine_backward_params(ex, {ws.hidden, n, H}, upstream, grad_block(2), grad_block(3));
    ws.hidden_grads.resize(n * H);
    kernels::affine_backward_input(ex, upstream, params.matrix(params.block(2)), ws.hidden_grads);
    for (std::size_t k = 0; k < ws.hidden_grads.size(); ++k) {
        const double h = ws.hidden[k];
        ws.hidden_grads[k] *= 1.0 - h * h;
    }
    kernels::affine_backward_params(ex, x, {ws.hidden_grads, n, H}, grad_block(0), grad_block(1));
    return total;
}

std::vector<double> backward(const EncoderParams& params, std::span<const double> features, const LabelSet& labels,
                             const LossConfig& loss) {
    if (features.size() != params.input_dim()) {
        throw SchemaError(fmt::format("encoder expects feature dimension {}, got {}", params.input_dim(),
                                      features.size()));
    }
    std::vector<double> grads(params.values().size(), 0.0);
    EncoderWorkspace ws;
    const LabelSet* label_ptr = &labels;
    accumulate_gradients(params, features, std::span(&label_ptr, 1), loss, 1.0, grads, ws);
    return grads;
}

void AdamWConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError(fmt::format("train.learning_rate: must be > 0, got {}", learning_rate));
    }
    if (!(beta1 > 0.0 && beta1 < 1.0)) {
        throw ConfigError(fmt::format("train.beta1: must lie in (0, 1), got {}", beta1));
    }
    if (!(beta2 > 0.0 && beta2 < 1.0)) {
        throw ConfigError(fmt::format("train.beta2: must lie in (0, 1), got {}", beta2));
    }
    if (!(epsilon > 0.0)) {
        throw ConfigError(fmt::format("train.epsilon: must be > 0, got {}", epsilon));
    }
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
        throw ConfigError(fmt::format("train.weight_decay: must be >= 0, got {}", weight_decay));
    }
}

void adamw_step(std::span<double> params, std::span<const double> grads, std::span<const std::uint8_t> decay_mask,
                const AdamWConfig& cfg, AdamWState& state) {
    const std::size_t n = params.size();
    if (grads.size() != n || decay_mask.size() != n || state.first_moment.size() != n ||
        state.second_moment.size() != n) {
        throw SchemaError("adamw_step: parameter, gradient, mask and state sizes differ");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericError(fmt::format("adamw_step: non-finite gradient at parameter {}", i));
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(cfg.beta1, t);
    const double bias2 = 1.0 - std::pow(cfg.beta2, t);
    const double decay = 1.0 - cfg.learning_rate * cfg.weight_decay;
    for (std::size_t i = 0; i < n; ++i) {
        if (decay_mask[i] != 0) {
            params[i] *= decay;
        }
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grads[i];
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double m_hat = m / bias1;
        const double v_hat = v / bias2;
        params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

} // namespace cmm
