#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cmm/kernels.hpp"
#include "cmm/loss.hpp"
#include "cmm/schema.hpp"

namespace cmm {

enum class Architecture { linear, one_hidden };

const char* to_string(Architecture a) noexcept;
Architecture architecture_from_string(const std::string& s);

// Named slice of the flat parameter vector.
struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;  // 1 for bias vectors
    bool decayed = false;  // weight matrices decay, biases do not

    std::size_t size() const noexcept { return rows * cols; }
};

// Trainable stand-in for the relation encoder plus transformation layer:
// features (F) -> [tanh hidden layer (H)] -> |R|+1 logits.
//
// Flat layout, in declared order:
//   linear:     W (out x F), b (out)
//   one_hidden: W1 (H x F), b1 (H), W2 (out x H), b2 (out)
class EncoderParams {
public:
    EncoderParams() = default;
    EncoderParams(Architecture arch, std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim);

    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
    static EncoderParams initialize(Architecture arch, std::size_t input_dim, std::size_t hidden_dim,
                                    std::size_t output_dim, std::uint64_t seed);

    Architecture architecture() const noexcept { return arch_; }
    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t hidden_dim() const noexcept { return hidden_dim_; }
    std::size_t output_dim() const noexcept { return output_dim_; }

    const std::vector<ParamBlock>& layout() const noexcept { return layout_; }
    const ParamBlock& block(std::size_t i) const { return layout_.at(i); }
    std::vector<double>& values() noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::span<const double> slice(const ParamBlock& b) const { return std::span(values_).subspan(b.offset, b.size()); }
    kernels::MatrixView matrix(const ParamBlock& b) const { return {slice(b), b.rows, b.cols}; }

    // 1 for entries subject to weight decay.
    std::vector<std::uint8_t> decay_mask() const;
    bool all_finite() const noexcept;

private:
    Architecture arch_ = Architecture::linear;
    std::size_t input_dim_ = 0;
    std::size_t hidden_dim_ = 0;
    std::size_t output_dim_ = 0;
    std::vector<ParamBlock> layout_;
    std::vector<double> values_;
};

// Single-pair forward map. Throws SchemaError on a feature-dimension mismatch.
LogitRow encode(const EncoderParams& params, std::span<const double> features);

// Scratch buffers for batched forward/backward over one document.
struct EncoderWorkspace {
    std::vector<double> hidden;         // n x H (post-tanh)
    std::vector<double> logits;         // n x out
    std::vector<double> row_losses;     // n
    std::vector<double> logit_grads;    // n x out
    std::vector<double> hidden_grads;   // n x H
};

// Batched forward over `n` rows of `inputs`; fills ws.logits (and ws.hidden).
void forward_batch(const EncoderParams& params, std::span<const double> inputs, std::size_t n, EncoderWorkspace& ws,
                   kernels::Execution ex = kernels::Execution::serial);

// Forward + loss + backward over one batch. Adds `scale` * dL/dparams into
// `grads` and returns the unscaled loss sum.
double accumulate_gradients(const EncoderParams& params, std::span<const double> inputs,
                            std::span<const LabelSet* const> labels, const LossConfig& loss, double scale,
                            std::span<double> grads, EncoderWorkspace& ws,
                            kernels::Execution ex = kernels::Execution::serial);

// Exact parameter gradient of the configured loss for one pair.
std::vector<double> backward(const EncoderParams& params, std::span<const double> features, const LabelSet& labels,
                             const LossConfig& loss);

struct AdamWConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;

    void validate() const;
};

struct AdamWState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step = 0;

    static AdamWState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
};

// Decoupled weight decay (p *= 1 - lr * wd where the mask is set), then the
// bias-corrected Adam update. Throws NumericError on non-finite gradients.
void adamw_step(std::span<double> params, std::span<const double> grads, std::span<const std::uint8_t> decay_mask,
                const AdamWConfig& cfg, AdamWState& state);

} // namespace cmm
