#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cmm/schema.hpp"

namespace cmm {

enum class LossKind { plain_margin, cmm, atl_reference, plugin };
enum class Aggregation { per_document_sum, global_mean };
enum class Side { positive, negative };

const char* to_string(LossKind kind) noexcept;
LossKind loss_kind_from_string(const std::string& s);
const char* to_string(Aggregation a) noexcept;
Aggregation aggregation_from_string(const std::string& s);

struct LossConfig;

// A pluggable loss: value and gradient over one logit row. `gradient` writes
// dL/dt for every entry of the row, TH included.
struct LossPlugin {
    std::string name;
    std::function<double(std::span<const double>, const LabelSet&, const LossConfig&)> value;
    std::function<void(std::span<const double>, const LabelSet&, const LossConfig&, std::span<double>)> gradient;
};

struct LossConfig {
    LossKind kind = LossKind::cmm;
    double gamma = 1.0;  // concentration exponent on the positive side
    double m = 0.2;      // negative-side cutoff offset, strictly inside (0, 1)
    Aggregation aggregation = Aggregation::per_document_sum;
    std::shared_ptr<const LossPlugin> plugin;  // only for kind == plugin

    // Throws ConfigError naming the offending field.
    void validate() const;
    // Human-readable arm label, e.g. "cmm(g=1.2,m=0.2)".
    std::string label() const;
};

struct DistanceSet {
    std::map<int, double> positive;  // d_{r+} = t_r - t_TH
    std::map<int, double> negative;  // d_{r-} = t_TH - t_r
};

DistanceSet margin_distances(const LogitRow& logits, const LabelSet& labels);

// Sum of -d_r over all relations. Linear in the logits and unbounded below.
double plain_margin_loss(const LogitRow& logits, const LabelSet& labels);
std::vector<double> plain_margin_grad(const LogitRow& logits, const LabelSet& labels);

// Distance at and beyond which a negative relation is clamped to zero loss:
// sigmoid(d) + m >= 1  <=>  d >= log((1 - m) / m).
double negative_clamp_distance(double m);

// log(sigmoid(d)) on the positive side, log(min(sigmoid(d) + m, 1)) on the
// negative side. `m` must lie in (0, 1) for the negative side.
double cmm_rescale(double d, Side side, double m);

// Per-relation terms of the CMM loss and their derivatives in d.
double cmm_positive_term(double d, double gamma);
double cmm_positive_term_derivative(double d, double gamma);
double cmm_negative_term(double d, double m);
double cmm_negative_term_derivative(double d, double m);

double cmm_loss(const LogitRow& logits, const LabelSet& labels, const LossConfig& cfg);
std::vector<double> cmm_loss_grad(const LogitRow& logits, const LabelSet& labels, const LossConfig& cfg);

// Adaptive-thresholding baseline: -sum_{r+} log softmax_{P u {TH}}(t_r)
//                                  - log softmax_{N u {TH}}(t_TH).
double atl_reference_loss(const LogitRow& logits, const LabelSet& labels);
std::vector<double> atl_reference_grad(const LogitRow& logits, const LabelSet& labels);

// Dispatch on cfg.kind. The span overloads do not allocate; `grad` is
// overwritten with dL/dt. Both throw SchemaError on a length mismatch and
// NumericError on non-finite logits.
double loss_value(std::span<const double> logits, const LabelSet& labels, const LossConfig& cfg);
double loss_value_and_grad(std::span<const double> logits, const LabelSet& labels, const LossConfig& cfg,
                           std::span<double> grad);

} // namespace cmm
