#include "cmm/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "cmm/error.hpp"

namespace cmm {

const char* to_string(LossKind kind) noexcept {
    switch (kind) {
        case LossKind::plain_margin: return "plain_margin";
        case LossKind::cmm: return "cmm";
        case LossKind::atl_reference: return "atl_reference";
        case LossKind::plugin: return "plugin";
    }
    return "unknown";
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "plain_margin") return LossKind::plain_margin;
    if (s == "cmm") return LossKind::cmm;
    if (s == "atl_reference") return LossKind::atl_reference;
    if (s == "plugin") return LossKind::plugin;
    throw ConfigError(fmt::format("loss.kind: unknown loss kind '{}'", s));
}

const char* to_string(Aggregation a) noexcept {
    return a == Aggregation::global_mean ? "global_mean" : "per_document_sum";
}

Aggregation aggregation_from_string(const std::string& s) {
    if (s == "per_document_sum") return Aggregation::per_document_sum;
    if (s == "global_mean") return Aggregation::global_mean;
    throw ConfigError(fmt::format("loss.aggregation: unknown aggregation '{}'", s));
}

void LossConfig::validate() const {
    if (kind == LossKind::cmm) {
        if (!std::isfinite(gamma) || gamma < 0.0) {
            throw ConfigError(fmt::format("loss.gamma: must be finite and >= 0, got {}", gamma));
        }
        if (!std::isfinite(m) || !(m > 0.0 && m < 1.0)) {
            throw ConfigError(fmt::format("loss.m: must lie strictly inside (0, 1), got {}", m));
        }
    }
    if (kind == LossKind::plugin && (!plugin || !plugin->value || !plugin->gradient)) {
        throw ConfigError("loss.plugin: kind is plugin but no complete plugin is attached");
    }
}

std::string LossConfig::label() const {
    switch (kind) {
        case LossKind::cmm: return fmt::format("cmm(g={},m={})", gamma, m);
        case LossKind::plugin: return plugin ? plugin->name : "plugin";
        default: return to_string(kind);
    }
}

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log_sigmoid(double x) {
    return -softplus(-x);
}

void check_shape(std::span<const double> logits, const LabelSet& labels) {
    const std::size_t R = logits.size() - (logits.empty() ? 0 : 1);
    if (logits.empty() || labels.size() != R) {
        throw SchemaError(fmt::format("logit row has length {} but label set covers {} relations (expected |R|+1)",
                                      logits.size(), labels.size()));
    }
    for (int r : labels.positives()) {
        if (r < 1 || static_cast<std::size_t>(r) > R) {
            throw SchemaError(fmt::format("positive relation {} outside [1, {}]", r, R));
        }
    }
    for (int r : labels.negatives()) {
        if (r < 1 || static_cast<std::size_t>(r) > R) {
            throw SchemaError(fmt::format("negative relation {} outside [1, {}]", r, R));
        }
    }
}

void check_finite(std::span<const double> logits) {
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!std::isfinite(logits[i])) {
            throw NumericError(fmt::format("non-finite logit at index {}", i));
        }
    }
}

double log_sum_exp(std::span<const double> logits, const std::vector<int>& members, bool with_th) {
    double hi = with_th ? logits[0] : -std::numeric_limits<double>::infinity();
    for (int r : members) hi = std::max(hi, logits[static_cast<std::size_t>(r)]);
    double s = with_th ? std::exp(logits[0] - hi) : 0.0;
    for (int r : members) s += std::exp(logits[static_cast<std::size_t>(r)] - hi);
    return hi + std::log(s);
}

double plain_value(std::span<const double> t, const LabelSet& labels) {
    double loss = 0.0;
    for (int r : labels.positives()) loss -= t[static_cast<std::size_t>(r)] - t[0];
    for (int r : labels.negatives()) loss -= t[0] - t[static_cast<std::size_t>(r)];
    return loss;
}

void plain_grad(const LabelSet& labels, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
    for (int r : labels.positives()) {
        g[static_cast<std::size_t>(r)] -= 1.0;
        g[0] += 1.0;
    }
    for (int r : labels.negatives()) {
        g[static_cast<std::size_t>(r)] += 1.0;
        g[0] -= 1.0;
    }
}

double cmm_value(std::span<const double> t, const LabelSet& labels, const LossConfig& cfg) {
    double loss = 0.0;
    for (int r : labels.positives()) loss += cmm_positive_term(t[static_cast<std::size_t>(r)] - t[0], cfg.gamma);
    for (int r : labels.negatives()) loss += cmm_negative_term(t[0] - t[static_cast<std::size_t>(r)], cfg.m);
    return loss;
}

double cmm_value_grad(std::span<const double> t, const LabelSet& labels, const LossConfig& cfg,
                      std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
    double loss = 0.0;
    for (int r : labels.positives()) {
        const auto i = static_cast<std::size_t>(r);
        const double d = t[i] - t[0];
        loss += cmm_positive_term(d, cfg.gamma);
        const double dd = cmm_positive_term_derivative(d, cfg.gamma);
        g[i] += dd;
        g[0] -= dd;
    }
    for (int r : labels.negatives()) {
        const auto i = static_cast<std::size_t>(r);
        const double d = t[0] - t[i];
        loss += cmm_negative_term(d, cfg.m);
        const double dd = cmm_negative_term_derivative(d, cfg.m);
        g[0] += dd;
        g[i] -= dd;
    }
    return loss;
}

double atl_value(std::span<const double> t, const LabelSet& labels) {
    double loss = 0.0;
    const auto& pos = labels.positives();
    if (!pos.empty()) {
        const double lse = log_sum_exp(t, pos, true);
        for (int r : pos) loss += lse - t[static_cast<std::size_t>(r)];
    }
    loss += log_sum_exp(t, labels.negatives(), true) - t[0];
    return loss;
}

double atl_value_grad(std::span<const double> t, const LabelSet& labels, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
    double loss = 0.0;
    const auto& pos = labels.positives();
    if (!pos.empty()) {
        const double lse = log_sum_exp(t, pos, true);
        const double k = static_cast<double>(pos.size());
        for (int r : pos) {
            const auto i = static_cast<std::size_t>(r);
            loss += lse - t[i];
            g[i] += k * std::exp(t[i] - lse) - 1.0;
        }
        g[0] += k * std::exp(t[0] - lse);
    }
    const auto& neg = labels.negatives();
    const double lse = log_sum_exp(t, neg, true);
    loss += lse - t[0];
    for (int r : neg) {
        const auto i = static_cast<std::size_t>(r);
        g[i] += std::exp(t[i] - lse);
    }
    g[0] += std::exp(t[0] - lse) - 1.0;
    return loss;
}

LossConfig config_of(LossKind kind) {
    LossConfig cfg;
    cfg.kind = kind;
    return cfg;
}

std::vector<double> row_grad(const LogitRow& logits, const LabelSet& labels, const LossConfig& cfg) {
    std::vector<double> g(logits.size());
    loss_value_and_grad(logits.values(), labels, cfg, g);
    return g;
}

} // namespace

DistanceSet margin_distances(const LogitRow& logits, const LabelSet& labels) {
    check_shape(logits.values(), labels);
    DistanceSet out;
    for (int r : labels.positives()) out.positive.emplace(r, logits.relation(r) - logits.th());
    for (int r : labels.negatives()) out.negative.emplace(r, logits.th() - logits.relation(r));
    return out;
}

double plain_margin_loss(const LogitRow& logits, const LabelSet& labels) {
    return loss_value(logits.values(), labels, config_of(LossKind::plain_margin));
}

std::vector<double> plain_margin_grad(const LogitRow& logits, const LabelSet& labels) {
    return row_grad(logits, labels, config_of(LossKind::plain_margin));
}

double negative_clamp_distance(double m) {
    return std::log((1.0 - m) / m);
}

double cmm_rescale(double d, Side side, double m) {
    if (side == Side::positive) {
        return log_sigmoid(d);
    }
    if (d >= negative_clamp_distance(m)) {
        return 0.0;
    }
    // sigmoid(d) + m can round up past 1 just below the clamp point
    return std::min(0.0, std::log(sigmoid(d) + m));
}

double cmm_positive_term(double d, double gamma) {
    const double q = log_sigmoid(d);
    // (1 - q)^gamma via exp/log1p; 1 - q >= 1 so the log is always defined.
    return -std::exp(gamma * std::log1p(-q)) * q;
}

double cmm_positive_term_derivative(double d, double gamma) {
    const double q = log_sigmoid(d);
    const double one_minus_q = 1.0 - q;
    const double dterm_dq = -std::exp((gamma - 1.0) * std::log1p(-q)) * (one_minus_q - gamma * q);
    return dterm_dq * sigmoid(-d);  // dq/dd = 1 - sigmoid(d)
}

double cmm_negative_term(double d, double m) {
    return -cmm_rescale(d, Side::negative, m);
}

double cmm_negative_term_derivative(double d, double m) {
    if (d >= negative_clamp_distance(m)) {
        return 0.0;
    }
    const double s = sigmoid(d);
    return -s * sigmoid(-d) / (s + m);
}

double cmm_loss(const LogitRow& logits, const LabelSet& labels, const LossConfig& cfg) {
    if (cfg.kind != LossKind::cmm) {
        throw ConfigError("cmm_loss: loss.kind must be cmm");
    }
    return loss_value(logits.values(), labels, cfg);
}

std::vector<double> cmm_loss_grad(const LogitRow& logits, const LabelSet& labels, const LossConfig& cfg) {
    if (cfg.kind != LossKind::cmm) {
        throw ConfigError("cmm_loss_grad: loss.kind must be cmm");
    }
    return row_grad(logits, labels, cfg);
}

double atl_reference_loss(const LogitRow& logits, const LabelSet& labels) {
    return loss_value(logits.values(), labels, config_of(LossKind::atl_reference));
}

std::vector<double> atl_reference_grad(const LogitRow& logits, const LabelSet& labels) {
    return row_grad(logits, labels, config_of(LossKind::atl_reference));
}

double loss_value(std::span<const double> logits, const LabelSet& labels, const LossConfig& cfg) {
    check_shape(logits, labels);
    check_finite(logits);
    switch (cfg.kind) {
        case LossKind::plain_margin: return plain_value(logits, labels);
        case LossKind::cmm: return cmm_value(logits, labels, cfg);
        case LossKind::atl_reference: return atl_value(logits, labels);
        case LossKind::plugin:
            cfg.validate();
            return cfg.plugin->value(logits, labels, cfg);
    }
    throw ConfigError("unknown loss kind");
}

double loss_value_and_grad(std::span<const double> logits, const LabelSet& labels, const LossConfig& cfg,
                           std::span<double> grad) {
    check_shape(logits, labels);
    check_finite(logits);
    if (grad.size() != logits.size()) {
        throw SchemaError(fmt::format("gradient buffer has length {}, expected {}", grad.size(), logits.size()));
    }
    switch (cfg.kind) {
        case LossKind::plain_margin:
            plain_grad(labels, grad);
            return plain_value(logits, labels);
        case LossKind::cmm: return cmm_value_grad(logits, labels, cfg, grad);
        case LossKind::atl_reference: return atl_value_grad(logits, labels, grad);
        case LossKind::plugin: {
            cfg.validate();
            const double v = cfg.plugin->value(logits, labels, cfg);
            cfg.plugin->gradient(logits, labels, cfg, grad);
            return v;
        }
    }
    throw ConfigError("unknown loss kind");
}

} // namespace cmm
