#include "cmm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "cmm/error.hpp"
#include "cmm/loss.hpp"

namespace cmm {

std::vector<int> decode(std::span<const double> logits) {
    std::vector<int> out;
    for (std::size_t r = 1; r < logits.size(); ++r) {
        if (logits[r] > logits[0]) {
            out.push_back(static_cast<int>(r));
        }
    }
    return out;
}

PredictionSet predict(const EncoderParams& params, const Dataset& dataset, kernels::Execution ex) {
    const std::size_t n = dataset.examples.size();
    const std::size_t F = params.input_dim();
    std::vector<double> inputs;
    inputs.reserve(n * F);
    for (const auto& e : dataset.examples) {
        if (e.features.size() != F) {
            throw SchemaError(fmt::format("pair {}: feature dimension {} does not match encoder input {}", e.pair_id,
                                          e.features.size(), F));
        }
        inputs.insert(inputs.end(), e.features.begin(), e.features.end());
    }
    EncoderWorkspace ws;
    forward_batch(params, inputs, n, ws, ex);
    const std::size_t width = params.output_dim();
    PredictionSet out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = decode(std::span<const double>(ws.logits).subspan(i * width, width));
    }
    return out;
}

std::size_t count_positive_predictions(const PredictionSet& predictions) noexcept {
    std::size_t total = 0;
    for (const auto& p : predictions) total += p.size();
    return total;
}

const char* to_string(GoldSource g) noexcept {
    return g == GoldSource::labels ? "labels" : "true_labels";
}

GoldSource gold_source_from_string(const std::string& s) {
    if (s == "labels") return GoldSource::labels;
    if (s == "true_labels") return GoldSource::true_labels;
    throw ConfigError(fmt::format("gold: expected 'labels' or 'true_labels', got '{}'", s));
}

Json MetricsRecord::to_json() const {
    Json j;
    j["format"] = "cmm-metrics/1";
    j["true_positives"] = true_positives;
    j["false_positives"] = false_positives;
    j["false_negatives"] = false_negatives;
    j["precision"] = precision;
    j["recall"] = recall;
    j["f1"] = f1;
    j["ign_f1"] = ign_f1;
    return j;
}

namespace {

struct Counts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
};

Counts count_facts(const PredictionSet& predictions, const Dataset& gold, GoldSource source, bool drop_seen) {
    if (predictions.size() != gold.examples.size()) {
        throw SchemaError(fmt::format("prediction set covers {} pairs, gold dataset has {}", predictions.size(),
                                      gold.examples.size()));
    }
    Counts c;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto& ex = gold.examples[i];
        const auto& truth = source == GoldSource::labels ? ex.labels.positives() : ex.true_labels.positives();
        std::vector<int> sorted_pred;
        const std::vector<int>* pred_ptr = &predictions[i];
        if (!std::is_sorted(pred_ptr->begin(), pred_ptr->end())) {
            sorted_pred = *pred_ptr;
            std::sort(sorted_pred.begin(), sorted_pred.end());
            pred_ptr = &sorted_pred;
        }
        const auto& pred = *pred_ptr;
        auto keep = [&](int r) { return !drop_seen || !ex.is_seen_in_train(r); };
        auto p = pred.begin();
        auto g = truth.begin();
        while (p != pred.end() || g != truth.end()) {
            if (g == truth.end() || (p != pred.end() && *p < *g)) {
                if (keep(*p)) ++c.fp;
                ++p;
            } else if (p == pred.end() || *g < *p) {
                if (keep(*g)) ++c.fn;
                ++g;
            } else {
                if (keep(*p)) ++c.tp;
                ++p;
                ++g;
            }
        }
    }
    return c;
}

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(const Counts& c) {
    const double p = ratio(c.tp, c.tp + c.fp);
    const double r = ratio(c.tp, c.tp + c.fn);
    return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

MetricsRecord make_record(const Counts& c, double ign) {
    MetricsRecord m;
    m.true_positives = c.tp;
    m.false_positives = c.fp;
    m.false_negatives = c.fn;
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.recall = ratio(c.tp, c.tp + c.fn);
    m.f1 = f1_of(c);
    m.ign_f1 = ign;
    return m;
}

} // namespace

MetricsRecord micro_f1(const PredictionSet& predictions, const Dataset& gold, GoldSource source) {
    const Counts all = count_facts(predictions, gold, source, false);
    const Counts filtered = count_facts(predictions, gold, source, true);
    return make_record(all, f1_of(filtered));
}

MetricsRecord ign_f1(const PredictionSet& predictions, const Dataset& gold, GoldSource source) {
    const Counts filtered = count_facts(predictions, gold, source, true);
    return make_record(filtered, f1_of(filtered));
}

std::vector<PositiveCountRow> positive_count_trace(const std::vector<ArmTrace>& traces) {
    std::vector<PositiveCountRow> rows;
    for (const auto& arm : traces) {
        for (const auto& rec : arm.trace.records) {
            rows.push_back({rec.epoch, arm.arm, rec.positives});
        }
    }
    return rows;
}

void write_positive_counts_csv(const std::vector<PositiveCountRow>& rows, std::ostream& out) {
    out << "epoch,arm,positives\n";
    for (const auto& r : rows) {
        out << fmt::format("{},{},{}\n", r.epoch, r.arm, r.positives);
    }
}

std::vector<double> default_curve_gammas() {
    return {1.0, 1.2, 1.4, 1.6, 2.0};
}

std::vector<double> linear_grid(double lo, double hi, int n) {
    if (n < 1 || !std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
        throw ConfigError(fmt::format("curve grid: need finite lo < hi and n >= 1 (lo={}, hi={}, n={})", lo, hi, n));
    }
    std::vector<double> grid(static_cast<std::size_t>(n) + 1);
    const double dn = static_cast<double>(n);
    for (int i = 0; i <= n; ++i) {
        grid[static_cast<std::size_t>(i)] = (lo * dn + (hi - lo) * static_cast<double>(i)) / dn;
    }
    return grid;
}

std::vector<double> default_curve_grid() {
    return linear_grid(-5.0, 5.0, 200);
}

std::vector<CurveRow> curve_export(const std::vector<double>& gammas, const std::vector<double>& d_grid, double m) {
    (void)m;
    if (!std::all_of(d_grid.begin(), d_grid.end(), [](double d) { return std::isfinite(d); }) ||
        !std::is_sorted(d_grid.begin(), d_grid.end())) {
        throw ConfigError("curves: distance grid must be finite and sorted ascending");
    }
    std::vector<CurveRow> rows;
    rows.reserve(gammas.size() * d_grid.size());
    for (double g : gammas) {
        for (double d : d_grid) {
            rows.push_back({d, g, cmm_positive_term(d, g)});
        }
    }
    return rows;
}

void write_curves_csv(const std::vector<CurveRow>& rows, std::ostream& out) {
    out << "d,gamma,loss_pos\n";
    for (const auto& r : rows) {
        out << fmt::format("{},{},{}\n", r.d, r.gamma, r.loss_pos);
    }
}

} // namespace cmm
