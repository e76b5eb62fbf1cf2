#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cmm/encoder.hpp"
#include "cmm/schema.hpp"
#include "cmm/trace.hpp"

namespace cmm {

// Predicted relation indices per pair, in dataset order; empty means NA.
using PredictionSet = std::vector<std::vector<int>>;

// {r in [1, |R|] : t_r > t_TH}. Ties go to the negative side.
std::vector<int> decode(std::span<const double> logits);
inline std::vector<int> decode(const LogitRow& logits) { return decode(logits.values()); }

PredictionSet predict(const EncoderParams& params, const Dataset& dataset,
                      kernels::Execution ex = kernels::Execution::serial);

std::size_t count_positive_predictions(const PredictionSet& predictions) noexcept;

enum class GoldSource { labels, true_labels };

const char* to_string(GoldSource g) noexcept;
GoldSource gold_source_from_string(const std::string& s);

struct MetricsRecord {
    std::uint64_t true_positives = 0;
    std::uint64_t false_positives = 0;
    std::uint64_t false_negatives = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double ign_f1 = 0.0;

    friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
    Json to_json() const;
};

// Micro-averaged over all (pair, relation) facts. The ign_f1 field carries
// the F1 of the seen_in_train-filtered fact set. Throws SchemaError when the
// prediction count differs from the dataset size.
MetricsRecord micro_f1(const PredictionSet& predictions, const Dataset& gold, GoldSource source);

// micro_f1 after dropping every (pair, relation) fact flagged seen_in_train
// from both predictions and gold; counts, precision, recall and f1 refer to
// the filtered set, and f1 == ign_f1.
MetricsRecord ign_f1(const PredictionSet& predictions, const Dataset& gold, GoldSource source);

struct ArmTrace {
    std::string arm;
    TrainTrace trace;
};

struct PositiveCountRow {
    int epoch = 0;
    std::string arm;
    std::size_t positives = 0;
};

// (epoch, arm, positives) rows, arms in the given order, epochs ascending.
std::vector<PositiveCountRow> positive_count_trace(const std::vector<ArmTrace>& traces);
void write_positive_counts_csv(const std::vector<PositiveCountRow>& rows, std::ostream& out);

struct CurveRow {
    double d = 0.0;
    double gamma = 0.0;
    double loss_pos = 0.0;
};

std::vector<double> default_curve_gammas();
// n+1 evenly spaced points from lo to hi inclusive, each computed as
// (lo*n + (hi-lo)*i) / n.
std::vector<double> linear_grid(double lo, double hi, int n);
// [-5, 5] in steps of 0.05 (201 points).
std::vector<double> default_curve_grid();

// Positive-side CMM term over a distance grid, one series per gamma. `m` only
// affects the negative side and is accepted for config echo.
std::vector<CurveRow> curve_export(const std::vector<double>& gammas, const std::vector<double>& d_grid, double m);
void write_curves_csv(const std::vector<CurveRow>& rows, std::ostream& out);

} // namespace cmm
