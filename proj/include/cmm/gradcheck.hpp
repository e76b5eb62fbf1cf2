#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cmm/kernels.hpp"
#include "cmm/loss.hpp"
#include "cmm/schema.hpp"

namespace cmm {

using LossEvaluator = std::function<double(std::span<const double>)>;

// Central differences (L(t + h e_i) - L(t - h e_i)) / 2h for every coordinate,
// TH included. Throws NumericError naming the coordinate if an evaluation is
// not finite.
std::vector<double> finite_difference(const LossEvaluator& loss, std::span<const double> point, double step);
std::vector<double> finite_difference(const LogitRow& logits, const LabelSet& labels, const LossConfig& cfg,
                                      double step);

// |a - n| / max(1, |a|, |n|)
double relative_error(double analytic, double numeric) noexcept;

struct GradCheckRanges {
    LossKind kind = LossKind::cmm;
    std::vector<double> gammas{1.0, 1.2, 1.4, 1.6, 2.0};
    std::vector<double> ms{0.1, 0.2, 0.3, 0.4};
    double logit_min = -8.0;
    double logit_max = 8.0;
    int min_relations = 1;
    int max_relations = 12;
    double positive_rate = 0.3;        // per-relation positive probability
    double empty_positive_rate = 0.25; // share of trials forced to an empty positive set
    double step = 1e-5;
};

struct GradCheckFailure {
    std::uint64_t trial = 0;
    std::uint64_t seed = 0;
    std::vector<double> logits;
    std::vector<int> positives;
    double gamma = 0.0;
    double m = 0.0;
    std::vector<double> analytic;
    std::vector<double> numeric;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::uint64_t seed = 0;
    std::size_t trials = 0;
    std::size_t compared = 0;
    std::size_t excluded = 0;  // trials with a negative distance within 10*step of the clamp kink
    std::size_t empty_positive_trials = 0;
    double tolerance = 0.0;
    double max_rel_error = 0.0;
    std::vector<GradCheckFailure> failures;

    bool passed() const noexcept { return failures.empty(); }
    Json to_json() const;
};

// Randomized analytic-vs-numeric comparison; deterministic in (ranges, trials,
// tolerance, seed) regardless of `ex`.
GradCheckReport check_gradients(const GradCheckRanges& ranges, std::size_t trials, double tolerance,
                                std::uint64_t seed, kernels::Execution ex = kernels::Execution::serial);

} // namespace cmm
