#include "cmm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "cmm/error.hpp"
#include "cmm/random.hpp"

namespace cmm {

std::vector<double> finite_difference(const LossEvaluator& loss, std::span<const double> point, double step) {
    if (!(step > 0.0)) {
        throw ConfigError(fmt::format("finite_difference: step must be > 0, got {}", step));
    }
    std::vector<double> probe(point.begin(), point.end());
    std::vector<double> out(point.size());
    for (std::size_t i = 0; i < point.size(); ++i) {
        probe[i] = point[i] + step;
        const double up = loss(probe);
        probe[i] = point[i] - step;
        const double down = loss(probe);
        probe[i] = point[i];
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericError(fmt::format("finite_difference: non-finite loss when perturbing coordinate {}", i));
        }
        out[i] = (up - down) / (2.0 * step);
    }
    return out;
}

std::vector<double> finite_difference(const LogitRow& logits, const LabelSet& labels, const LossConfig& cfg,
                                      double step) {
    return finite_difference([&](std::span<const double> t) { return loss_value(t, labels, cfg); }, logits.values(),
                             step);
}

double relative_error(double analytic, double numeric) noexcept {
    return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

Json GradCheckReport::to_json() const {
    Json j;
    j["format"] = "cmm-gradcheck/1";
    j["seed"] = seed;
    j["trials"] = trials;
    j["compared"] = compared;
    j["excluded_near_clamp"] = excluded;
    j["empty_positive_trials"] = empty_positive_trials;
    j["tolerance"] = tolerance;
    j["max_rel_error"] = max_rel_error;
    j["passed"] = passed();
    j["failures"] = Json::array();
    for (const auto& f : failures) {
        Json fj;
        fj["trial"] = f.trial;
        fj["seed"] = f.seed;
        fj["logits"] = f.logits;
        fj["positives"] = f.positives;
        fj["gamma"] = f.gamma;
        fj["m"] = f.m;
        fj["analytic"] = f.analytic;
        fj["numeric"] = f.numeric;
        fj["max_rel_error"] = f.max_rel_error;
        j["failures"].push_back(std::move(fj));
    }
    return j;
}

namespace {

struct TrialOutcome {
    bool excluded = false;
    bool empty_positives = false;
    double max_rel_error = 0.0;
    std::optional<GradCheckFailure> failure;
};

TrialOutcome run_trial(const GradCheckRanges& ranges, double tolerance, std::uint64_t seed, std::uint64_t trial) {
    const std::uint64_t trial_seed = derive_seed(seed, {trial});
    Engine rng(trial_seed);
    std::uniform_int_distribution<int> relation_count(ranges.min_relations, ranges.max_relations);
    std::uniform_real_distribution<double> logit(ranges.logit_min, ranges.logit_max);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick_gamma(0, ranges.gammas.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_m(0, ranges.ms.size() - 1);

    const int R = relation_count(rng);
    std::vector<double> t(static_cast<std::size_t>(R) + 1);
    for (auto& v : t) v = logit(rng);
    const bool force_empty = unit(rng) < ranges.empty_positive_rate;
    std::vector<int> positives;
    for (int r = 1; r <= R; ++r) {
        if (unit(rng) < ranges.positive_rate && !force_empty) positives.push_back(r);
    }

    LossConfig cfg;
    cfg.kind = ranges.kind;
    cfg.gamma = ranges.gammas[pick_gamma(rng)];
    cfg.m = ranges.ms[pick_m(rng)];
    const auto labels = LabelSet::from_positives(positives, R);
    const LogitRow row(t);

    TrialOutcome out;
    out.empty_positives = positives.empty();
    if (cfg.kind == LossKind::cmm) {
        const double kink = negative_clamp_distance(cfg.m);
        for (int r : labels.negatives()) {
            if (std::abs((t[0] - t[static_cast<std::size_t>(r)]) - kink) < 10.0 * ranges.step) {
                out.excluded = true;
                return out;
            }
        }
    }

    std::vector<double> analytic(t.size());
    loss_value_and_grad(row.values(), labels, cfg, analytic);
    const auto numeric = finite_difference(row, labels, cfg, ranges.step);
    for (std::size_t i = 0; i < t.size(); ++i) {
        out.max_rel_error = std::max(out.max_rel_error, relative_error(analytic[i], numeric[i]));
    }
    if (out.max_rel_error > tolerance) {
        out.failure = GradCheckFailure{trial, trial_seed, t, positives, cfg.gamma, cfg.m, analytic, numeric,
                                       out.max_rel_error};
    }
    return out;
}

} // namespace

GradCheckReport check_gradients(const GradCheckRanges& ranges, std::size_t trials, double tolerance,
                                std::uint64_t seed, kernels::Execution ex) {
    if (trials < 1) {
        throw ConfigError("gradcheck.trials: must be >= 1");
    }
    if (ranges.gammas.empty() || ranges.ms.empty() || ranges.min_relations < 1 ||
        ranges.max_relations < ranges.min_relations || !(ranges.logit_max > ranges.logit_min)) {
        throw ConfigError("gradcheck ranges: need nonempty gammas/ms, 1 <= min_relations <= max_relations and "
                          "logit_min < logit_max");
    }

    std::vector<TrialOutcome> outcomes(trials);
    const auto n = static_cast<std::ptrdiff_t>(trials);
    if (ex == kernels::Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            outcomes[static_cast<std::size_t>(i)] = run_trial(ranges, tolerance, seed, static_cast<std::uint64_t>(i));
        }
    } else {
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            outcomes[static_cast<std::size_t>(i)] = run_trial(ranges, tolerance, seed, static_cast<std::uint64_t>(i));
        }
    }

    GradCheckReport report;
    report.seed = seed;
    report.trials = trials;
    report.tolerance = tolerance;
    for (auto& o : outcomes) {
        if (o.empty_positives) ++report.empty_positive_trials;
        if (o.excluded) {
            ++report.excluded;
            continue;
        }
        ++report.compared;
        report.max_rel_error = std::max(report.max_rel_error, o.max_rel_error);
        if (o.failure) report.failures.push_back(std::move(*o.failure));
    }
    return report;
}

} // namespace cmm
