#pragma once

// Independent reference computations for the tests. Nothing here calls into
// the library's loss or metric code: values come straight from the formulas
// in long double, or from brute-force recounts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "cmm/eval.hpp"
#include "cmm/schema.hpp"

namespace oracle {

inline long double sigmoid(long double d) { return 1.0L / (1.0L + std::exp(-d)); }

// -(1 - q)^gamma * q with q = log sigmoid(d)
inline long double positive_term(long double d, long double gamma) {
    const long double q = std::log(sigmoid(d));
    return -std::pow(1.0L - q, gamma) * q;
}

// -log(min(sigmoid(d) + m, 1))
inline long double negative_term(long double d, long double m) {
    return -std::log(std::min(sigmoid(d) + m, 1.0L));
}

inline long double cmm_loss(const std::vector<double>& row, const cmm::LabelSet& labels, long double gamma,
                            long double m) {
    const long double th = row[0];
    long double total = 0.0L;
    for (int r : labels.positives()) total += positive_term(row[static_cast<std::size_t>(r)] - th, gamma);
    for (int r : labels.negatives()) total += negative_term(th - row[static_cast<std::size_t>(r)], m);
    return total;
}

inline long double log_sum_exp(const std::vector<long double>& v) {
    const long double hi = *std::max_element(v.begin(), v.end());
    long double s = 0.0L;
    for (long double x : v) s += std::exp(x - hi);
    return hi + std::log(s);
}

inline long double atl_loss(const std::vector<double>& row, const cmm::LabelSet& labels) {
    std::vector<long double> pos_th{row[0]};
    for (int r : labels.positives()) pos_th.push_back(row[static_cast<std::size_t>(r)]);
    std::vector<long double> neg_th{row[0]};
    for (int r : labels.negatives()) neg_th.push_back(row[static_cast<std::size_t>(r)]);
    const long double lse_pos = log_sum_exp(pos_th);
    long double total = 0.0L;
    for (int r : labels.positives()) total -= row[static_cast<std::size_t>(r)] - lse_pos;
    total -= row[0] - log_sum_exp(neg_th);
    return total;
}

inline std::vector<int> decode(const std::vector<double>& row) {
    std::vector<int> out;
    for (std::size_t r = 1; r < row.size(); ++r) {
        if (row[r] > row[0]) out.push_back(static_cast<int>(r));
    }
    return out;
}

struct Counts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
};

// Recount over (pair, relation) facts; `ignore_seen` drops facts flagged
// seen_in_train from both sides.
inline Counts recount(const cmm::PredictionSet& predictions, const cmm::Dataset& data, cmm::GoldSource source,
                      bool ignore_seen) {
    Counts c;
    for (std::size_t i = 0; i < data.examples.size(); ++i) {
        const auto& ex = data.examples[i];
        const auto& gold_labels = source == cmm::GoldSource::labels ? ex.labels : ex.true_labels;
        std::set<std::pair<std::size_t, int>> gold;
        std::set<std::pair<std::size_t, int>> pred;
        for (int r : gold_labels.positives()) gold.insert({i, r});
        for (int r : predictions[i]) pred.insert({i, r});
        if (ignore_seen) {
            for (int r : ex.seen_in_train) {
                gold.erase({i, r});
                pred.erase({i, r});
            }
        }
        for (const auto& f : pred) (gold.count(f) ? c.tp : c.fp)++;
        for (const auto& f : gold) {
            if (!pred.count(f)) c.fn++;
        }
    }
    return c;
}

inline double f1(const Counts& c) {
    const double denom = 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.fp) + static_cast<double>(c.fn);
    return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / denom;
}

} // namespace oracle
