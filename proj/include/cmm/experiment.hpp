#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmm/trainer.hpp"

namespace cmm {

inline constexpr const char* kCheckpointFormat = "cmm-checkpoint/1";

// JSON <-> config conversions. Parsing throws ConfigError naming the field.
Json loss_config_to_json(const LossConfig& cfg);
LossConfig loss_config_from_json(const Json& j);
Json train_config_to_json(const TrainConfig& cfg);
// `j` holds optimizer/loop fields; the loss comes from `loss` when given.
TrainConfig train_config_from_json(const Json& j, const LossConfig& loss = {});

Json checkpoint_to_json(const TrainResult& result, const TrainConfig& cfg);
EncoderParams params_from_checkpoint(const Json& checkpoint);

// Columns: epoch,mean_loss,f1,ign_f1,positives
void write_trace_csv(const TrainTrace& trace, std::ostream& out);

struct CompareSpec {
    TrainConfig base;  // loss field ignored; arms come from the grid
    std::vector<double> gammas{1.0, 1.2, 1.4, 1.6, 2.0};
    std::vector<double> ms{0.1, 0.2, 0.3, 0.4};
    std::vector<std::uint64_t> seeds{1};
    std::vector<LossKind> baselines{LossKind::plain_margin, LossKind::atl_reference};
    Aggregation aggregation = Aggregation::per_document_sum;
};

// One (loss, seed) training run.
struct CompareRow {
    LossConfig loss;
    std::uint64_t seed = 0;
    double f1 = 0.0;
    double ign_f1 = 0.0;
    std::size_t positives = 0;
    bool best = false;  // argmax of f1 over all rows, first occurrence wins
    TrainTrace trace;
};

// Seed-averaged result of one loss configuration.
struct CompareSummaryRow {
    LossConfig loss;
    std::size_t seeds = 0;
    double mean_f1 = 0.0;
    double mean_ign_f1 = 0.0;
    bool best = false;
};

struct CompareResult {
    std::vector<CompareRow> rows;          // tuple order: cmm grid (gamma-major), then baselines; seeds innermost
    std::vector<CompareSummaryRow> summary;

    const CompareSummaryRow& best_of(LossKind kind) const;
};

// The (loss, seed) tuples in their fixed output order.
std::vector<std::pair<LossConfig, std::uint64_t>> compare_tuples(const CompareSpec& spec);

// Trains every tuple; tuples may run in parallel, each single-threaded.
CompareResult run_compare(const Dataset& train_set, const Dataset& dev_set, const CompareSpec& spec,
                          bool parallel_tuples = true);

// Columns: kind,gamma,m,seed,f1,ign_f1,positives,best
void write_compare_csv(const CompareResult& result, std::ostream& out);
// Columns: kind,gamma,m,seeds,mean_f1,mean_ign_f1,best
void write_compare_summary_csv(const CompareResult& result, std::ostream& out);

} // namespace cmm
