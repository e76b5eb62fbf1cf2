#pragma once

#include <cstddef>
#include <vector>

namespace cmm {

struct EpochRecord {
    int epoch = 0;           // 1-based
    double mean_loss = 0.0;  // training loss per pair, averaged over the epoch
    double f1 = 0.0;         // dev micro-F1
    double ign_f1 = 0.0;     // dev Ign-F1
    std::size_t positives = 0;  // predicted positive (pair, relation) facts on dev

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

// One record per evaluated epoch, strictly increasing epoch indices.
struct TrainTrace {
    std::vector<EpochRecord> records;

    friend bool operator==(const TrainTrace&, const TrainTrace&) = default;
};

} // namespace cmm
