#pragma once

#include <cstdint>

#include "cmm/encoder.hpp"
#include "cmm/eval.hpp"
#include "cmm/loss.hpp"
#include "cmm/schema.hpp"
#include "cmm/trace.hpp"

namespace cmm {

struct TrainConfig {
    AdamWConfig optimizer;
    int epochs = 30;
    std::uint64_t seed = 1;
    LossConfig loss;
    int eval_every = 1;
    Architecture architecture = Architecture::linear;
    std::size_t hidden_dim = 64;
    int accumulate_documents = 1;  // documents per optimizer step
    GoldSource gold = GoldSource::true_labels;
    kernels::Execution execution = kernels::Execution::serial;

    void validate() const;
};

struct TrainResult {
    EncoderParams params;
    AdamWState optimizer;
    TrainTrace trace;
};

// Epoch loop over document groups shuffled by a (seed, epoch) stream. Each
// step sums (or, with global_mean, averages) the loss over every pair of
// `accumulate_documents` documents and applies one AdamW update. A trace
// record is appended every `eval_every` epochs and after the final epoch.
// Deterministic in (train bytes, dev bytes, cfg).
TrainResult train(const Dataset& train_set, const Dataset& dev_set, const TrainConfig& cfg);

// Mean loss per pair of the current parameters over a dataset, on the
// training labels.
double dataset_loss(const EncoderParams& params, const Dataset& dataset, const LossConfig& loss);

} // namespace cmm
