#include "cmm/trainer.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "cmm/error.hpp"
#include "cmm/random.hpp"

namespace cmm {

namespace {

constexpr std::uint64_t kInitStream = 0x1;
constexpr std::uint64_t kShuffleStream = 0x2;

// Features stored contiguously in document order.
struct PackedDataset {
    std::vector<double> features;
    std::vector<const LabelSet*> labels;
    std::vector<std::size_t> doc_offsets;  // row offsets; size = documents + 1

    std::size_t documents() const noexcept { return doc_offsets.size() - 1; }
};

PackedDataset pack(const Dataset& ds) {
    PackedDataset p;
    const std::size_t F = ds.feature_dim();
    p.features.reserve(ds.examples.size() * F);
    p.labels.reserve(ds.examples.size());
    p.doc_offsets.push_back(0);
    for (const auto& doc : ds.documents) {
        for (std::size_t i : doc.members) {
            const auto& ex = ds.examples[i];
            p.features.insert(p.features.end(), ex.features.begin(), ex.features.end());
            p.labels.push_back(&ex.labels);
        }
        p.doc_offsets.push_back(p.labels.size());
    }
    return p;
}

void check_compatible(const Dataset& a, const Dataset& b, const char* what) {
    if (!(a.schema == b.schema)) {
        throw SchemaError(fmt::format("{} dataset uses a different relation schema", what));
    }
    if (!b.examples.empty() && a.feature_dim() != b.feature_dim()) {
        throw SchemaError(fmt::format("{} dataset has feature dimension {}, training data has {}", what,
                                      b.feature_dim(), a.feature_dim()));
    }
}

} // namespace

void TrainConfig::validate() const {
    optimizer.validate();
    loss.validate();
    if (epochs < 0) throw ConfigError("train.epochs: must be >= 0");
    if (eval_every < 1) throw ConfigError("train.eval_every: must be >= 1");
    if (accumulate_documents < 1) throw ConfigError("train.accumulate_documents: must be >= 1");
    if (architecture == Architecture::one_hidden && hidden_dim == 0) {
        throw ConfigError("train.hidden_dim: must be >= 1 for one_hidden");
    }
}

double dataset_loss(const EncoderParams& params, const Dataset& dataset, const LossConfig& loss) {
    const PackedDataset packed = pack(dataset);
    const std::size_t n = packed.labels.size();
    if (n == 0) return 0.0;
    EncoderWorkspace ws;
    forward_batch(params, packed.features, n, ws);
    const std::size_t width = params.output_dim();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += loss_value(std::span<const double>(ws.logits).subspan(i * width, width), *packed.labels[i], loss);
    }
    return total / static_cast<double>(n);
}

TrainResult train(const Dataset& train_set, const Dataset& dev_set, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.examples.empty() || train_set.documents.empty()) {
        throw Error("training dataset is empty");
    }
    check_compatible(train_set, train_set, "training");
    check_compatible(train_set, dev_set, "dev");

    const std::size_t F = train_set.feature_dim();
    const std::size_t out = train_set.schema.row_length();
    TrainResult result{EncoderParams::initialize(cfg.architecture, F, cfg.hidden_dim, out,
                                                 derive_seed(cfg.seed, {kInitStream})),
                       {}, {}};
    auto& params = result.params;
    result.optimizer = AdamWState::zeros(params.values().size());
    const auto mask = params.decay_mask();

    const PackedDataset packed = pack(train_set);
    std::vector<std::size_t> order(packed.documents());
    std::vector<double> grads(params.values().size());
    EncoderWorkspace ws;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Engine shuffle_rng = make_engine(cfg.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)});
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        std::size_t epoch_pairs = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.accumulate_documents)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.accumulate_documents));
            std::size_t step_pairs = 0;
            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t d = order[k];
                step_pairs += packed.doc_offsets[d + 1] - packed.doc_offsets[d];
            }
            if (step_pairs == 0) continue;
            const double scale =
                cfg.loss.aggregation == Aggregation::global_mean ? 1.0 / static_cast<double>(step_pairs) : 1.0;

            std::fill(grads.begin(), grads.end(), 0.0);
            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t d = order[k];
                const std::size_t lo = packed.doc_offsets[d];
                const std::size_t hi = packed.doc_offsets[d + 1];
                if (lo == hi) continue;
                const auto inputs = std::span<const double>(packed.features).subspan(lo * F, (hi - lo) * F);
                const auto labels = std::span<const LabelSet* const>(packed.labels).subspan(lo, hi - lo);
                epoch_loss += accumulate_gradients(params, inputs, labels, cfg.loss, scale, grads, ws, cfg.execution);
            }
            epoch_pairs += step_pairs;
            adamw_step(params.values(), grads, mask, cfg.optimizer, result.optimizer);
        }
        if (!params.all_finite()) {
            throw NumericError(fmt::format("parameters became non-finite in epoch {}", epoch));
        }

        if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
            EpochRecord rec;
            rec.epoch = epoch;
            rec.mean_loss = epoch_pairs == 0 ? 0.0 : epoch_loss / static_cast<double>(epoch_pairs);
            if (!dev_set.examples.empty()) {
                const auto predictions = predict(params, dev_set, cfg.execution);
                const auto metrics = micro_f1(predictions, dev_set, cfg.gold);
                rec.f1 = metrics.f1;
                rec.ign_f1 = metrics.ign_f1;
                rec.positives = count_positive_predictions(predictions);
            }
            result.trace.records.push_back(rec);
        }
    }
    return result;
}

} // namespace cmm
