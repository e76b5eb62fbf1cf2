#include <random>

#include <fmt/format.h>

#include "cmm/error.hpp"
#include "cmm/random.hpp"
#include "cmm/trainer.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace cmm;

namespace {

// 2 relations, 200 pairs in 10 documents; relation r is positive when
// feature r-1 exceeds 0.5, so a linear encoder separates the classes.
Dataset separable_toy(std::uint64_t seed) {
    Dataset ds;
    ds.schema = RelationSchema::with_default_names(2);
    auto rng = make_engine(seed, {});
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        PairExample ex;
        ex.pair_id = fmt::format("p{}", i);
        ex.doc_id = fmt::format("d{}", i / 20);
        ex.features = {u(rng), u(rng), u(rng)};
        std::vector<int> pos;
        for (int r = 1; r <= 2; ++r) {
            if (ex.features[static_cast<std::size_t>(r - 1)] > 0.5) pos.push_back(r);
        }
        ex.labels = LabelSet::from_positives(pos, 2);
        ex.true_labels = ex.labels;
        ds.examples.push_back(std::move(ex));
    }
    ds.regroup_documents();
    return ds;
}

TrainConfig toy_config() {
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.optimizer.learning_rate = 0.05;
    return cfg;
}

} // namespace

TEST_CASE("training lowers the loss on a separable set") {
    const auto train_set = separable_toy(1);
    const auto dev_set = separable_toy(2);
    for (auto arch : {Architecture::linear, Architecture::one_hidden}) {
        auto cfg = toy_config();
        cfg.architecture = arch;
        cfg.hidden_dim = 8;
        const auto init = EncoderParams::initialize(arch, 3, 8, 3, derive_seed(cfg.seed, {1}));
        const double before = dataset_loss(init, train_set, cfg.loss);
        const auto result = train(train_set, dev_set, cfg);
        const double after = dataset_loss(result.params, train_set, cfg.loss);
        CHECK(after < before);
        REQUIRE(result.trace.records.size() == 20);
        CHECK(result.trace.records.back().mean_loss < result.trace.records.front().mean_loss);
        CHECK(result.trace.records.back().f1 > 0.9);
        CHECK(result.optimizer.step == 20 * 10);
    }
}

TEST_CASE("training is deterministic") {
    const auto train_set = separable_toy(3);
    const auto dev_set = separable_toy(4);
    auto cfg = toy_config();
    cfg.epochs = 5;
    const auto a = train(train_set, dev_set, cfg);
    const auto b = train(train_set, dev_set, cfg);
    CHECK(a.trace == b.trace);
    CHECK(a.params.values() == b.params.values());
    cfg.execution = kernels::Execution::parallel;
    const auto c = train(train_set, dev_set, cfg);
    CHECK(a.trace == c.trace);
    CHECK(a.params.values() == c.params.values());
    cfg.seed = 2;
    const auto d = train(train_set, dev_set, cfg);
    CHECK(a.params.values() != d.params.values());
}

TEST_CASE("evaluation schedule") {
    const auto train_set = separable_toy(5);
    auto cfg = toy_config();
    cfg.epochs = 7;
    cfg.eval_every = 3;
    const auto result = train(train_set, train_set, cfg);
    std::vector<int> epochs;
    for (const auto& r : result.trace.records) epochs.push_back(r.epoch);
    CHECK(epochs == std::vector<int>{3, 6, 7});
}

TEST_CASE("aggregation and accumulation modes") {
    const auto train_set = separable_toy(6);
    auto cfg = toy_config();
    cfg.epochs = 3;
    cfg.accumulate_documents = 4;
    const auto summed = train(train_set, train_set, cfg);
    CHECK(summed.optimizer.step == 3 * 3);  // 10 documents in steps of 4
    cfg.loss.aggregation = Aggregation::global_mean;
    const auto mean = train(train_set, train_set, cfg);
    CHECK(mean.params.all_finite());
    CHECK(mean.params.values() != summed.params.values());
}

TEST_CASE("baseline arms train") {
    const auto train_set = separable_toy(7);
    for (auto kind : {LossKind::plain_margin, LossKind::atl_reference}) {
        auto cfg = toy_config();
        cfg.epochs = 3;
        cfg.loss.kind = kind;
        const auto result = train(train_set, train_set, cfg);
        CHECK(result.params.all_finite());
        CHECK(result.trace.records.size() == 3);
    }
}

TEST_CASE("trainer input errors") {
    const auto good = separable_toy(8);
    Dataset empty;
    empty.schema = good.schema;
    CHECK_THROWS_AS(train(empty, good, toy_config()), Error);
    const auto other = fixtures::small_dataset(10, 3, 3);
    CHECK_THROWS_AS(train(good, other, toy_config()), SchemaError);
    const auto wide = fixtures::small_dataset(10, 2, 5);
    CHECK_THROWS_AS(train(good, wide, toy_config()), SchemaError);
    auto cfg = toy_config();
    cfg.epochs = -1;
    CHECK_THROWS_AS(train(good, good, cfg), ConfigError);
    cfg.epochs = 0;
    CHECK(train(good, good, cfg).trace.records.empty());
    cfg = toy_config();
    cfg.loss.m = 1.5;
    CHECK_THROWS_AS(train(good, good, cfg), ConfigError);
}
