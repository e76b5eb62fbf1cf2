#include <sstream>

#include "cmm/error.hpp"
#include "cmm/experiment.hpp"
#include "cmm/synthdata.hpp"
#include "doctest.h"

using namespace cmm;

namespace {

GeneratedSplits tiny_splits() {
    GenConfig cfg;
    cfg.n_documents = 6;
    cfg.dev_documents = 3;
    cfg.pairs_per_document = 30;
    cfg.relation_count = 4;
    cfg.feature_dim = 8;
    cfg.positive_rate = 0.2;
    cfg.seed = 2;
    return generate_splits(cfg);
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

} // namespace

TEST_CASE("loss config JSON") {
    LossConfig cfg;
    cfg.gamma = 1.4;
    cfg.m = 0.3;
    cfg.aggregation = Aggregation::global_mean;
    const auto back = loss_config_from_json(loss_config_to_json(cfg));
    CHECK(back.kind == LossKind::cmm);
    CHECK(back.gamma == 1.4);
    CHECK(back.m == 0.3);
    CHECK(back.aggregation == Aggregation::global_mean);
    CHECK_THROWS_AS(loss_config_from_json(Json{{"kind", "cmm"}, {"gama", 1.0}}), ConfigError);
    CHECK_THROWS_AS(loss_config_from_json(Json{{"kind", "plugin"}}), ConfigError);
    CHECK_THROWS_AS(loss_config_from_json(Json{{"m", 2.0}}), ConfigError);
    CHECK_THROWS_WITH_AS(loss_config_from_json(Json{{"gamma", "high"}}), doctest::Contains("gamma"), ConfigError);
}

TEST_CASE("train config JSON") {
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.seed = 9;
    cfg.architecture = Architecture::one_hidden;
    cfg.hidden_dim = 16;
    cfg.optimizer.learning_rate = 0.01;
    cfg.execution = kernels::Execution::parallel;
    cfg.loss.kind = LossKind::atl_reference;
    const auto j = train_config_to_json(cfg);
    const auto back = train_config_from_json(j);
    CHECK(train_config_to_json(back) == j);
    CHECK_THROWS_AS(train_config_from_json(Json{{"epochs", -2}}), ConfigError);
    CHECK_THROWS_AS(train_config_from_json(Json{{"lr", 0.1}}), ConfigError);
    CHECK_THROWS_AS(train_config_from_json(Json{{"architecture", "transformer"}}), ConfigError);
}

TEST_CASE("checkpoints round trip") {
    const auto splits = tiny_splits();
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.architecture = Architecture::one_hidden;
    cfg.hidden_dim = 5;
    const auto result = train(splits.train, splits.dev, cfg);
    const auto j = checkpoint_to_json(result, cfg);
    CHECK(j["format"] == kCheckpointFormat);
    const auto back = params_from_checkpoint(Json::parse(j.dump()));
    CHECK(back.values() == result.params.values());
    CHECK(back.architecture() == Architecture::one_hidden);
    CHECK(predict(back, splits.dev) == predict(result.params, splits.dev));

    auto bad = j;
    bad["parameters"].erase(bad["parameters"].begin());
    CHECK_THROWS_AS(params_from_checkpoint(bad), SchemaError);
    bad = j;
    bad["format"] = "other";
    CHECK_THROWS_AS(params_from_checkpoint(bad), SchemaError);
}

TEST_CASE("compare tuples") {
    CompareSpec spec;
    spec.seeds = {1, 2};
    const auto tuples = compare_tuples(spec);
    REQUIRE(tuples.size() == 20 * 2 + 2 * 2);
    CHECK(tuples[0].first.gamma == 1.0);
    CHECK(tuples[0].first.m == 0.1);
    CHECK(tuples[0].second == 1);
    CHECK(tuples[1].second == 2);
    CHECK(tuples[2].first.m == 0.2);
    CHECK(tuples[8].first.gamma == 1.2);
    CHECK(tuples[40].first.kind == LossKind::plain_margin);
    CHECK(tuples[42].first.kind == LossKind::atl_reference);
    spec.ms = {1.0};
    CHECK_THROWS_AS(compare_tuples(spec), ConfigError);
}

TEST_CASE("compare runs match single training runs") {
    const auto splits = tiny_splits();
    CompareSpec spec;
    spec.base.epochs = 3;
    spec.gammas = {1.2};
    spec.ms = {0.2, 0.3};
    spec.seeds = {1, 2};
    const auto serial = run_compare(splits.train, splits.dev, spec, false);
    const auto parallel = run_compare(splits.train, splits.dev, spec, true);
    REQUIRE(serial.rows.size() == 8);
    REQUIRE(serial.summary.size() == 4);
    for (std::size_t i = 0; i < serial.rows.size(); ++i) {
        CHECK(serial.rows[i].trace == parallel.rows[i].trace);
        CHECK(serial.rows[i].f1 == parallel.rows[i].f1);
    }

    // the one-tuple grid equals a direct train() call
    TrainConfig cfg = spec.base;
    cfg.loss.gamma = 1.2;
    cfg.loss.m = 0.3;
    cfg.seed = 2;
    const auto direct = train(splits.train, splits.dev, cfg);
    CHECK(serial.rows[3].loss.m == 0.3);
    CHECK(serial.rows[3].seed == 2);
    CHECK(serial.rows[3].trace == direct.trace);
    CHECK(serial.rows[3].f1 == direct.trace.records.back().f1);

    std::size_t best_rows = 0, best_summary = 0;
    for (const auto& r : serial.rows) best_rows += r.best;
    for (const auto& s : serial.summary) best_summary += s.best;
    CHECK(best_rows == 1);
    CHECK(best_summary == 1);
    CHECK(serial.best_of(LossKind::plain_margin).loss.kind == LossKind::plain_margin);
    CHECK(serial.summary[0].mean_f1 == doctest::Approx((serial.rows[0].f1 + serial.rows[1].f1) / 2));

    std::ostringstream rows_csv, summary_csv;
    write_compare_csv(serial, rows_csv);
    write_compare_summary_csv(serial, summary_csv);
    const auto r = lines(rows_csv.str());
    REQUIRE(r.size() == 9);
    CHECK(r[0] == "kind,gamma,m,seed,f1,ign_f1,positives,best");
    CHECK(r[1].rfind("cmm,1.2,0.2,1,", 0) == 0);
    CHECK(r[5].rfind("plain_margin,,,1,", 0) == 0);
    const auto s = lines(summary_csv.str());
    REQUIRE(s.size() == 5);
    CHECK(s[0] == "kind,gamma,m,seeds,mean_f1,mean_ign_f1,best");
    CHECK(s[4].rfind("atl_reference,,,2,", 0) == 0);
}

TEST_CASE("trace CSV") {
    TrainTrace t;
    t.records.push_back({1, 0.5, 0.25, 0.125, 7});
    std::ostringstream out;
    write_trace_csv(t, out);
    CHECK(out.str() == "epoch,mean_loss,f1,ign_f1,positives\n1,0.5,0.25,0.125,7\n");
}
