#include <cmath>
#include <map>
#include <sstream>

#include "cmm/dataset_io.hpp"
#include "cmm/error.hpp"
#include "cmm/synthdata.hpp"
#include "doctest.h"

using namespace cmm;

namespace {

GenConfig small_config() {
    GenConfig cfg;
    cfg.n_documents = 12;
    cfg.dev_documents = 4;
    cfg.pairs_per_document = 40;
    cfg.relation_count = 6;
    cfg.feature_dim = 10;
    cfg.positive_rate = 0.2;
    cfg.seed = 5;
    return cfg;
}

std::string to_jsonl(const Dataset& ds) {
    std::ostringstream out;
    write_dataset(ds, out);
    return out.str();
}

// teacher scores s = T x
std::vector<double> teacher_scores(const std::vector<double>& teacher, const PairExample& ex, int R) {
    const std::size_t F = ex.features.size();
    std::vector<double> s(static_cast<std::size_t>(R), 0.0);
    for (std::size_t r = 0; r < s.size(); ++r) {
        for (std::size_t j = 0; j < F; ++j) s[r] += teacher[r * F + j] * ex.features[j];
    }
    return s;
}

// Full rescan of a dataset, written independently of distribution_report.
struct Rescan {
    std::size_t pairs = 0, positive_pairs = 0, true_positive_pairs = 0, facts = 0, easy = 0, hard = 0,
                corrupted = 0, demoted = 0;
    std::map<int, std::size_t> per_relation;
};

Rescan rescan(const Dataset& ds) {
    Rescan r;
    for (const auto& ex : ds.examples) {
        r.pairs++;
        if (!ex.labels.positives().empty()) r.positive_pairs++;
        if (!ex.true_labels.positives().empty()) r.true_positive_pairs++;
        for (int rel : ex.labels.positives()) {
            r.facts++;
            r.per_relation[rel]++;
        }
        (ex.difficulty == Difficulty::easy ? r.easy : r.hard)++;
        if (ex.corrupted) r.corrupted++;
        for (int rel : ex.true_labels.positives()) {
            if (!ex.labels.is_positive(rel)) r.demoted++;
        }
    }
    return r;
}

void check_report(const Dataset& ds) {
    const auto rep = distribution_report(ds);
    const auto want = rescan(ds);
    CHECK(rep.pairs == want.pairs);
    CHECK(rep.positive_pairs == want.positive_pairs);
    CHECK(rep.true_positive_pairs == want.true_positive_pairs);
    CHECK(rep.positive_facts == want.facts);
    CHECK(rep.easy == want.easy);
    CHECK(rep.hard == want.hard);
    CHECK(rep.corrupted_pairs == want.corrupted);
    CHECK(rep.demoted_facts == want.demoted);
    CHECK(rep.positive_fraction == doctest::Approx(static_cast<double>(want.positive_pairs) / want.pairs));
    REQUIRE(rep.shares.size() == static_cast<std::size_t>(ds.schema.relation_count()));
    std::size_t max_count = 0, min_count = want.facts;
    for (int rel = 1; rel <= ds.schema.relation_count(); ++rel) {
        const std::size_t c = want.per_relation.count(rel) ? want.per_relation.at(rel) : 0;
        max_count = std::max(max_count, c);
        min_count = std::min(min_count, c);
    }
    for (std::size_t i = 1; i < rep.shares.size(); ++i) CHECK(rep.shares[i - 1].count >= rep.shares[i].count);
    for (const auto& s : rep.shares) {
        const std::size_t c = want.per_relation.count(s.relation) ? want.per_relation.at(s.relation) : 0;
        CHECK(s.count == c);
    }
    if (want.facts > 0) {
        CHECK(rep.head_share == doctest::Approx(static_cast<double>(max_count) / want.facts));
        CHECK(rep.tail_share == doctest::Approx(static_cast<double>(min_count) / want.facts));
    }
}

} // namespace

TEST_CASE("generation is deterministic and valid") {
    const auto cfg = small_config();
    const auto a = generate(cfg);
    const auto b = generate(cfg);
    CHECK(to_jsonl(a) == to_jsonl(b));
    CHECK(validate_dataset(a).passed());
    CHECK(a.examples.size() == 12 * 40);
    CHECK(a.documents.size() == 12);
    CHECK(a.examples.front().pair_id == "train-d00000-p0000");
    for (const auto& ex : a.examples) CHECK(ex.labels == ex.true_labels);

    auto other = cfg;
    other.seed = 6;
    CHECK(to_jsonl(generate(other)) != to_jsonl(a));
    const auto dev = generate(cfg, Split::dev);
    CHECK(dev.examples.size() == 4 * 40);
    CHECK(dev.examples.front().pair_id == "dev-d00000-p0000");
    CHECK(dev.manifest["split"] == "dev");
}

TEST_CASE("parallel generation does not depend on the thread count") {
    // documents draw from their own streams, so a bigger run reproduces the
    // smaller run's documents exactly
    auto cfg = small_config();
    const auto small = generate(cfg);
    cfg.n_documents = 30;
    const auto big = generate(cfg);
    for (std::size_t i = 0; i < small.examples.size(); ++i) {
        CHECK(example_to_json(small.examples[i]).dump() == example_to_json(big.examples[i]).dump());
    }
}

TEST_CASE("positive pairs per document are stratified") {
    auto cfg = small_config();
    cfg.positive_rate = 0.25;  // exactly 10 of 40
    const auto ds = generate(cfg);
    for (const auto& doc : ds.documents) {
        std::size_t positives = 0;
        for (auto i : doc.members) positives += ds.examples[i].labels.positives().empty() ? 0 : 1;
        CHECK(positives == 10);
    }
}

TEST_CASE("teacher scores respect the margin") {
    auto cfg = small_config();
    cfg.hard_fraction = 0.0;
    const auto teacher = teacher_weights(cfg);
    const auto easy = generate(cfg);
    for (const auto& ex : easy.examples) {
        CHECK(ex.difficulty == Difficulty::easy);
        const auto s = teacher_scores(teacher, ex, cfg.relation_count);
        for (int r = 1; r <= cfg.relation_count; ++r) {
            const double score = s[static_cast<std::size_t>(r - 1)];
            if (ex.true_labels.is_positive(r)) {
                CHECK(score >= cfg.teacher_margin - 1e-9);
            } else {
                CHECK(score <= -cfg.teacher_margin + 1e-9);
            }
        }
    }
    cfg.hard_fraction = 1.0;
    const auto hard = generate(cfg);
    for (const auto& ex : hard.examples) {
        CHECK(ex.difficulty == Difficulty::hard);
        const auto s = teacher_scores(teacher, ex, cfg.relation_count);
        for (int r = 1; r <= cfg.relation_count; ++r) {
            const double score = s[static_cast<std::size_t>(r - 1)];
            const double sign = ex.true_labels.is_positive(r) ? 1.0 : -1.0;
            CHECK(sign * score > -1e-9);
            CHECK(sign * score < cfg.teacher_margin / 2 + 1e-9);
        }
    }
}

TEST_CASE("false negative injection") {
    GenConfig cfg;
    cfg.n_documents = 200;
    cfg.pairs_per_document = 100;
    cfg.relation_count = 5;
    cfg.feature_dim = 8;
    cfg.positive_rate = 0.5;
    cfg.extra_label_rate = 0.0;
    const auto clean = generate(cfg);
    REQUIRE(distribution_report(clean).positive_facts == 10000);

    SUBCASE("rate 0 leaves the examples unchanged") {
        const auto same = inject_false_negatives(clean, 0.0, 1);
        for (std::size_t i = 0; i < clean.examples.size(); ++i) {
            CHECK(example_to_json(same.examples[i]).dump() == example_to_json(clean.examples[i]).dump());
        }
    }
    SUBCASE("rate 0.3 over 10,000 facts") {
        const auto noisy = inject_false_negatives(clean, 0.3, 1);
        const auto rep = distribution_report(noisy);
        CHECK(rep.demoted_facts >= 2800);
        CHECK(rep.demoted_facts <= 3200);
        CHECK(rep.demoted_facts == rescan(noisy).demoted);
        CHECK(validate_dataset(noisy).passed());
        for (std::size_t i = 0; i < clean.examples.size(); ++i) {
            CHECK(noisy.examples[i].true_labels == clean.examples[i].true_labels);
        }
        CHECK(noisy.manifest["false_negative_injection"]["rate"] == 0.3);
        CHECK_THROWS_AS(inject_false_negatives(noisy, 0.1, 2), GenerationError);
    }
    SUBCASE("rate close to 1 demotes nearly everything") {
        const auto noisy = inject_false_negatives(clean, 1.0 - 1e-9, 1);
        const auto rep = distribution_report(noisy);
        CHECK(rep.demoted_facts >= 9999);
        CHECK(rep.true_positive_pairs == distribution_report(clean).true_positive_pairs);
    }
    SUBCASE("invalid rates") {
        CHECK_THROWS_AS(inject_false_negatives(clean, 1.0, 1), ConfigError);
        CHECK_THROWS_AS(inject_false_negatives(clean, -0.1, 1), ConfigError);
    }
}

TEST_CASE("distribution report equals a full rescan") {
    auto cfg = small_config();
    cfg.false_negative_rate = 0.3;
    const auto splits = generate_splits(cfg);
    check_report(splits.train);
    check_report(splits.dev);

    Dataset empty = generate(small_config());
    for (auto& ex : empty.examples) {
        ex.labels = LabelSet::all_negative(6);
        ex.true_labels = ex.labels;
        ex.seen_in_train.clear();
    }
    const auto rep = distribution_report(empty);
    CHECK(rep.positive_fraction == 0.0);
    CHECK(rep.head_share == 0.0);
    CHECK(rep.tail_share == 0.0);
    for (const auto& s : rep.shares) CHECK(s.share == 0.0);
    check_report(empty);
}

TEST_CASE("datasets regenerate from their manifests") {
    auto cfg = small_config();
    cfg.false_negative_rate = 0.3;
    const auto splits = generate_splits(cfg);
    CHECK(to_jsonl(regenerate(splits.train.manifest)) == to_jsonl(splits.train));
    CHECK(to_jsonl(regenerate(splits.dev.manifest)) == to_jsonl(splits.dev));
    std::istringstream in(to_jsonl(splits.train));
    CHECK(to_jsonl(regenerate(read_dataset(in).manifest)) == to_jsonl(splits.train));
}

TEST_CASE("generator config validation") {
    auto cfg = small_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.positive_rate = 1.5;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("gen.positive_rate"), ConfigError);
    cfg = small_config();
    cfg.relation_count = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.hard_fraction = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.false_negative_rate = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.feature_dim = 3;
    CHECK_THROWS_AS(generate(cfg), GenerationError);

    CHECK_THROWS_AS(GenConfig::from_json(Json{{"unknown", 1}}), ConfigError);
    CHECK_THROWS_AS(GenConfig::from_json(Json{{"seed", "x"}}), ConfigError);
    CHECK_THROWS_AS(preset("docred"), ConfigError);
    const auto round = GenConfig::from_json(small_config().to_json());
    CHECK(round.to_json() == small_config().to_json());
}

TEST_CASE("presets") {
    const auto mixed = preset("docred-mixed");
    CHECK(mixed.positive_rate == 0.0318);
    CHECK(mixed.false_negative_rate == 0.3);
    const auto re = preset("re-docred");
    CHECK(re.positive_rate == 0.0709);
    CHECK(re.false_negative_rate == 0.0);
    const auto overridden = GenConfig::from_json(Json{{"preset", "re-docred"}, {"n_documents", 7}});
    CHECK(overridden.positive_rate == 0.0709);
    CHECK(overridden.n_documents == 7);

    // realized rates at default scale stay near the targets
    for (const auto& p : {mixed, re}) {
        const auto rep = distribution_report(generate(p));
        CHECK(std::abs(rep.positive_fraction - p.positive_rate) / p.positive_rate < 0.1);
    }
}
