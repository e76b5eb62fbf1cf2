#include "cmm/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "cmm/error.hpp"
#include "cmm/random.hpp"

namespace cmm {

namespace {

constexpr const char* kGeneratorFormat = "cmm-synth/1";
constexpr std::uint64_t kTeacherStream = 0x7ea;
constexpr std::uint64_t kDocumentStream = 0xd0c;
constexpr std::uint64_t kInjectStream = 0xfa1;
constexpr int kMaxResamples = 10000;

template <typename T>
void read_field(const Json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(fmt::format("gen.{}: {}", key, e.what()));
    }
}

// |R| x F matrix with orthonormal rows (modified Gram-Schmidt on Gaussian rows).
std::vector<double> draw_teacher(int relations, int features, std::uint64_t seed) {
    const auto R = static_cast<std::size_t>(relations);
    const auto F = static_cast<std::size_t>(features);
    Engine rng = make_engine(seed, {kTeacherStream});
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> t(R * F);
    for (std::size_t r = 0; r < R; ++r) {
        double* row = t.data() + r * F;
        for (int attempt = 0;; ++attempt) {
            for (std::size_t j = 0; j < F; ++j) row[j] = normal(rng);
            for (std::size_t k = 0; k < r; ++k) {
                const double* prev = t.data() + k * F;
                double proj = 0.0;
                for (std::size_t j = 0; j < F; ++j) proj += row[j] * prev[j];
                for (std::size_t j = 0; j < F; ++j) row[j] -= proj * prev[j];
            }
            double norm = 0.0;
            for (std::size_t j = 0; j < F; ++j) norm += row[j] * row[j];
            norm = std::sqrt(norm);
            if (norm > 1e-6) {
                for (std::size_t j = 0; j < F; ++j) row[j] /= norm;
                break;
            }
            if (attempt > 100) {
                throw GenerationError("teacher: could not draw linearly independent rows");
            }
        }
    }
    return t;
}

// Rejection-samples a teacher score for one relation. Proposal N(sign*margin, margin).
double draw_score(Engine& rng, bool positive, Difficulty difficulty, double margin) {
    const double sign = positive ? 1.0 : -1.0;
    std::normal_distribution<double> proposal(sign * margin, margin);
    for (int i = 0; i < kMaxResamples; ++i) {
        const double s = proposal(rng);
        const double signed_score = sign * s;
        if (difficulty == Difficulty::easy ? signed_score >= margin : (signed_score > 0.0 && signed_score < margin / 2)) {
            return s;
        }
    }
    throw GenerationError(fmt::format("teacher_margin: no {} score found after {} resamples", to_string(difficulty),
                                      kMaxResamples));
}

std::vector<PairExample> generate_document(const GenConfig& cfg, Split split, int doc, const std::vector<double>& teacher,
                                           const std::vector<double>& zipf_weights) {
    const auto R = static_cast<std::size_t>(cfg.relation_count);
    const auto F = static_cast<std::size_t>(cfg.feature_dim);
    Engine rng = make_engine(cfg.seed, {kDocumentStream, static_cast<std::uint64_t>(split),
                                        static_cast<std::uint64_t>(doc)});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::discrete_distribution<int> zipf(zipf_weights.begin(), zipf_weights.end());

    // Stratified positive count: floor(rho * P) plus one with the fractional probability.
    const double expected = cfg.positive_rate * cfg.pairs_per_document;
    auto n_positive = static_cast<int>(std::floor(expected));
    if (unit(rng) < expected - std::floor(expected)) ++n_positive;
    n_positive = std::min(n_positive, cfg.pairs_per_document);
    std::vector<std::uint8_t> is_positive_pair(static_cast<std::size_t>(cfg.pairs_per_document), 0);
    std::fill_n(is_positive_pair.begin(), n_positive, 1);
    std::shuffle(is_positive_pair.begin(), is_positive_pair.end(), rng);

    const std::string doc_id = fmt::format("{}-d{:05d}", to_string(split), doc);
    std::vector<PairExample> out;
    out.reserve(static_cast<std::size_t>(cfg.pairs_per_document));
    std::vector<double> scores(R);
    std::vector<double> noise(F);
    for (int p = 0; p < cfg.pairs_per_document; ++p) {
        std::vector<int> positives;
        if (is_positive_pair[static_cast<std::size_t>(p)] != 0) {
            const int first = zipf(rng) + 1;
            positives.push_back(first);
            if (R > 1 && unit(rng) < cfg.extra_label_rate) {
                int second = first;
                for (int tries = 0; tries < 1000 && second == first; ++tries) second = zipf(rng) + 1;
                if (second != first) positives.push_back(second);
            }
        }
        const Difficulty difficulty = unit(rng) < cfg.hard_fraction ? Difficulty::hard : Difficulty::easy;
        auto labels = LabelSet::from_positives(std::move(positives), cfg.relation_count);

        for (std::size_t r = 0; r < R; ++r) {
            scores[r] = draw_score(rng, labels.is_positive(static_cast<int>(r) + 1), difficulty, cfg.teacher_margin);
        }
        // noise projected onto the orthogonal complement of the teacher rows
        for (auto& z : noise) z = normal(rng);
        for (std::size_t r = 0; r < R; ++r) {
            const double* row = teacher.data() + r * F;
            double proj = 0.0;
            for (std::size_t j = 0; j < F; ++j) proj += noise[j] * row[j];
            for (std::size_t j = 0; j < F; ++j) noise[j] -= proj * row[j];
        }
        std::vector<double> x(F);
        for (std::size_t j = 0; j < F; ++j) x[j] = cfg.noise_scale * noise[j];
        for (std::size_t r = 0; r < R; ++r) {
            const double* row = teacher.data() + r * F;
            for (std::size_t j = 0; j < F; ++j) x[j] += scores[r] * row[j];
        }

        std::vector<int> seen;
        for (int r : labels.positives()) {
            if (unit(rng) < cfg.seen_in_train_rate) seen.push_back(r);
        }

        PairExample ex;
        ex.pair_id = fmt::format("{}-p{:04d}", doc_id, p);
        ex.doc_id = doc_id;
        ex.features = std::move(x);
        ex.true_labels = labels;
        ex.labels = std::move(labels);
        ex.seen_in_train = std::move(seen);
        ex.difficulty = difficulty;
        out.push_back(std::move(ex));
    }
    return out;
}

} // namespace

const char* to_string(Split s) noexcept {
    return s == Split::dev ? "dev" : "train";
}

void GenConfig::validate() const {
    auto require = [](bool ok, const char* field, const std::string& what) {
        if (!ok) throw ConfigError(fmt::format("gen.{}: {}", field, what));
    };
    require(n_documents >= 1, "n_documents", "must be >= 1");
    require(dev_documents >= 0, "dev_documents", "must be >= 0");
    require(pairs_per_document >= 1, "pairs_per_document", "must be >= 1");
    require(relation_count >= 1, "relation_count", "must be >= 1");
    require(feature_dim >= 1, "feature_dim", "must be >= 1");
    require(positive_rate > 0.0 && positive_rate < 1.0, "positive_rate", "must lie in (0, 1)");
    require(zipf_exponent > 0.0 && std::isfinite(zipf_exponent), "zipf_exponent", "must be > 0");
    require(hard_fraction >= 0.0 && hard_fraction <= 1.0, "hard_fraction", "must lie in [0, 1]");
    require(teacher_margin > 0.0 && std::isfinite(teacher_margin), "teacher_margin", "must be > 0");
    require(false_negative_rate >= 0.0 && false_negative_rate < 1.0, "false_negative_rate", "must lie in [0, 1)");
    require(seen_in_train_rate >= 0.0 && seen_in_train_rate <= 1.0, "seen_in_train_rate", "must lie in [0, 1]");
    require(extra_label_rate >= 0.0 && extra_label_rate <= 1.0, "extra_label_rate", "must lie in [0, 1]");
    require(noise_scale >= 0.0 && std::isfinite(noise_scale), "noise_scale", "must be >= 0");
}

Json GenConfig::to_json() const {
    Json j;
    j["preset"] = preset;
    j["n_documents"] = n_documents;
    j["dev_documents"] = dev_documents;
    j["pairs_per_document"] = pairs_per_document;
    j["relation_count"] = relation_count;
    j["feature_dim"] = feature_dim;
    j["positive_rate"] = positive_rate;
    j["zipf_exponent"] = zipf_exponent;
    j["hard_fraction"] = hard_fraction;
    j["teacher_margin"] = teacher_margin;
    j["false_negative_rate"] = false_negative_rate;
    j["seen_in_train_rate"] = seen_in_train_rate;
    j["extra_label_rate"] = extra_label_rate;
    j["noise_scale"] = noise_scale;
    j["seed"] = seed;
    return j;
}

GenConfig GenConfig::from_json(const Json& j) {
    if (!j.is_object()) {
        throw ConfigError("gen: expected a JSON object");
    }
    GenConfig cfg;
    if (j.contains("preset") && j.at("preset").is_string() && !j.at("preset").get<std::string>().empty()) {
        cfg = cmm::preset(j.at("preset").get<std::string>());
    }
    read_field(j, "n_documents", cfg.n_documents);
    read_field(j, "dev_documents", cfg.dev_documents);
    read_field(j, "pairs_per_document", cfg.pairs_per_document);
    read_field(j, "relation_count", cfg.relation_count);
    read_field(j, "feature_dim", cfg.feature_dim);
    read_field(j, "positive_rate", cfg.positive_rate);
    read_field(j, "zipf_exponent", cfg.zipf_exponent);
    read_field(j, "hard_fraction", cfg.hard_fraction);
    read_field(j, "teacher_margin", cfg.teacher_margin);
    read_field(j, "false_negative_rate", cfg.false_negative_rate);
    read_field(j, "seen_in_train_rate", cfg.seen_in_train_rate);
    read_field(j, "extra_label_rate", cfg.extra_label_rate);
    read_field(j, "noise_scale", cfg.noise_scale);
    read_field(j, "seed", cfg.seed);
    for (const auto& [key, _] : j.items()) {
        static const char* known[] = {"preset", "n_documents", "dev_documents", "pairs_per_document",
                                      "relation_count", "feature_dim", "positive_rate", "zipf_exponent",
                                      "hard_fraction", "teacher_margin", "false_negative_rate",
                                      "seen_in_train_rate", "extra_label_rate", "noise_scale", "seed"};
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
            std::end(known)) {
            throw ConfigError(fmt::format("gen.{}: unknown field", key));
        }
    }
    cfg.validate();
    return cfg;
}

GenConfig preset(const std::string& name) {
    GenConfig cfg;
    cfg.preset = name;
    if (name == "docred-mixed") {
        cfg.positive_rate = 0.0318;
        cfg.false_negative_rate = 0.3;
    } else if (name == "re-docred") {
        cfg.positive_rate = 0.0709;
        cfg.false_negative_rate = 0.0;
    } else {
        throw ConfigError(fmt::format("gen.preset: unknown preset '{}' (expected docred-mixed or re-docred)", name));
    }
    return cfg;
}

std::vector<double> teacher_weights(const GenConfig& cfg) {
    cfg.validate();
    if (cfg.feature_dim < cfg.relation_count) {
        throw GenerationError(fmt::format(
            "feature_dim ({}) must be >= relation_count ({}) for the teacher to have orthonormal rows",
            cfg.feature_dim, cfg.relation_count));
    }
    return draw_teacher(cfg.relation_count, cfg.feature_dim, cfg.seed);
}

Dataset generate(const GenConfig& cfg, Split split) {
    const std::vector<double> teacher = teacher_weights(cfg);
    std::vector<double> zipf_weights(static_cast<std::size_t>(cfg.relation_count));
    for (std::size_t k = 0; k < zipf_weights.size(); ++k) {
        zipf_weights[k] = std::pow(static_cast<double>(k + 1), -cfg.zipf_exponent);
    }

    const int docs = split == Split::train ? cfg.n_documents : cfg.dev_documents;
    std::vector<std::vector<PairExample>> per_doc(static_cast<std::size_t>(docs));
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
    for (int d = 0; d < docs; ++d) {
        try {
            per_doc[static_cast<std::size_t>(d)] = generate_document(cfg, split, d, teacher, zipf_weights);
        } catch (...) {
#pragma omp critical(cmm_generate_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);

    Dataset ds;
    ds.schema = RelationSchema::with_default_names(cfg.relation_count);
    ds.examples.reserve(static_cast<std::size_t>(docs) * static_cast<std::size_t>(cfg.pairs_per_document));
    for (auto& doc : per_doc) {
        std::move(doc.begin(), doc.end(), std::back_inserter(ds.examples));
    }
    ds.regroup_documents();
    ds.manifest["generator"] = kGeneratorFormat;
    ds.manifest["split"] = to_string(split);
    ds.manifest["config"] = cfg.to_json();
    return ds;
}

GeneratedSplits generate_splits(const GenConfig& cfg) {
    GeneratedSplits out{generate(cfg, Split::train), generate(cfg, Split::dev)};
    if (cfg.false_negative_rate > 0.0) {
        out.train = inject_false_negatives(out.train, cfg.false_negative_rate, cfg.seed);
    }
    return out;
}

Dataset inject_false_negatives(const Dataset& dataset, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ConfigError(fmt::format("false_negative_rate: must lie in [0, 1), got {}", rate));
    }
    for (const auto& ex : dataset.examples) {
        if (ex.corrupted || !(ex.labels == ex.true_labels)) {
            throw GenerationError(fmt::format("pair {}: false negatives can only be injected into an uncorrupted "
                                              "dataset",
                                              ex.pair_id));
        }
    }
    Dataset out = dataset;
    Engine rng = make_engine(seed, {kInjectStream});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int R = out.schema.relation_count();
    for (auto& ex : out.examples) {
        std::vector<int> kept;
        for (int r : ex.labels.positives()) {
            if (unit(rng) >= rate) kept.push_back(r);
        }
        if (kept.size() != ex.labels.positives().size()) {
            ex.labels = LabelSet::from_positives(std::move(kept), R);
            ex.corrupted = true;
        }
    }
    Json injection;
    injection["rate"] = rate;
    injection["seed"] = seed;
    out.manifest["false_negative_injection"] = injection;
    return out;
}

Dataset regenerate(const Json& manifest) {
    if (manifest.value("generator", "") != kGeneratorFormat) {
        throw ConfigError("manifest: not produced by the synthetic generator");
    }
    const GenConfig cfg = GenConfig::from_json(manifest.at("config"));
    const Split split = manifest.value("split", "train") == "dev" ? Split::dev : Split::train;
    Dataset ds = generate(cfg, split);
    if (manifest.contains("false_negative_injection")) {
        const auto& inj = manifest.at("false_negative_injection");
        ds = inject_false_negatives(ds, inj.at("rate").get<double>(), inj.at("seed").get<std::uint64_t>());
    }
    return ds;
}

Json DistributionReport::to_json() const {
    Json j;
    j["format"] = "cmm-distribution/1";
    j["pairs"] = pairs;
    j["positive_pairs"] = positive_pairs;
    j["positive_fraction"] = positive_fraction;
    j["true_positive_pairs"] = true_positive_pairs;
    j["true_positive_fraction"] = true_positive_fraction;
    j["positive_facts"] = positive_facts;
    j["head_share"] = head_share;
    j["tail_share"] = tail_share;
    j["easy"] = easy;
    j["hard"] = hard;
    j["corrupted_pairs"] = corrupted_pairs;
    j["demoted_facts"] = demoted_facts;
    j["relation_shares"] = Json::array();
    for (const auto& s : shares) {
        Json sj;
        sj["relation"] = s.relation;
        sj["count"] = s.count;
        sj["share"] = s.share;
        j["relation_shares"].push_back(std::move(sj));
    }
    return j;
}

DistributionReport distribution_report(const Dataset& dataset) {
    DistributionReport rep;
    const int R = dataset.schema.relation_count();
    std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(R, 0)) + 1, 0);
    for (const auto& ex : dataset.examples) {
        ++rep.pairs;
        if (!ex.labels.positives().empty()) ++rep.positive_pairs;
        if (!ex.true_labels.positives().empty()) ++rep.true_positive_pairs;
        for (int r : ex.labels.positives()) {
            if (r >= 1 && r <= R) ++counts[static_cast<std::size_t>(r)];
            ++rep.positive_facts;
        }
        (ex.difficulty == Difficulty::hard ? rep.hard : rep.easy) += 1;
        if (ex.corrupted) ++rep.corrupted_pairs;
        if (ex.true_labels.positives().size() > ex.labels.positives().size()) {
            rep.demoted_facts += ex.true_labels.positives().size() - ex.labels.positives().size();
        }
    }
    if (rep.pairs > 0) {
        rep.positive_fraction = static_cast<double>(rep.positive_pairs) / static_cast<double>(rep.pairs);
        rep.true_positive_fraction = static_cast<double>(rep.true_positive_pairs) / static_cast<double>(rep.pairs);
    }
    for (int r = 1; r <= R; ++r) {
        const std::size_t c = counts[static_cast<std::size_t>(r)];
        const double share =
            rep.positive_facts == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(rep.positive_facts);
        rep.shares.push_back({r, c, share});
    }
    std::stable_sort(rep.shares.begin(), rep.shares.end(),
                     [](const RelationShare& a, const RelationShare& b) { return a.count > b.count; });
    if (!rep.shares.empty()) {
        rep.head_share = rep.shares.front().share;
        rep.tail_share = rep.shares.back().share;
    }
    return rep;
}

} // namespace cmm
