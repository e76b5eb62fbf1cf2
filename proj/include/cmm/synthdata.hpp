#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmm/schema.hpp"

namespace cmm {

// Zipf exponent over relation rank chosen so that, at |R| = 20, the most
// frequent relation holds > 23% and the least frequent < 0.5% of positive facts.
inline constexpr double kDefaultZipfExponent = 1.7;

enum class Split { train, dev };

const char* to_string(Split s) noexcept;

struct GenConfig {
    std::string preset;  // informational; empty for custom configs
    int n_documents = 300;
    int dev_documents = 100;
    int pairs_per_document = 150;
    int relation_count = 20;
    int feature_dim = 64;
    double positive_rate = 0.0318;
    double zipf_exponent = kDefaultZipfExponent;
    double hard_fraction = 0.2;
    double teacher_margin = 1.0;
    double false_negative_rate = 0.0;  // applied to the train split only
    double seen_in_train_rate = 0.3;
    double extra_label_rate = 0.1;     // chance a positive pair carries a second relation
    double noise_scale = 1.0;          // std-dev of feature noise orthogonal to the teacher
    std::uint64_t seed = 1;

    // Throws ConfigError naming the first invalid field.
    void validate() const;
    Json to_json() const;
    // Fields absent from `j` keep the values of `base`; a "preset" key selects
    // the base first.
    static GenConfig from_json(const Json& j);
};

// "docred-mixed" (positive rate 0.0318, 30% false negatives) or
// "re-docred" (positive rate 0.0709, clean). Throws ConfigError otherwise.
GenConfig preset(const std::string& name);

// Draws a hidden teacher with orthonormal rows (|R| x F) and, per pair, a
// label set (positive pairs at `positive_rate`, relations Zipf-distributed)
// together with teacher scores consistent with those labels: easy pairs have
// every |score| >= teacher_margin, hard pairs every |score| < teacher_margin/2.
// Features are teacherᵀ * scores plus noise orthogonal to the teacher rows, so
// the teacher score of every feature vector is exactly its score vector.
// Both splits share the teacher. labels == true_labels in the output.
Dataset generate(const GenConfig& cfg, Split split = Split::train);

// The hidden teacher of `cfg` (|R| x F, row-major, orthonormal rows).
std::vector<double> teacher_weights(const GenConfig& cfg);

struct GeneratedSplits {
    Dataset train;  // with false negatives injected at cfg.false_negative_rate
    Dataset dev;    // clean
};

GeneratedSplits generate_splits(const GenConfig& cfg);

// Independently demotes each positive (pair, relation) fact with probability
// `rate`; true_labels are untouched and affected pairs get corrupted = true.
Dataset inject_false_negatives(const Dataset& dataset, double rate, std::uint64_t seed);

// Rebuilds a dataset from its manifest (generation config, split and any
// false-negative injection).
Dataset regenerate(const Json& manifest);

struct RelationShare {
    int relation = 0;
    std::size_t count = 0;
    double share = 0.0;

    friend bool operator==(const RelationShare&, const RelationShare&) = default;
};

struct DistributionReport {
    std::size_t pairs = 0;
    std::size_t positive_pairs = 0;       // pairs with >= 1 positive training label
    std::size_t true_positive_pairs = 0;  // same on true_labels
    double positive_fraction = 0.0;
    double true_positive_fraction = 0.0;
    std::size_t positive_facts = 0;
    std::vector<RelationShare> shares;  // descending share, ties by relation index
    double head_share = 0.0;
    double tail_share = 0.0;
    std::size_t easy = 0;
    std::size_t hard = 0;
    std::size_t corrupted_pairs = 0;
    std::size_t demoted_facts = 0;

    Json to_json() const;
    friend bool operator==(const DistributionReport&, const DistributionReport&) = default;
};

DistributionReport distribution_report(const Dataset& dataset);

} // namespace cmm
