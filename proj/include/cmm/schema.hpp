#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace cmm {

using Json = nlohmann::ordered_json;

// Relation vocabulary. Relations are indexed 1..relation_count; index 0 is
// reserved for the threshold (TH) class and never names a relation.
class RelationSchema {
public:
    static constexpr int th_index = 0;

    RelationSchema() = default;
    explicit RelationSchema(std::vector<std::string> relation_names);

    // Names "R01", "R02", ... for a schema of the given size.
    static RelationSchema with_default_names(int relation_count);

    int relation_count() const noexcept { return static_cast<int>(names_.size()); }
    std::size_t row_length() const noexcept { return names_.size() + 1; }
    const std::vector<std::string>& relation_names() const noexcept { return names_; }
    const std::string& name(int relation) const { return names_.at(static_cast<std::size_t>(relation - 1)); }

    friend bool operator==(const RelationSchema&, const RelationSchema&) = default;

private:
    std::vector<std::string> names_;
};

// Positive/negative relation split of one entity pair. The normal way to build
// one is from_positives(), which derives negatives as the complement. The raw
// constructor stores both lists verbatim so malformed input can be represented
// and reported by validate_dataset().
class LabelSet {
public:
    LabelSet() = default;
    LabelSet(std::vector<int> positives, std::vector<int> negatives);

    static LabelSet from_positives(std::vector<int> positives, int relation_count);
    static LabelSet all_negative(int relation_count) { return from_positives({}, relation_count); }

    const std::vector<int>& positives() const noexcept { return positives_; }
    const std::vector<int>& negatives() const noexcept { return negatives_; }
    bool is_positive(int relation) const noexcept;
    std::size_t size() const noexcept { return positives_.size() + negatives_.size(); }

    friend bool operator==(const LabelSet&, const LabelSet&) = default;

private:
    std::vector<int> positives_;  // sorted ascending
    std::vector<int> negatives_;  // sorted ascending
};

// One (|R|+1)-length logit vector; entry 0 is the TH logit.
class LogitRow {
public:
    LogitRow() = default;
    explicit LogitRow(std::vector<double> values) : values_(std::move(values)) {}

    double th() const { return values_.at(0); }
    double relation(int r) const { return values_.at(static_cast<std::size_t>(r)); }
    int relation_count() const noexcept { return static_cast<int>(values_.size()) - 1; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    std::span<const double> values() const noexcept { return values_; }
    std::vector<double>& mutable_values() noexcept { return values_; }

    bool all_finite() const noexcept;

private:
    std::vector<double> values_;
};

// Throws SchemaError when the row length is not |R|+1.
void check_row_length(std::size_t row_length, int relation_count);

enum class Difficulty : std::uint8_t { easy, hard };

const char* to_string(Difficulty d) noexcept;
Difficulty difficulty_from_string(const std::string& s);

struct PairExample {
    std::string pair_id;
    std::string doc_id;
    std::vector<double> features;
    LabelSet labels;        // training labels, possibly corrupted
    LabelSet true_labels;   // generator ground truth
    std::vector<int> seen_in_train;  // relations whose (pair, relation) fact is excluded by Ign-F1
    Difficulty difficulty = Difficulty::easy;
    bool corrupted = false;

    bool is_seen_in_train(int relation) const noexcept;
};

struct DocumentGroup {
    std::string doc_id;
    std::vector<std::size_t> members;  // indices into Dataset::examples
};

struct Dataset {
    RelationSchema schema;
    std::vector<PairExample> examples;
    std::vector<DocumentGroup> documents;
    Json manifest = Json::object();

    std::size_t feature_dim() const noexcept { return examples.empty() ? 0 : examples.front().features.size(); }

    // Rebuilds `documents` from the examples' doc_id, in order of first appearance.
    void regroup_documents();
};

struct ValidationIssue {
    std::string pair_id;  // empty for dataset-level issues
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool passed() const noexcept { return issues.empty(); }
};

// Checks every dataset invariant and reports each violation; never throws.
ValidationReport validate_dataset(const Dataset& dataset);

} // namespace cmm
