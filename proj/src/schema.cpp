#include "cmm/schema.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "cmm/error.hpp"

namespace cmm {

RelationSchema::RelationSchema(std::vector<std::string> relation_names) : names_(std::move(relation_names)) {
    if (names_.empty()) {
        throw SchemaError("relation schema needs at least one relation");
    }
    std::unordered_set<std::string> seen;
    for (const auto& n : names_) {
        if (!seen.insert(n).second) {
            throw SchemaError(fmt::format("duplicate relation name '{}'", n));
        }
    }
}

RelationSchema RelationSchema::with_default_names(int relation_count) {
    if (relation_count < 1) {
        throw SchemaError("relation_count must be >= 1");
    }
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(relation_count));
    for (int r = 1; r <= relation_count; ++r) {
        names.push_back(fmt::format("R{:02d}", r));
    }
    return RelationSchema(std::move(names));
}

LabelSet::LabelSet(std::vector<int> positives, std::vector<int> negatives)
    : positives_(std::move(positives)), negatives_(std::move(negatives)) {
    std::sort(positives_.begin(), positives_.end());
    std::sort(negatives_.begin(), negatives_.end());
}

LabelSet LabelSet::from_positives(std::vector<int> positives, int relation_count) {
    std::sort(positives.begin(), positives.end());
    positives.erase(std::unique(positives.begin(), positives.end()), positives.end());
    for (int r : positives) {
        if (r < 1 || r > relation_count) {
            throw SchemaError(fmt::format("relation index {} outside [1, {}]", r, relation_count));
        }
    }
    std::vector<int> negatives;
    negatives.reserve(static_cast<std::size_t>(relation_count) - positives.size());
    auto it = positives.begin();
    for (int r = 1; r <= relation_count; ++r) {
        if (it != positives.end() && *it == r) {
            ++it;
        } else {
            negatives.push_back(r);
        }
    }
    LabelSet out;
    out.positives_ = std::move(positives);
    out.negatives_ = std::move(negatives);
    return out;
}

bool LabelSet::is_positive(int relation) const noexcept {
    return std::binary_search(positives_.begin(), positives_.end(), relation);
}

bool LogitRow::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void check_row_length(std::size_t row_length, int relation_count) {
    if (row_length != static_cast<std::size_t>(relation_count) + 1) {
        throw SchemaError(fmt::format("logit row has length {}, expected {} (|R|+1)", row_length, relation_count + 1));
    }
}

const char* to_string(Difficulty d) noexcept {
    return d == Difficulty::hard ? "hard" : "easy";
}

Difficulty difficulty_from_string(const std::string& s) {
    if (s == "easy") return Difficulty::easy;
    if (s == "hard") return Difficulty::hard;
    throw SchemaError(fmt::format("unknown difficulty '{}'", s));
}

bool PairExample::is_seen_in_train(int relation) const noexcept {
    return std::find(seen_in_train.begin(), seen_in_train.end(), relation) != seen_in_train.end();
}

void Dataset::regroup_documents() {
    documents.clear();
    std::unordered_map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& doc = examples[i].doc_id;
        auto [it, inserted] = slot.try_emplace(doc, documents.size());
        if (inserted) {
            documents.push_back(DocumentGroup{doc, {}});
        }
        documents[it->second].members.push_back(i);
    }
}

namespace {

void check_label_set(const LabelSet& labels, int relation_count, const std::string& pair_id, const char* which,
                     std::vector<ValidationIssue>& issues) {
    std::set<int> pos;
    std::set<int> neg;
    for (int r : labels.positives()) {
        if (r < 1 || r > relation_count) {
            issues.push_back({pair_id, fmt::format("{}: positive relation {} outside [1, {}]", which, r, relation_count)});
        }
        if (!pos.insert(r).second) {
            issues.push_back({pair_id, fmt::format("{}: duplicate positive relation {}", which, r)});
        }
    }
    for (int r : labels.negatives()) {
        if (r < 1 || r > relation_count) {
            issues.push_back({pair_id, fmt::format("{}: negative relation {} outside [1, {}]", which, r, relation_count)});
        }
        if (!neg.insert(r).second) {
            issues.push_back({pair_id, fmt::format("{}: duplicate negative relation {}", which, r)});
        }
    }
    for (int r : pos) {
        if (neg.count(r) != 0) {
            issues.push_back({pair_id, fmt::format("{}: relation {} is both positive and negative", which, r)});
        }
    }
    if (labels.size() != static_cast<std::size_t>(relation_count)) {
        issues.push_back({pair_id, fmt::format("{}: |positives| + |negatives| = {}, expected {}", which, labels.size(),
                                               relation_count)});
    }
}

} // namespace

ValidationReport validate_dataset(const Dataset& dataset) {
    ValidationReport report;
    auto& issues = report.issues;
    const int R = dataset.schema.relation_count();
    if (R < 1) {
        issues.push_back({"", "schema has no relations"});
        return report;
    }

    const std::size_t F = dataset.feature_dim();
    std::unordered_set<std::string> ids;
    for (const auto& ex : dataset.examples) {
        if (!ids.insert(ex.pair_id).second) {
            issues.push_back({ex.pair_id, "duplicate pair_id"});
        }
        if (ex.features.size() != F) {
            issues.push_back({ex.pair_id, fmt::format("feature dimension {} differs from dataset dimension {}",
                                                      ex.features.size(), F)});
        }
        if (!std::all_of(ex.features.begin(), ex.features.end(), [](double v) { return std::isfinite(v); })) {
            issues.push_back({ex.pair_id, "non-finite feature value"});
        }
        check_label_set(ex.labels, R, ex.pair_id, "labels", issues);
        check_label_set(ex.true_labels, R, ex.pair_id, "true_labels", issues);
        for (int r : ex.seen_in_train) {
            if (r < 1 || r > R) {
                issues.push_back({ex.pair_id, fmt::format("seen_in_train relation {} outside [1, {}]", r, R)});
            }
        }

        const auto& shown = ex.labels.positives();
        const auto& truth = ex.true_labels.positives();
        const bool subset = std::includes(truth.begin(), truth.end(), shown.begin(), shown.end());
        if (ex.corrupted && !(subset && truth.size() > shown.size())) {
            issues.push_back({ex.pair_id, "corrupted=true but true_labels.positives is not a strict superset of "
                                          "labels.positives"});
        }
        if (!ex.corrupted && shown != truth) {
            issues.push_back({ex.pair_id, "corrupted=false but labels differ from true_labels"});
        }
    }

    // Document groups must partition the examples.
    std::vector<int> owner_count(dataset.examples.size(), 0);
    for (const auto& doc : dataset.documents) {
        for (std::size_t i : doc.members) {
            if (i >= dataset.examples.size()) {
                issues.push_back({"", fmt::format("document '{}' references example index {} out of range",
                                                  doc.doc_id, i)});
                continue;
            }
            ++owner_count[i];
            if (dataset.examples[i].doc_id != doc.doc_id) {
                issues.push_back({dataset.examples[i].pair_id,
                                  fmt::format("listed in document '{}' but doc_id is '{}'", doc.doc_id,
                                              dataset.examples[i].doc_id)});
            }
        }
    }
    for (std::size_t i = 0; i < owner_count.size(); ++i) {
        if (owner_count[i] != 1) {
            issues.push_back({dataset.examples[i].pair_id,
                              fmt::format("belongs to {} document groups, expected exactly 1", owner_count[i])});
        }
    }
    return report;
}

} // namespace cmm
