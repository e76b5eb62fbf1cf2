#pragma once

#include <string>
#include <vector>

#include <fmt/format.h>

#include "cmm/schema.hpp"

namespace fixtures {

// Well-formed dataset: `n` pairs spread over `docs` documents, relation i % R + 1
// positive on every third pair.
inline cmm::Dataset small_dataset(int n = 10, int relations = 3, int features = 4, int docs = 2) {
    cmm::Dataset ds;
    ds.schema = cmm::RelationSchema::with_default_names(relations);
    for (int i = 0; i < n; ++i) {
        cmm::PairExample ex;
        ex.pair_id = fmt::format("p{}", i);
        ex.doc_id = fmt::format("d{}", i % docs);
        for (int f = 0; f < features; ++f) ex.features.push_back(0.25 * (i + 1) - 0.5 * f);
        std::vector<int> pos;
        if (i % 3 == 0) pos.push_back(i % relations + 1);
        ex.labels = cmm::LabelSet::from_positives(pos, relations);
        ex.true_labels = ex.labels;
        ex.difficulty = i % 2 ? cmm::Difficulty::hard : cmm::Difficulty::easy;
        ds.examples.push_back(std::move(ex));
    }
    ds.regroup_documents();
    return ds;
}

} // namespace fixtures
