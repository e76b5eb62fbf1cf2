#pragma once

#include <filesystem>
#include <iosfwd>

#include "cmm/schema.hpp"

namespace cmm {

inline constexpr const char* kDatasetFormat = "cmm-dataset/1";

// JSONL layout: one header object {format, schema, manifest} followed by one
// line per PairExample with keys in the fixed order
// pair_id, doc_id, features, positives, true_positives, seen_in_train,
// difficulty, corrupted.
void write_dataset(const Dataset& dataset, std::ostream& out);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

// Throws SchemaError on malformed input.
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);

Json example_to_json(const PairExample& example);

} // namespace cmm
