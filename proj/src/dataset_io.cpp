#include "cmm/dataset_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "cmm/error.hpp"

namespace cmm {

Json example_to_json(const PairExample& ex) {
    Json j;
    j["pair_id"] = ex.pair_id;
    j["doc_id"] = ex.doc_id;
    j["features"] = ex.features;
    j["positives"] = ex.labels.positives();
    j["true_positives"] = ex.true_labels.positives();
    j["seen_in_train"] = ex.seen_in_train;
    j["difficulty"] = to_string(ex.difficulty);
    j["corrupted"] = ex.corrupted;
    return j;
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
    Json header;
    header["format"] = kDatasetFormat;
    header["schema"]["relation_count"] = dataset.schema.relation_count();
    header["schema"]["relation_names"] = dataset.schema.relation_names();
    header["manifest"] = dataset.manifest;
    out << header.dump() << '\n';
    for (const auto& ex : dataset.examples) {
        out << example_to_json(ex).dump() << '\n';
    }
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(fmt::format("cannot open '{}' for writing", path.string()));
    }
    write_dataset(dataset, out);
}

namespace {

std::vector<int> int_array(const Json& j, const char* key, std::size_t line_no) {
    if (!j.contains(key) || !j.at(key).is_array()) {
        throw SchemaError(fmt::format("line {}: missing array '{}'", line_no, key));
    }
    return j.at(key).get<std::vector<int>>();
}

} // namespace

Dataset read_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw SchemaError("dataset is empty (missing header line)");
    }
    Dataset ds;
    try {
        const Json header = Json::parse(line);
        if (header.value("format", "") != kDatasetFormat) {
            throw SchemaError(fmt::format("unsupported dataset format '{}'", header.value("format", "")));
        }
        const auto& schema = header.at("schema");
        ds.schema = RelationSchema(schema.at("relation_names").get<std::vector<std::string>>());
        if (schema.at("relation_count").get<int>() != ds.schema.relation_count()) {
            throw SchemaError("header relation_count disagrees with relation_names");
        }
        ds.manifest = header.value("manifest", Json::object());
    } catch (const Json::exception& e) {
        throw SchemaError(fmt::format("malformed dataset header: {}", e.what()));
    }

    const int R = ds.schema.relation_count();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            const Json j = Json::parse(line);
            PairExample ex;
            ex.pair_id = j.at("pair_id").get<std::string>();
            ex.doc_id = j.at("doc_id").get<std::string>();
            ex.features = j.at("features").get<std::vector<double>>();
            ex.labels = LabelSet::from_positives(int_array(j, "positives", line_no), R);
            ex.true_labels = LabelSet::from_positives(int_array(j, "true_positives", line_no), R);
            ex.seen_in_train = int_array(j, "seen_in_train", line_no);
            ex.difficulty = difficulty_from_string(j.at("difficulty").get<std::string>());
            ex.corrupted = j.at("corrupted").get<bool>();
            ds.examples.push_back(std::move(ex));
        } catch (const Json::exception& e) {
            throw SchemaError(fmt::format("line {}: {}", line_no, e.what()));
        }
    }
    ds.regroup_documents();
    return ds;
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(fmt::format("cannot open dataset '{}'", path.string()));
    }
    return read_dataset(in);
}

} // namespace cmm
