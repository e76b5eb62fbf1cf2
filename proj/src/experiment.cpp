#include "cmm/experiment.hpp"

#include <algorithm>
#include <exception>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "cmm/error.hpp"

namespace cmm {

namespace {

template <typename T>
void read_field(const Json& j, const char* section, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(fmt::format("{}.{}: {}", section, key, e.what()));
    }
}

void reject_unknown(const Json& j, const char* section, std::initializer_list<const char*> known) {
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
            throw ConfigError(fmt::format("{}.{}: unknown field", section, key));
        }
    }
}

} // namespace

Json loss_config_to_json(const LossConfig& cfg) {
    Json j;
    j["kind"] = to_string(cfg.kind);
    j["gamma"] = cfg.gamma;
    j["m"] = cfg.m;
    j["aggregation"] = to_string(cfg.aggregation);
    return j;
}

LossConfig loss_config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("loss: expected a JSON object");
    reject_unknown(j, "loss", {"kind", "gamma", "m", "aggregation"});
    LossConfig cfg;
    std::string kind = to_string(cfg.kind);
    std::string aggregation = to_string(cfg.aggregation);
    read_field(j, "loss", "kind", kind);
    read_field(j, "loss", "gamma", cfg.gamma);
    read_field(j, "loss", "m", cfg.m);
    read_field(j, "loss", "aggregation", aggregation);
    cfg.kind = loss_kind_from_string(kind);
    if (cfg.kind == LossKind::plugin) {
        throw ConfigError("loss.kind: plugin losses are attached programmatically, not from config files");
    }
    cfg.aggregation = aggregation_from_string(aggregation);
    cfg.validate();
    return cfg;
}

Json train_config_to_json(const TrainConfig& cfg) {
    Json j;
    j["learning_rate"] = cfg.optimizer.learning_rate;
    j["beta1"] = cfg.optimizer.beta1;
    j["beta2"] = cfg.optimizer.beta2;
    j["epsilon"] = cfg.optimizer.epsilon;
    j["weight_decay"] = cfg.optimizer.weight_decay;
    j["epochs"] = cfg.epochs;
    j["seed"] = cfg.seed;
    j["eval_every"] = cfg.eval_every;
    j["architecture"] = to_string(cfg.architecture);
    j["hidden_dim"] = cfg.hidden_dim;
    j["accumulate_documents"] = cfg.accumulate_documents;
    j["gold"] = to_string(cfg.gold);
    j["parallel"] = cfg.execution == kernels::Execution::parallel;
    j["loss"] = loss_config_to_json(cfg.loss);
    return j;
}

TrainConfig train_config_from_json(const Json& j, const LossConfig& loss) {
    if (!j.is_object()) throw ConfigError("train: expected a JSON object");
    reject_unknown(j, "train", {"learning_rate", "beta1", "beta2", "epsilon", "weight_decay", "epochs", "seed",
                                "eval_every", "architecture", "hidden_dim", "accumulate_documents", "gold",
                                "parallel", "loss"});
    TrainConfig cfg;
    cfg.loss = j.contains("loss") ? loss_config_from_json(j.at("loss")) : loss;
    read_field(j, "train", "learning_rate", cfg.optimizer.learning_rate);
    read_field(j, "train", "beta1", cfg.optimizer.beta1);
    read_field(j, "train", "beta2", cfg.optimizer.beta2);
    read_field(j, "train", "epsilon", cfg.optimizer.epsilon);
    read_field(j, "train", "weight_decay", cfg.optimizer.weight_decay);
    read_field(j, "train", "epochs", cfg.epochs);
    read_field(j, "train", "seed", cfg.seed);
    read_field(j, "train", "eval_every", cfg.eval_every);
    std::string arch = to_string(cfg.architecture);
    read_field(j, "train", "architecture", arch);
    cfg.architecture = architecture_from_string(arch);
    read_field(j, "train", "hidden_dim", cfg.hidden_dim);
    read_field(j, "train", "accumulate_documents", cfg.accumulate_documents);
    std::string gold = to_string(cfg.gold);
    read_field(j, "train", "gold", gold);
    cfg.gold = gold_source_from_string(gold);
    bool parallel = false;
    read_field(j, "train", "parallel", parallel);
    cfg.execution = parallel ? kernels::Execution::parallel : kernels::Execution::serial;
    cfg.validate();
    return cfg;
}

Json checkpoint_to_json(const TrainResult& result, const TrainConfig& cfg) {
    const auto& p = result.params;
    Json j;
    j["format"] = kCheckpointFormat;
    j["architecture"]["kind"] = to_string(p.architecture());
    j["architecture"]["input_dim"] = p.input_dim();
    j["architecture"]["hidden_dim"] = p.hidden_dim();
    j["architecture"]["output_dim"] = p.output_dim();
    j["architecture"]["hidden_activation"] = p.architecture() == Architecture::one_hidden ? "tanh" : "none";
    j["layout"] = Json::array();
    for (const auto& b : p.layout()) {
        Json bj;
        bj["name"] = b.name;
        bj["shape"] = {b.rows, b.cols};
        bj["offset"] = b.offset;
        bj["weight_decay"] = b.decayed;
        j["layout"].push_back(std::move(bj));
    }
    j["parameters"] = p.values();
    j["optimizer"]["name"] = "adamw";
    j["optimizer"]["step"] = result.optimizer.step;
    j["optimizer"]["first_moment"] = result.optimizer.first_moment;
    j["optimizer"]["second_moment"] = result.optimizer.second_moment;
    j["config"] = train_config_to_json(cfg);
    return j;
}

EncoderParams params_from_checkpoint(const Json& checkpoint) {
    try {
        if (checkpoint.value("format", "") != kCheckpointFormat) {
            throw SchemaError(fmt::format("checkpoint: unsupported format '{}'", checkpoint.value("format", "")));
        }
        const auto& a = checkpoint.at("architecture");
        EncoderParams p(architecture_from_string(a.at("kind").get<std::string>()),
                        a.at("input_dim").get<std::size_t>(), a.at("hidden_dim").get<std::size_t>(),
                        a.at("output_dim").get<std::size_t>());
        auto values = checkpoint.at("parameters").get<std::vector<double>>();
        if (values.size() != p.values().size()) {
            throw SchemaError(fmt::format("checkpoint: {} parameters, architecture needs {}", values.size(),
                                          p.values().size()));
        }
        p.values() = std::move(values);
        return p;
    } catch (const Json::exception& e) {
        throw SchemaError(fmt::format("checkpoint: {}", e.what()));
    }
}

void write_trace_csv(const TrainTrace& trace, std::ostream& out) {
    out << "epoch,mean_loss,f1,ign_f1,positives\n";
    for (const auto& r : trace.records) {
        out << fmt::format("{},{},{},{},{}\n", r.epoch, r.mean_loss, r.f1, r.ign_f1, r.positives);
    }
}

std::vector<std::pair<LossConfig, std::uint64_t>> compare_tuples(const CompareSpec& spec) {
    std::vector<std::pair<LossConfig, std::uint64_t>> tuples;
    for (double g : spec.gammas) {
        for (double m : spec.ms) {
            LossConfig loss{LossKind::cmm, g, m, spec.aggregation, nullptr};
            loss.validate();
            for (auto s : spec.seeds) tuples.emplace_back(loss, s);
        }
    }
    for (auto kind : spec.baselines) {
        if (kind == LossKind::cmm || kind == LossKind::plugin) {
            throw ConfigError(fmt::format("compare.baselines: '{}' is not a baseline kind", to_string(kind)));
        }
        LossConfig loss;
        loss.kind = kind;
        loss.aggregation = spec.aggregation;
        for (auto s : spec.seeds) tuples.emplace_back(loss, s);
    }
    return tuples;
}

const CompareSummaryRow& CompareResult::best_of(LossKind kind) const {
    const CompareSummaryRow* best = nullptr;
    for (const auto& s : summary) {
        if (s.loss.kind == kind && (best == nullptr || s.mean_f1 > best->mean_f1)) best = &s;
    }
    if (best == nullptr) throw Error(fmt::format("compare: no '{}' rows", to_string(kind)));
    return *best;
}

CompareResult run_compare(const Dataset& train_set, const Dataset& dev_set, const CompareSpec& spec,
                          bool parallel_tuples) {
    if (spec.seeds.empty()) throw ConfigError("compare.seeds: must be nonempty");
    const auto tuples = compare_tuples(spec);
    CompareResult result;
    result.rows.resize(tuples.size());

    auto run_one = [&](std::size_t i) {
        TrainConfig cfg = spec.base;
        cfg.loss = tuples[i].first;
        cfg.seed = tuples[i].second;
        cfg.execution = kernels::Execution::serial;
        auto trained = train(train_set, dev_set, cfg);
        auto& row = result.rows[i];
        row.loss = cfg.loss;
        row.seed = cfg.seed;
        row.trace = std::move(trained.trace);
        if (!row.trace.records.empty()) {
            row.f1 = row.trace.records.back().f1;
            row.ign_f1 = row.trace.records.back().ign_f1;
            row.positives = row.trace.records.back().positives;
        }
    };

    const auto n = static_cast<std::ptrdiff_t>(tuples.size());
    std::exception_ptr error;
    std::ptrdiff_t error_index = n;
#pragma omp parallel for schedule(dynamic) if (parallel_tuples)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            run_one(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(cmm_compare_error)
            if (i < error_index) {
                error_index = i;
                error = std::current_exception();
            }
        }
    }
    if (error) std::rethrow_exception(error);

    std::size_t best_row = 0;
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
        if (result.rows[i].f1 > result.rows[best_row].f1) best_row = i;
    }
    result.rows[best_row].best = true;

    // Seed averages, in first-appearance order of each loss configuration.
    for (const auto& row : result.rows) {
        auto it = std::find_if(result.summary.begin(), result.summary.end(), [&](const CompareSummaryRow& s) {
            return s.loss.kind == row.loss.kind && s.loss.gamma == row.loss.gamma && s.loss.m == row.loss.m;
        });
        if (it == result.summary.end()) {
            result.summary.push_back({row.loss, 0, 0.0, 0.0, false});
            it = std::prev(result.summary.end());
        }
        ++it->seeds;
        it->mean_f1 += row.f1;
        it->mean_ign_f1 += row.ign_f1;
    }
    std::size_t best_summary = 0;
    for (std::size_t i = 0; i < result.summary.size(); ++i) {
        auto& s = result.summary[i];
        s.mean_f1 /= static_cast<double>(s.seeds);
        s.mean_ign_f1 /= static_cast<double>(s.seeds);
        if (s.mean_f1 > result.summary[best_summary].mean_f1) best_summary = i;
    }
    result.summary[best_summary].best = true;
    return result;
}

namespace {

std::string gamma_m_columns(const LossConfig& loss) {
    if (loss.kind != LossKind::cmm) return ",";
    return fmt::format("{},{}", loss.gamma, loss.m);
}

} // namespace

void write_compare_csv(const CompareResult& result, std::ostream& out) {
    out << "kind,gamma,m,seed,f1,ign_f1,positives,best\n";
    for (const auto& r : result.rows) {
        out << fmt::format("{},{},{},{},{},{},{}\n", to_string(r.loss.kind), gamma_m_columns(r.loss), r.seed, r.f1,
                           r.ign_f1, r.positives, r.best ? 1 : 0);
    }
}

void write_compare_summary_csv(const CompareResult& result, std::ostream& out) {
    out << "kind,gamma,m,seeds,mean_f1,mean_ign_f1,best\n";
    for (const auto& s : result.summary) {
        out << fmt::format("{},{},{},{},{},{}\n", to_string(s.loss.kind), gamma_m_columns(s.loss), s.seeds,
                           s.mean_f1, s.mean_ign_f1, s.best ? 1 : 0);
    }
}

} // namespace cmm
