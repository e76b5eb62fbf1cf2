#include "cmm/commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "cmm/dataset_io.hpp"
#include "cmm/error.hpp"
#include "cmm/eval.hpp"
#include "cmm/experiment.hpp"
#include "cmm/gradcheck.hpp"
#include "cmm/synthdata.hpp"

namespace cmm {

namespace fs = std::filesystem;

namespace {

constexpr const char* kRunFormat = "cmm-run/1";

struct Invocation {
    std::string subcommand;
    fs::path config_path;
    fs::path out_dir;
    Json config;
};

Json load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
    }
    try {
        Json j = Json::parse(in);
        if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
        return j;
    } catch (const Json::parse_error& e) {
        throw ConfigError(fmt::format("config '{}': {}", path.string(), e.what()));
    }
}

// Relative paths inside a config resolve against the config file's directory.
fs::path resolve(const Invocation& inv, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : inv.config_path.parent_path() / path;
}

std::string required_string(const Json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) {
        throw ConfigError(fmt::format("{}: required string field is missing", key));
    }
    return j.at(key).get<std::string>();
}

const Json& section(const Json& j, const char* key) {
    static const Json empty = Json::object();
    if (!j.contains(key)) return empty;
    if (!j.at(key).is_object()) throw ConfigError(fmt::format("{}: expected a JSON object", key));
    return j.at(key);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
    out << text;
}

void write_json(const fs::path& path, const Json& j) {
    write_text(path, j.dump(2) + "\n");
}

class RunDirectory {
public:
    RunDirectory(const Invocation& inv, Json effective_config) : inv_(inv) {
        fs::create_directories(inv.out_dir);
        manifest_["format"] = kRunFormat;
        manifest_["subcommand"] = inv.subcommand;
        manifest_["artifacts"] = Json::array();
        Json echo;
        echo["format"] = "cmm-config/1";
        echo["subcommand"] = inv.subcommand;
        echo["config"] = std::move(effective_config);
        write_json(inv.out_dir / "config.json", echo);
        add("config.json", "cmm-config/1");
    }

    fs::path path(const std::string& name) const { return inv_.out_dir / name; }

    void add(const std::string& name, const std::string& format) {
        Json a;
        a["file"] = name;
        a["format"] = format;
        manifest_["artifacts"].push_back(std::move(a));
    }

    void finish() const { write_json(inv_.out_dir / "manifest.json", manifest_); }

private:
    const Invocation& inv_;
    Json manifest_;
};

// "cmm(g=1,m=0.2)" -> "cmm_g1_m0.2"
std::string file_stem(const std::string& label) {
    std::string s;
    for (char ch : label) {
        if (ch == '(' || ch == ',') s += '_';
        else if (ch != ')' && ch != '=') s += ch;
    }
    return s;
}

std::string to_csv(const auto& writer) {
    std::ostringstream s;
    writer(s);
    return s.str();
}

int cmd_generate(const Invocation& inv, std::ostream& out) {
    const GenConfig cfg = GenConfig::from_json(section(inv.config, "gen"));
    Json effective;
    effective["gen"] = cfg.to_json();
    RunDirectory run(inv, effective);

    const auto splits = generate_splits(cfg);
    write_dataset(splits.train, run.path("train.jsonl"));
    run.add("train.jsonl", kDatasetFormat);
    write_dataset(splits.dev, run.path("dev.jsonl"));
    run.add("dev.jsonl", kDatasetFormat);
    const auto report = distribution_report(splits.train);
    write_json(run.path("distribution_report.json"), report.to_json());
    run.add("distribution_report.json", "cmm-distribution/1");
    write_json(run.path("dev_distribution_report.json"), distribution_report(splits.dev).to_json());
    run.add("dev_distribution_report.json", "cmm-distribution/1");
    run.finish();
    out << fmt::format("generated {} train / {} dev pairs; positive fraction {:.4f} (true {:.4f}), head {:.4f}, "
                       "tail {:.4f}\n",
                       splits.train.examples.size(), splits.dev.examples.size(), report.positive_fraction,
                       report.true_positive_fraction, report.head_share, report.tail_share);
    return kExitOk;
}

struct Arm {
    std::string name;
    LossConfig loss;
};

std::vector<Arm> parse_arms(const Json& config) {
    std::vector<Arm> arms;
    if (config.contains("arms")) {
        if (!config.at("arms").is_array() || config.at("arms").empty()) {
            throw ConfigError("arms: expected a nonempty array");
        }
        for (const auto& a : config.at("arms")) {
            Arm arm;
            arm.loss = loss_config_from_json(section(a, "loss"));
            arm.name = a.contains("name") ? a.at("name").get<std::string>() : to_string(arm.loss.kind);
            arms.push_back(std::move(arm));
        }
    } else {
        const auto loss = loss_config_from_json(section(config, "loss"));
        arms.push_back({to_string(loss.kind), loss});
    }
    for (std::size_t i = 0; i < arms.size(); ++i) {
        if (arms[i].name.empty() || arms[i].name.find_first_of("/\\,") != std::string::npos) {
            throw ConfigError(fmt::format("arms[{}].name: must be nonempty without '/', '\\' or ','", i));
        }
        for (std::size_t k = 0; k < i; ++k) {
            if (arms[k].name == arms[i].name) throw ConfigError(fmt::format("arms: duplicate name '{}'", arms[i].name));
        }
    }
    return arms;
}

int cmd_train(const Invocation& inv, std::ostream& out) {
    const auto arms = parse_arms(inv.config);
    const TrainConfig base = train_config_from_json(section(inv.config, "train"));
    const auto train_path = resolve(inv, required_string(inv.config, "train_data"));
    const auto dev_path = resolve(inv, required_string(inv.config, "dev_data"));

    Json effective;
    effective["train_data"] = train_path.string();
    effective["dev_data"] = dev_path.string();
    effective["train"] = train_config_to_json(base);
    effective["train"].erase("loss");
    effective["arms"] = Json::array();
    for (const auto& a : arms) {
        Json aj;
        aj["name"] = a.name;
        aj["loss"] = loss_config_to_json(a.loss);
        effective["arms"].push_back(std::move(aj));
    }

    const Dataset train_set = read_dataset(train_path);
    const Dataset dev_set = read_dataset(dev_path);
    RunDirectory run(inv, effective);
    std::vector<ArmTrace> traces;
    for (const auto& arm : arms) {
        TrainConfig cfg = base;
        cfg.loss = arm.loss;
        const auto result = train(train_set, dev_set, cfg);
        write_json(run.path(fmt::format("checkpoint_{}.json", arm.name)), checkpoint_to_json(result, cfg));
        run.add(fmt::format("checkpoint_{}.json", arm.name), kCheckpointFormat);
        write_text(run.path(fmt::format("trace_{}.csv", arm.name)),
                   to_csv([&](std::ostream& s) { write_trace_csv(result.trace, s); }));
        run.add(fmt::format("trace_{}.csv", arm.name), "cmm-trace/1");
        const auto& last = result.trace.records.empty() ? EpochRecord{} : result.trace.records.back();
        out << fmt::format("{}: epochs {} final loss {:.6g} dev f1 {:.4f} ign_f1 {:.4f} positives {}\n", arm.name,
                           cfg.epochs, last.mean_loss, last.f1, last.ign_f1, last.positives);
        traces.push_back({arm.name, result.trace});
    }
    write_text(run.path("positives.csv"),
               to_csv([&](std::ostream& s) { write_positive_counts_csv(positive_count_trace(traces), s); }));
    run.add("positives.csv", "cmm-positives/1");
    run.finish();
    return kExitOk;
}

template <typename T>
std::vector<T> list_field(const Json& j, const char* key, std::vector<T> fallback) {
    if (!j.contains(key)) return fallback;
    try {
        auto v = j.at(key).get<std::vector<T>>();
        if (v.empty()) throw ConfigError(fmt::format("compare.{}: must be nonempty", key));
        return v;
    } catch (const Json::exception& e) {
        throw ConfigError(fmt::format("compare.{}: {}", key, e.what()));
    }
}

int cmd_compare(const Invocation& inv, std::ostream& out) {
    const Json& c = section(inv.config, "compare");
    for (const auto& [key, _] : c.items()) {
        if (key != "gammas" && key != "ms" && key != "seeds" && key != "baselines" && key != "aggregation" &&
            key != "parallel") {
            throw ConfigError(fmt::format("compare.{}: unknown field", key));
        }
    }
    CompareSpec spec;
    spec.base = train_config_from_json(section(inv.config, "train"));
    spec.gammas = list_field<double>(c, "gammas", spec.gammas);
    spec.ms = list_field<double>(c, "ms", spec.ms);
    spec.seeds = list_field<std::uint64_t>(c, "seeds", spec.seeds);
    spec.baselines.clear();
    for (const auto& b : list_field<std::string>(c, "baselines", {"plain_margin", "atl_reference"})) {
        spec.baselines.push_back(loss_kind_from_string(b));
    }
    if (c.contains("baselines") && c.at("baselines").empty()) spec.baselines.clear();
    spec.aggregation = aggregation_from_string(c.value("aggregation", std::string("per_document_sum")));
    const bool parallel = c.value("parallel", true);
    const auto tuples = compare_tuples(spec);  // validates the grid before any work

    const auto train_path = resolve(inv, required_string(inv.config, "train_data"));
    const auto dev_path = resolve(inv, required_string(inv.config, "dev_data"));
    Json effective;
    effective["train_data"] = train_path.string();
    effective["dev_data"] = dev_path.string();
    effective["train"] = train_config_to_json(spec.base);
    effective["train"].erase("loss");
    effective["compare"]["gammas"] = spec.gammas;
    effective["compare"]["ms"] = spec.ms;
    effective["compare"]["seeds"] = spec.seeds;
    effective["compare"]["baselines"] = Json::array();
    for (auto k : spec.baselines) effective["compare"]["baselines"].push_back(to_string(k));
    effective["compare"]["aggregation"] = to_string(spec.aggregation);
    effective["compare"]["parallel"] = parallel;

    const Dataset train_set = read_dataset(train_path);
    const Dataset dev_set = read_dataset(dev_path);
    RunDirectory run(inv, effective);
    const auto result = run_compare(train_set, dev_set, spec, parallel);

    fs::create_directories(run.path("tuples"));
    std::vector<ArmTrace> traces;
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        const auto& row = result.rows[i];
        const auto name = fmt::format("tuples/{:03d}_{}_seed{}.csv", i, file_stem(row.loss.label()), row.seed);
        write_text(run.path(name), to_csv([&](std::ostream& s) { write_trace_csv(row.trace, s); }));
        run.add(name, "cmm-trace/1");
        traces.push_back({fmt::format("{}_seed{}", row.loss.label(), row.seed), row.trace});
    }
    write_text(run.path("compare.csv"), to_csv([&](std::ostream& s) { write_compare_csv(result, s); }));
    run.add("compare.csv", "cmm-compare/1");
    write_text(run.path("compare_summary.csv"),
               to_csv([&](std::ostream& s) { write_compare_summary_csv(result, s); }));
    run.add("compare_summary.csv", "cmm-compare-summary/1");
    std::vector<ArmTrace> quoted;
    for (auto& t : traces) quoted.push_back({"\"" + t.arm + "\"", t.trace});
    write_text(run.path("positives.csv"),
               to_csv([&](std::ostream& s) { write_positive_counts_csv(positive_count_trace(quoted), s); }));
    run.add("positives.csv", "cmm-positives/1");
    run.finish();

    for (const auto& s : result.summary) {
        out << fmt::format("{:<24} seeds {} mean f1 {:.4f} ign_f1 {:.4f}{}\n", s.loss.label(), s.seeds, s.mean_f1,
                           s.mean_ign_f1, s.best ? "  <- best" : "");
    }
    (void)tuples;
    return kExitOk;
}

int cmd_gradcheck(const Invocation& inv, std::ostream& out) {
    const Json& g = section(inv.config, "gradcheck");
    for (const auto& [key, _] : g.items()) {
        static const char* known[] = {"trials", "tolerance", "seed", "step", "gammas", "ms", "logit_min",
                                      "logit_max", "min_relations", "max_relations", "positive_rate",
                                      "empty_positive_rate", "kind", "parallel"};
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
            std::end(known)) {
            throw ConfigError(fmt::format("gradcheck.{}: unknown field", key));
        }
    }
    GradCheckRanges ranges;
    std::size_t trials = 1000;
    double tolerance = 1e-5;
    std::uint64_t seed = 1;
    bool parallel = false;
    try {
        trials = g.value("trials", trials);
        tolerance = g.value("tolerance", tolerance);
        seed = g.value("seed", seed);
        parallel = g.value("parallel", parallel);
        ranges.step = g.value("step", ranges.step);
        ranges.gammas = g.value("gammas", ranges.gammas);
        ranges.ms = g.value("ms", ranges.ms);
        ranges.logit_min = g.value("logit_min", ranges.logit_min);
        ranges.logit_max = g.value("logit_max", ranges.logit_max);
        ranges.min_relations = g.value("min_relations", ranges.min_relations);
        ranges.max_relations = g.value("max_relations", ranges.max_relations);
        ranges.positive_rate = g.value("positive_rate", ranges.positive_rate);
        ranges.empty_positive_rate = g.value("empty_positive_rate", ranges.empty_positive_rate);
        ranges.kind = loss_kind_from_string(g.value("kind", std::string("cmm")));
    } catch (const Json::exception& e) {
        throw ConfigError(fmt::format("gradcheck: {}", e.what()));
    }
    if (ranges.kind == LossKind::plugin) throw ConfigError("gradcheck.kind: plugin is not available from configs");
    for (double m : ranges.ms) {
        if (!(m > 0.0 && m < 1.0)) throw ConfigError(fmt::format("gradcheck.ms: {} outside (0, 1)", m));
    }
    for (double gm : ranges.gammas) {
        if (!(gm >= 0.0)) throw ConfigError(fmt::format("gradcheck.gammas: {} must be >= 0", gm));
    }

    Json effective;
    effective["gradcheck"] = {{"trials", trials},
                              {"tolerance", tolerance},
                              {"seed", seed},
                              {"step", ranges.step},
                              {"gammas", ranges.gammas},
                              {"ms", ranges.ms},
                              {"logit_min", ranges.logit_min},
                              {"logit_max", ranges.logit_max},
                              {"min_relations", ranges.min_relations},
                              {"max_relations", ranges.max_relations},
                              {"positive_rate", ranges.positive_rate},
                              {"empty_positive_rate", ranges.empty_positive_rate},
                              {"kind", to_string(ranges.kind)},
                              {"parallel", parallel}};
    RunDirectory run(inv, effective);
    const auto report = check_gradients(ranges, trials, tolerance, seed,
                                        parallel ? kernels::Execution::parallel : kernels::Execution::serial);
    write_json(run.path("gradcheck.json"), report.to_json());
    run.add("gradcheck.json", "cmm-gradcheck/1");
    run.finish();
    out << fmt::format("gradcheck: {} trials, {} compared, {} excluded near clamp, max rel error {:.3e}, {} failures\n",
                       report.trials, report.compared, report.excluded, report.max_rel_error, report.failures.size());
    return report.passed() ? kExitOk : kExitRuntimeError;
}

int cmd_curves(const Invocation& inv, std::ostream& out) {
    const Json& c = section(inv.config, "curves");
    std::vector<double> gammas = default_curve_gammas();
    double d_min = -5.0;
    double d_max = 5.0;
    double d_step = 0.05;
    double m = 0.2;
    try {
        gammas = c.value("gammas", gammas);
        d_min = c.value("d_min", d_min);
        d_max = c.value("d_max", d_max);
        d_step = c.value("d_step", d_step);
        m = c.value("m", m);
    } catch (const Json::exception& e) {
        throw ConfigError(fmt::format("curves: {}", e.what()));
    }
    if (gammas.empty()) throw ConfigError("curves.gammas: must be nonempty");
    if (!(d_step > 0.0) || !(d_max > d_min)) throw ConfigError("curves: need d_step > 0 and d_max > d_min");
    const double steps = (d_max - d_min) / d_step;
    const auto n = static_cast<int>(std::llround(steps));
    if (std::abs(steps - n) > 1e-9 * std::max(1.0, steps)) {
        throw ConfigError("curves.d_step: (d_max - d_min) must be an integer multiple of d_step");
    }

    Json effective;
    effective["curves"] = {{"gammas", gammas}, {"d_min", d_min}, {"d_max", d_max}, {"d_step", d_step}, {"m", m}};
    RunDirectory run(inv, effective);
    const auto rows = curve_export(gammas, linear_grid(d_min, d_max, n), m);
    write_text(run.path("curves.csv"), to_csv([&](std::ostream& s) { write_curves_csv(rows, s); }));
    run.add("curves.csv", "cmm-curves/1");
    run.finish();
    out << fmt::format("curves: {} gamma series x {} points = {} rows\n", gammas.size(), n + 1, rows.size());
    return kExitOk;
}

int cmd_eval(const Invocation& inv, std::ostream& out) {
    const auto checkpoint_path = resolve(inv, required_string(inv.config, "checkpoint"));
    const auto data_path = resolve(inv, required_string(inv.config, "data"));
    const GoldSource gold = gold_source_from_string(inv.config.value("gold", std::string("true_labels")));
    Json effective;
    effective["checkpoint"] = checkpoint_path.string();
    effective["data"] = data_path.string();
    effective["gold"] = to_string(gold);

    std::ifstream in(checkpoint_path);
    if (!in) throw Error(fmt::format("cannot read checkpoint '{}'", checkpoint_path.string()));
    Json checkpoint;
    try {
        checkpoint = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw SchemaError(fmt::format("checkpoint '{}': {}", checkpoint_path.string(), e.what()));
    }
    const EncoderParams params = params_from_checkpoint(checkpoint);
    const Dataset data = read_dataset(data_path);
    if (data.schema.row_length() != params.output_dim()) {
        throw SchemaError("eval: checkpoint output dimension does not match the dataset schema");
    }
    RunDirectory run(inv, effective);
    const auto predictions = predict(params, data);
    Json metrics;
    metrics["format"] = "cmm-eval/1";
    metrics["pairs"] = data.examples.size();
    metrics["positive_predictions"] = count_positive_predictions(predictions);
    metrics["micro"] = micro_f1(predictions, data, gold).to_json();
    metrics["ign"] = ign_f1(predictions, data, gold).to_json();
    write_json(run.path("metrics.json"), metrics);
    run.add("metrics.json", "cmm-eval/1");
    run.finish();
    out << fmt::format("eval: f1 {:.4f} ign_f1 {:.4f} over {} pairs\n", metrics["micro"]["f1"].get<double>(),
                       metrics["ign"]["f1"].get<double>(), data.examples.size());
    return kExitOk;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Concentrated margin maximization: synthetic data, training and analysis"};
    app.require_subcommand(1);
    Invocation inv;
    std::string config;
    std::string out_dir;
    for (const char* name : {"generate", "train", "compare", "gradcheck", "curves", "eval"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("-c,--config", config, "JSON config file")->required();
        sub->add_option("-o,--out", out_dir, "output directory (default: runs/<subcommand>)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kExitConfigError;
    }
    inv.subcommand = app.get_subcommands().front()->get_name();
    inv.config_path = config;
    fs::path dir = out_dir.empty() ? fs::path("runs") / inv.subcommand : fs::path(out_dir);
    if (dir.is_relative()) {
        if (const char* root = std::getenv(kOutputRootEnv); root != nullptr && *root != '\0') {
            dir = fs::path(root) / dir;
        }
    }
    inv.out_dir = dir;

    try {
        inv.config = load_config(inv.config_path);
        if (inv.subcommand == "generate") return cmd_generate(inv, out);
        if (inv.subcommand == "train") return cmd_train(inv, out);
        if (inv.subcommand == "compare") return cmd_compare(inv, out);
        if (inv.subcommand == "gradcheck") return cmd_gradcheck(inv, out);
        if (inv.subcommand == "curves") return cmd_curves(inv, out);
        return cmd_eval(inv, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntimeError;
    }
}

} // namespace cmm
