#include "mega/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "mega/checkpoint.hpp"
#include "mega/dataset.hpp"
#include "mega/errors.hpp"
#include "mega/ga.hpp"
#include "mega/genome.hpp"
#include "mega/merge.hpp"
#include "mega/model.hpp"

namespace mega::cli {

namespace {

namespace fs = std::filesystem;

/// Every configurable key; settable in the key=value config file and
/// overridable with --key value (flags win).
struct Options {
    // dataset
    std::string dataset = "two_moons";
    std::string csv_path;
    std::string label_column = "y";
    std::uint64_t n = 1000;
    double noise = 0.15;
    double val_fraction = 0.1;
    double test_fraction = 0.0;
    std::uint64_t data_seed = 0;
    bool data_seed_set = false;
    // model
    std::vector<std::uint32_t> layers{2, 16, 16, 2};
    // training
    std::uint32_t batch_size = 256;
    std::uint32_t epochs = 50;
    double learning_rate = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    // genetic algorithm
    std::uint32_t population = 20;
    std::uint32_t generations = 20;
    std::uint32_t parents = 4;
    double mutation_rate = 0.02;
    double mutation_sigma = 0.01;
    std::uint32_t tournament = 3;
    std::uint32_t elite = 1;
    bool seed_endpoints = true;
    // general
    std::uint64_t seed = 0;
    std::uint32_t threads = 0;
    std::string pairing = "adjacent";
};

// Registered on the root app; subcommands fall through to it, so every key
// works both in the config file and as --key value on any command.
void add_config_options(CLI::App& cmd, Options& o) {
    cmd.set_config("--config", "", "flat key=value config file");
    cmd.allow_config_extras(CLI::config_extras_mode::error);

    cmd.add_option("--dataset", o.dataset,
                   "two_moons | gaussian_blobs | concentric_rings | csv")
        ->capture_default_str();
    cmd.add_option("--csv_path", o.csv_path, "CSV file for dataset=csv");
    cmd.add_option("--label_column", o.label_column, "label column name")
        ->capture_default_str();
    cmd.add_option("--n", o.n, "synthetic sample count")->capture_default_str();
    cmd.add_option("--noise", o.noise, "synthetic noise level")
        ->capture_default_str();
    cmd.add_option("--val_fraction", o.val_fraction, "validation fraction")
        ->capture_default_str();
    cmd.add_option("--test_fraction", o.test_fraction, "test fraction")
        ->capture_default_str();
    cmd.add_option("--data_seed", o.data_seed,
                   "dataset generation/split seed (default: derived from seed)");

    cmd.add_option("--layers", o.layers, "comma-separated layer widths")
        ->delimiter(',')
        ->capture_default_str();

    cmd.add_option("--batch_size", o.batch_size)->capture_default_str();
    cmd.add_option("--epochs", o.epochs)->capture_default_str();
    cmd.add_option("--learning_rate", o.learning_rate)->capture_default_str();
    cmd.add_option("--adam_beta1", o.adam_beta1)->capture_default_str();
    cmd.add_option("--adam_beta2", o.adam_beta2)->capture_default_str();
    cmd.add_option("--adam_epsilon", o.adam_epsilon)->capture_default_str();

    cmd.add_option("--population", o.population, "GA population size N")
        ->capture_default_str();
    cmd.add_option("--generations", o.generations, "GA generations G")
        ->capture_default_str();
    cmd.add_option("--parents", o.parents, "parents per generation K (even)")
        ->capture_default_str();
    cmd.add_option("--mutation_rate", o.mutation_rate)->capture_default_str();
    cmd.add_option("--mutation_sigma", o.mutation_sigma)->capture_default_str();
    cmd.add_option("--tournament", o.tournament, "tournament size t")
        ->capture_default_str();
    cmd.add_option("--elite", o.elite, "elites carried per generation")
        ->capture_default_str();
    cmd.add_option("--seed_endpoints", o.seed_endpoints,
                   "include exact parent copies in the initial population")
        ->capture_default_str();

    cmd.add_option("--seed", o.seed, "master seed")->capture_default_str();
    cmd.add_option("--threads", o.threads,
                   "fitness evaluation workers (0 = auto; capped by MEGA_THREADS)")
        ->capture_default_str();
    cmd.add_option("--pairing", o.pairing, "adjacent | shuffled:<seed>")
        ->capture_default_str();
}

std::uint64_t resolved_data_seed(const Options& o) {
    return o.data_seed_set ? o.data_seed : seed_stream(o.seed, "data");
}

Dataset build_dataset(const Options& o) {
    const std::uint64_t data_seed = resolved_data_seed(o);
    Dataset ds;
    if (o.dataset == "csv") {
        if (o.csv_path.empty()) {
            throw ConfigError("dataset=csv requires csv_path");
        }
        ds = load_csv(o.csv_path, o.label_column);
    } else {
        ds = gen_synthetic(parse_synthetic_kind(o.dataset), o.n, o.noise, data_seed);
    }
    return split(std::move(ds), o.val_fraction, o.test_fraction, data_seed);
}

GaConfig build_ga_config(const Options& o) {
    GaConfig cfg;
    cfg.population_size = o.population;
    cfg.generations = o.generations;
    cfg.parents_per_generation = o.parents;
    cfg.mutation_rate = o.mutation_rate;
    cfg.mutation_sigma = o.mutation_sigma;
    cfg.tournament_size = o.tournament;
    cfg.elite_count = o.elite;
    cfg.seed = seed_stream(o.seed, "ga");
    cfg.seed_endpoints = o.seed_endpoints;
    cfg.validate();
    return cfg;
}

unsigned resolve_threads(std::uint32_t requested) {
    unsigned value = requested != 0
                         ? requested
                         : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("MEGA_THREADS")) {
        std::uint32_t cap = 0;
        const std::string text(env);
        const auto* end = text.data() + text.size();
        const auto [ptr, ec] = std::from_chars(text.data(), end, cap);
        if (ec != std::errc() || ptr != end) {
            throw ConfigError("MEGA_THREADS must be a non-negative integer");
        }
        if (cap > 0) value = std::min(value, cap);
    }
    return std::max(1u, value);
}

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

/// Validation-accuracy fitness over a materialized partition.
FitnessFn make_accuracy_fn(const ModelSpec& spec, const Dataset& ds,
                           std::span<const std::uint32_t> idx,
                           const std::string& which) {
    if (idx.empty()) {
        throw DataError(which + " partition is empty; adjust the split fractions");
    }
    if (ds.dim() != spec.input_dim()) {
        throw ShapeError("dataset has " + std::to_string(ds.dim()) +
                         " features, model expects " +
                         std::to_string(spec.input_dim()));
    }
    auto data = std::make_shared<std::pair<Matrix, std::vector<std::int32_t>>>(
        subset(ds, idx));
    return [spec, data](const Genome& g) {
        return accuracy(unflatten(g), spec, data->first, data->second);
    };
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

Genome quantized(Genome g) {
    for (double& v : g.values) v = round_to_f32(v);
    return g;
}

std::vector<Genome> load_checkpoints(const std::vector<std::string>& paths) {
    std::vector<Genome> genomes;
    genomes.reserve(paths.size());
    for (const auto& p : paths) genomes.push_back(load_checkpoint(p));
    return genomes;
}

// ---------------------------------------------------------------- commands

int cmd_train(const Options& o, const std::string& out_path,
              std::string metrics_path, std::ostream& out) {
    ModelSpec spec;
    spec.layer_widths = o.layers;
    spec.validate();

    TrainConfig tc;
    tc.batch_size = o.batch_size;
    tc.epochs = o.epochs;
    tc.learning_rate = o.learning_rate;
    tc.adam_beta1 = o.adam_beta1;
    tc.adam_beta2 = o.adam_beta2;
    tc.adam_epsilon = o.adam_epsilon;
    tc.seed = seed_stream(o.seed, "train");
    tc.validate();

    const Dataset ds = build_dataset(o);
    const TrainMetrics tm = train_with_metrics(spec, ds, tc);

    // Metrics reflect the checkpoint's 32-bit precision, so a later
    // `mega eval` of the file reproduces them exactly.
    const Genome genome = quantized(flatten(tm.params));
    save_checkpoint(genome, out_path);

    const LayeredParams stored = unflatten(genome);
    auto [train_X, train_y] = subset(ds, ds.partition.train);
    const double train_acc = accuracy(stored, spec, train_X, train_y);

    nlohmann::ordered_json metrics;
    metrics["format"] = "mega-train-metrics-v1";
    metrics["seed"] = o.seed;
    metrics["epochs"] = o.epochs;
    metrics["final_loss"] = tm.final_loss;
    metrics["train_accuracy"] = train_acc;
    std::string val_note;
    if (!ds.partition.val.empty()) {
        auto [val_X, val_y] = subset(ds, ds.partition.val);
        const double val_acc = accuracy(stored, spec, val_X, val_y);
        metrics["val_accuracy"] = val_acc;
        val_note = ", val " + fmt4(val_acc);
    }
    if (metrics_path.empty()) metrics_path = out_path + ".metrics.json";
    write_text_file(metrics_path, metrics.dump(2) + "\n");

    out << "wrote " << out_path << " (train " << fmt4(train_acc) << val_note
        << ")\n";
    return 0;
}

int run_merge_common(const Options& o, std::vector<std::string> ckpt_paths,
                     const std::string& out_path, const std::string& history_path,
                     std::string report_path, bool emit_timings,
                     std::ostream& out) {
    std::vector<Genome> genomes = load_checkpoints(ckpt_paths);

    if (o.pairing != "adjacent") {
        constexpr std::string_view prefix = "shuffled:";
        if (o.pairing.rfind(prefix, 0) != 0) {
            throw ConfigError("pairing must be 'adjacent' or 'shuffled:<seed>'");
        }
        const std::string seed_text = o.pairing.substr(prefix.size());
        std::uint64_t pairing_seed = 0;
        const auto* end = seed_text.data() + seed_text.size();
        const auto [ptr, ec] = std::from_chars(seed_text.data(), end, pairing_seed);
        if (ec != std::errc() || ptr != end) {
            throw ConfigError("bad pairing seed '" + seed_text + "'");
        }
        std::vector<std::uint32_t> order(genomes.size());
        for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(seed_stream(pairing_seed, "pairing"));
        shuffle(rng, order);
        std::vector<Genome> shuffled;
        std::vector<std::string> shuffled_names;
        for (const auto i : order) {
            shuffled.push_back(std::move(genomes[i]));
            shuffled_names.push_back(ckpt_paths[i]);
        }
        genomes = std::move(shuffled);
        ckpt_paths = std::move(shuffled_names);
    }

    MergePlan plan = build_merge_plan(std::move(genomes), build_ga_config(o));
    const ModelSpec spec = spec_from_manifest(plan.leaves[0].manifest);

    const Dataset ds = build_dataset(o);
    const FitnessFn val_fn = make_accuracy_fn(spec, ds, ds.partition.val,
                                              "validation");
    FitnessFn test_fn;
    if (!ds.partition.test.empty()) {
        test_fn = make_accuracy_fn(spec, ds, ds.partition.test, "test");
    }

    MergeOutcome outcome = execute_merge_plan(
        plan, val_fn, test_fn ? &test_fn : nullptr, resolve_threads(o.threads));
    outcome.report.leaf_names = ckpt_paths;

    save_checkpoint(outcome.final, out_path);
    if (!history_path.empty()) {
        std::ostringstream csv;
        write_history_csv(csv, outcome.report.nodes.back().history);
        write_text_file(history_path, csv.str());
    }
    if (report_path.empty()) report_path = out_path + ".report.json";
    write_text_file(report_path,
                    report_to_json(outcome.report, emit_timings).dump(2) + "\n");

    print_report_table(out, outcome.report);
    out << "wrote " << out_path << "\n";
    return 0;
}

int cmd_merge(const Options& o, const std::vector<std::string>& ckpts,
              const std::string& out_path, std::string history_path,
              const std::string& report_path, bool emit_timings,
              std::ostream& out) {
    if (ckpts.size() != 2) {
        throw ConfigError("merge takes exactly two checkpoints");
    }
    if (history_path.empty()) history_path = out_path + ".history.csv";
    return run_merge_common(o, ckpts, out_path, history_path, report_path,
                            emit_timings, out);
}

int cmd_merge_tree(const Options& o, const std::vector<std::string>& ckpts,
                   const std::string& out_path, const std::string& report_path,
                   bool emit_timings, std::ostream& out) {
    if (ckpts.size() < 2) {
        throw ConfigError("merge-tree takes 2^k checkpoints (at least 2)");
    }
    return run_merge_common(o, ckpts, out_path, "", report_path, emit_timings,
                            out);
}

int cmd_average(const Options& o, const std::vector<std::string>& ckpts,
                const std::string& out_path, std::string report_path,
                std::ostream& out) {
    if (ckpts.empty()) throw ConfigError("average takes at least one checkpoint");
    const std::vector<Genome> genomes = load_checkpoints(ckpts);
    const Genome avg = quantized(weight_average(genomes));

    const ModelSpec spec = spec_from_manifest(avg.manifest);
    const Dataset ds = build_dataset(o);
    const FitnessFn val_fn = make_accuracy_fn(spec, ds, ds.partition.val,
                                              "validation");

    save_checkpoint(avg, out_path);

    nlohmann::ordered_json doc;
    doc["format"] = "mega-average-report-v1";
    nlohmann::ordered_json models = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < genomes.size(); ++i) {
        models.push_back({{"id", i},
                          {"name", ckpts[i]},
                          {"val_accuracy", val_fn(genomes[i])}});
    }
    doc["models"] = std::move(models);
    const double avg_acc = val_fn(avg);
    doc["average"] = {{"val_accuracy", avg_acc}};
    if (report_path.empty()) report_path = out_path + ".report.json";
    write_text_file(report_path, doc.dump(2) + "\n");

    for (std::size_t i = 0; i < genomes.size(); ++i) {
        out << "model " << i + 1 << " (" << ckpts[i] << ")  val "
            << fmt4(doc["models"][i]["val_accuracy"].get<double>()) << "\n";
    }
    out << "weight average  val " << fmt4(avg_acc) << "\n";
    out << "wrote " << out_path << "\n";
    return 0;
}

int cmd_eval(const Options& o, const std::string& ckpt,
             const std::string& partition, std::ostream& out) {
    const Genome genome = load_checkpoint(ckpt);
    const ModelSpec spec = spec_from_manifest(genome.manifest);
    const Dataset ds = build_dataset(o);

    std::span<const std::uint32_t> idx;
    if (partition == "train") {
        idx = ds.partition.train;
    } else if (partition == "val") {
        idx = ds.partition.val;
    } else if (partition == "test") {
        idx = ds.partition.test;
    } else {
        throw ConfigError("unknown partition '" + partition +
                          "' (expected train, val, or test)");
    }
    const FitnessFn fn = make_accuracy_fn(spec, ds, idx, partition);
    out << fmt4(fn(genome)) << "\n";
    return 0;
}

int cmd_report(const std::string& json_path, std::ostream& out) {
    std::ifstream in(json_path);
    if (!in) throw DataError("cannot open report: " + json_path);
    nlohmann::ordered_json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad report JSON: " + std::string(e.what()));
    }
    print_report_table(out, report_from_json(doc));
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
    CLI::App app{"mega: merge identically shaped neural networks with a "
                 "genetic algorithm"};
    app.require_subcommand(1);

    Options o;
    std::vector<std::string> ckpts;
    std::string out_path, history_path, report_path, metrics_path;
    std::string partition = "val";
    std::string report_file;
    bool emit_timings = false;

    add_config_options(app, o);
    app.add_option("--out", out_path, "output checkpoint path");
    app.add_option("--metrics_out", metrics_path,
                   "train metrics JSON path (default: <out>.metrics.json)");
    app.add_option("--history_out", history_path,
                   "merge fitness history CSV (default: <out>.history.csv)");
    app.add_option("--report_out", report_path,
                   "report JSON path (default: <out>.report.json)");
    app.add_option("--partition", partition, "eval partition: train | val | test")
        ->capture_default_str();
    app.add_flag("--emit-timings", emit_timings,
                 "include wall times in the report JSON");

    auto* train = app.add_subcommand("train",
                                     "train one model, write a checkpoint");
    auto* merge = app.add_subcommand("merge", "merge two checkpoints");
    merge->add_option("checkpoints", ckpts, "two parent checkpoints");
    auto* tree = app.add_subcommand("merge-tree",
                                    "hierarchically merge 2^k checkpoints");
    tree->add_option("checkpoints", ckpts, "2^k parent checkpoints");
    auto* average = app.add_subcommand("average",
                                       "uniform weight-average baseline");
    average->add_option("checkpoints", ckpts, "checkpoints to average");
    auto* eval = app.add_subcommand("eval",
                                    "accuracy of a checkpoint on a partition");
    eval->add_option("checkpoint", ckpts, "checkpoint to evaluate");
    auto* report = app.add_subcommand("report", "render a report JSON as a table");
    report->add_option("report_json", report_file, "report JSON file")
        ->required();

    for (auto* sub : {train, merge, tree, average, eval, report}) {
        sub->fallthrough();
    }

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("mega");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        err << "run 'mega --help' for usage\n";
        return 2;
    }

    try {
        o.data_seed_set = app.count("--data_seed") > 0;
        const bool needs_out = train->parsed() || merge->parsed() ||
                               tree->parsed() || average->parsed();
        if (needs_out && out_path.empty()) {
            throw ConfigError("--out is required for this command");
        }
        if (train->parsed()) {
            return cmd_train(o, out_path, metrics_path, out);
        }
        if (merge->parsed()) {
            return cmd_merge(o, ckpts, out_path, history_path, report_path,
                             emit_timings, out);
        }
        if (tree->parsed()) {
            return cmd_merge_tree(o, ckpts, out_path, report_path, emit_timings,
                                  out);
        }
        if (average->parsed()) {
            return cmd_average(o, ckpts, out_path, report_path, out);
        }
        if (eval->parsed()) {
            if (ckpts.size() != 1) {
                throw ConfigError("eval takes exactly one checkpoint");
            }
            return cmd_eval(o, ckpts[0], partition, out);
        }
        if (report->parsed()) {
            return cmd_report(report_file, out);
        }
        err << "error: no command given\n";
        return 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    args.reserve(argc > 0 ? argc - 1 : 0);
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace mega::cli
