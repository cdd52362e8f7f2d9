#include "mega/merge.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#include "mega/errors.hpp"

namespace mega {

namespace {

bool is_power_of_two(std::size_t n) { return n >= 1 && (n & (n - 1)) == 0; }

GaConfig config_for_node(const MergePlan& plan, const MergeNode& node) {
    GaConfig cfg = plan.config;
    cfg.seed = node.seed;
    return cfg;
}

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

MergePlan build_merge_plan(std::vector<Genome> leaves, const GaConfig& cfg) {
    cfg.validate();
    if (leaves.size() < 2 || !is_power_of_two(leaves.size())) {
        throw ConfigError("merge plans need a power-of-two number of checkpoints "
                          ">= 2 (got " + std::to_string(leaves.size()) +
                          "); train or drop models to reach 2, 4, 8, ...");
    }
    for (std::size_t i = 1; i < leaves.size(); ++i) {
        if (!compatible(leaves[0], leaves[i])) {
            throw ShapeError("checkpoint 0 " + to_string(leaves[0].manifest) +
                             " and checkpoint " + std::to_string(i) + " " +
                             to_string(leaves[i].manifest) +
                             " have different architectures");
        }
    }

    MergePlan plan;
    plan.leaves = std::move(leaves);
    plan.config = cfg;
    plan.depth = 0;
    for (std::size_t width = plan.leaves.size(); width > 1; width /= 2) ++plan.depth;

    for (std::uint32_t level = 1; level <= plan.depth; ++level) {
        const auto nodes_at_level =
            static_cast<std::uint32_t>(plan.leaves.size() >> level);
        for (std::uint32_t index = 0; index < nodes_at_level; ++index) {
            MergeNode node;
            node.level = level;
            node.index = index;
            node.left = 2 * index;
            node.right = 2 * index + 1;
            node.seed = seed_stream(cfg.seed, "merge-node", level, index);
            plan.nodes.push_back(node);
        }
    }
    return plan;
}

MergeOutcome execute_merge_plan(const MergePlan& plan, const FitnessFn& val_fitness,
                                const FitnessFn* test_eval, unsigned threads) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();

    MergeOutcome out;
    out.report.config = plan.config;
    for (const auto& leaf : plan.leaves) {
        out.report.leaf_val_accuracy.push_back(val_fitness(leaf));
    }
    out.report.weight_average_val_accuracy = val_fitness(weight_average(plan.leaves));

    // outputs[level] holds the merged genomes of that level; level 0 = leaves.
    std::vector<std::vector<Genome>> outputs(plan.depth + 1);
    outputs[0] = plan.leaves;
    for (std::uint32_t level = 1; level <= plan.depth; ++level) {
        outputs[level].resize(plan.leaves.size() >> level);
    }

    for (const auto& node : plan.nodes) {
        const auto& left = outputs[node.level - 1][node.left];
        const auto& right = outputs[node.level - 1][node.right];
        const auto node_start = clock::now();
        MegaResult result;
        const std::string where = "merge node level " + std::to_string(node.level) +
                                  ", pair " + std::to_string(node.index) + ": ";
        try {
            result = run_mega(left, right, config_for_node(plan, node), val_fitness,
                              threads);
        } catch (const NumericError& e) {
            throw NumericError(where + e.what());
        } catch (const ShapeError& e) {
            throw ShapeError(where + e.what());
        } catch (const Error& e) {
            throw Error(where + e.what());
        }
        NodeResult nr;
        nr.level = node.level;
        nr.index = node.index;
        nr.left = node.left;
        nr.right = node.right;
        nr.merged_val_accuracy = result.best_fitness;
        nr.wall_seconds =
            std::chrono::duration<double>(clock::now() - node_start).count();
        nr.history = std::move(result.history);
        out.report.nodes.push_back(std::move(nr));
        outputs[node.level][node.index] = std::move(result.best);
    }

    out.final = std::move(outputs[plan.depth][0]);
    out.report.final_val_accuracy = out.report.nodes.back().merged_val_accuracy;
    if (test_eval != nullptr) {
        out.report.final_test_accuracy = (*test_eval)(out.final);
    }
    out.report.total_wall_seconds =
        std::chrono::duration<double>(clock::now() - t0).count();
    return out;
}

Genome weight_average(std::span<const Genome> genomes) {
    if (genomes.empty()) {
        throw ConfigError("weight_average needs at least one genome");
    }
    for (std::size_t i = 1; i < genomes.size(); ++i) {
        if (!compatible(genomes[0], genomes[i])) {
            throw ShapeError("genome 0 and genome " + std::to_string(i) +
                             " have different architectures");
        }
    }
    Genome avg;
    avg.manifest = genomes[0].manifest;
    avg.values.assign(genomes[0].values.size(), 0.0);
    for (const auto& g : genomes) {
        for (std::size_t c = 0; c < avg.values.size(); ++c) {
            avg.values[c] += g.values[c];
        }
    }
    const auto k = static_cast<double>(genomes.size());
    for (double& v : avg.values) v /= k;
    return avg;
}

nlohmann::ordered_json report_to_json(const MergeReport& report,
                                      bool include_timings) {
    nlohmann::ordered_json doc;
    doc["format"] = "mega-merge-report-v1";

    nlohmann::ordered_json leaves = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < report.leaf_val_accuracy.size(); ++i) {
        nlohmann::ordered_json leaf;
        leaf["id"] = i;
        if (i < report.leaf_names.size()) leaf["name"] = report.leaf_names[i];
        leaf["val_accuracy"] = report.leaf_val_accuracy[i];
        leaves.push_back(std::move(leaf));
    }
    doc["leaves"] = std::move(leaves);
    doc["weight_average"] = {{"val_accuracy", report.weight_average_val_accuracy}};

    const auto& cfg = report.config;
    doc["ga"] = {{"population_size", cfg.population_size},
                 {"generations", cfg.generations},
                 {"parents_per_generation", cfg.parents_per_generation},
                 {"mutation_rate", cfg.mutation_rate},
                 {"mutation_sigma", cfg.mutation_sigma},
                 {"tournament_size", cfg.tournament_size},
                 {"elite_count", cfg.elite_count},
                 {"seed", cfg.seed},
                 {"seed_endpoints", cfg.seed_endpoints}};

    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& node : report.nodes) {
        nlohmann::ordered_json n;
        n["level"] = node.level;
        n["index"] = node.index;
        n["inputs"] = {node.left, node.right};
        n["val_accuracy"] = node.merged_val_accuracy;
        nlohmann::ordered_json hist = nlohmann::ordered_json::array();
        for (const auto& rec : node.history) {
            hist.push_back({{"generation", rec.generation},
                            {"best_fitness", rec.best_fitness},
                            {"mean_fitness", rec.mean_fitness}});
        }
        n["history"] = std::move(hist);
        if (include_timings) n["wall_seconds"] = node.wall_seconds;
        nodes.push_back(std::move(n));
    }
    doc["nodes"] = std::move(nodes);

    nlohmann::ordered_json fin;
    fin["val_accuracy"] = report.final_val_accuracy;
    if (report.final_test_accuracy) {
        fin["test_accuracy"] = *report.final_test_accuracy;
    }
    doc["final"] = std::move(fin);
    if (include_timings) doc["total_wall_seconds"] = report.total_wall_seconds;
    return doc;
}

MergeReport report_from_json(const nlohmann::ordered_json& doc) {
    if (!doc.is_object() || doc.value("format", "") != "mega-merge-report-v1") {
        throw DataError("not a mega merge report");
    }
    MergeReport report;
    for (const auto& leaf : doc.at("leaves")) {
        report.leaf_names.push_back(leaf.value("name", ""));
        report.leaf_val_accuracy.push_back(leaf.at("val_accuracy").get<double>());
    }
    report.weight_average_val_accuracy =
        doc.at("weight_average").at("val_accuracy").get<double>();

    const auto& ga = doc.at("ga");
    report.config.population_size = ga.at("population_size").get<std::uint32_t>();
    report.config.generations = ga.at("generations").get<std::uint32_t>();
    report.config.parents_per_generation =
        ga.at("parents_per_generation").get<std::uint32_t>();
    report.config.mutation_rate = ga.at("mutation_rate").get<double>();
    report.config.mutation_sigma = ga.at("mutation_sigma").get<double>();
    report.config.tournament_size = ga.at("tournament_size").get<std::uint32_t>();
    report.config.elite_count = ga.at("elite_count").get<std::uint32_t>();
    report.config.seed = ga.at("seed").get<std::uint64_t>();
    report.config.seed_endpoints = ga.at("seed_endpoints").get<bool>();

    for (const auto& n : doc.at("nodes")) {
        NodeResult nr;
        nr.level = n.at("level").get<std::uint32_t>();
        nr.index = n.at("index").get<std::uint32_t>();
        nr.left = n.at("inputs").at(0).get<std::uint32_t>();
        nr.right = n.at("inputs").at(1).get<std::uint32_t>();
        nr.merged_val_accuracy = n.at("val_accuracy").get<double>();
        nr.wall_seconds = n.value("wall_seconds", 0.0);
        for (const auto& h : n.at("history")) {
            nr.history.push_back({h.at("generation").get<std::uint32_t>(),
                                  h.at("best_fitness").get<double>(),
                                  h.at("mean_fitness").get<double>(), 0});
        }
        report.nodes.push_back(std::move(nr));
    }

    const auto& fin = doc.at("final");
    report.final_val_accuracy = fin.at("val_accuracy").get<double>();
    if (fin.contains("test_accuracy")) {
        report.final_test_accuracy = fin.at("test_accuracy").get<double>();
    }
    report.total_wall_seconds = doc.value("total_wall_seconds", 0.0);
    return report;
}

void print_report_table(std::ostream& out, const MergeReport& report) {
    out << "model                                    val accuracy\n";
    out << "----------------------------------------------------\n";
    for (std::size_t i = 0; i < report.leaf_val_accuracy.size(); ++i) {
        std::string name = "model " + std::to_string(i + 1);
        if (i < report.leaf_names.size() && !report.leaf_names[i].empty()) {
            name += " (" + report.leaf_names[i] + ")";
        }
        if (name.size() > 40) name = name.substr(0, 37) + "...";
        out << name << std::string(41 - std::min<std::size_t>(name.size(), 40), ' ')
            << fmt4(report.leaf_val_accuracy[i]) << "\n";
    }
    out << "weight average                           "
        << fmt4(report.weight_average_val_accuracy) << "\n";
    out << "merged (MeGA)                            "
        << fmt4(report.final_val_accuracy) << "\n";
    if (report.final_test_accuracy) {
        out << "merged test accuracy                     "
            << fmt4(*report.final_test_accuracy) << "\n";
    }
    if (report.nodes.size() > 1) {
        out << "\nmerge nodes (level.pair)\n";
        for (const auto& node : report.nodes) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "  %u.%u  inputs (%u, %u)  val %.4f",
                          node.level, node.index, node.left, node.right,
                          node.merged_val_accuracy);
            out << buf;
            if (node.wall_seconds > 0.0) {
                std::snprintf(buf, sizeof(buf), "  [%.2fs]", node.wall_seconds);
                out << buf;
            }
            out << "\n";
        }
    }
}

}  // namespace mega
