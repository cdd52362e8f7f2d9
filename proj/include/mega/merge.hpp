#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mega/ga.hpp"
#include "mega/genome.hpp"

namespace mega {

/// One pairwise merge in the reduction tree. Inputs are indices into the
/// previous level's outputs (the leaves for level 1). Seeds are positional:
/// derived from (cfg.seed, level, index), never from execution order.
struct MergeNode {
    std::uint32_t level = 0;  // 1-based; level k is the root
    std::uint32_t index = 0;  // 0-based within the level
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint64_t seed = 0;
};

/// Hierarchical reduction of 2^k leaves via pairwise GA merges, bottom-up.
struct MergePlan {
    std::vector<Genome> leaves;
    GaConfig config;  // shared by every node; node seeds override config.seed
    std::uint32_t depth = 0;
    std::vector<MergeNode> nodes;  // level 1 first, root last
};

/// Pair adjacent leaves (0,1), (2,3), ... per level. Requires a power-of-two
/// leaf count >= 2 (ConfigError otherwise) and mutually compatible genomes
/// (ShapeError naming the offending pair).
MergePlan build_merge_plan(std::vector<Genome> leaves, const GaConfig& cfg);

struct NodeResult {
    std::uint32_t level = 0;
    std::uint32_t index = 0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    double merged_val_accuracy = 0.0;
    double wall_seconds = 0.0;
    std::vector<GenerationRecord> history;
};

struct MergeReport {
    std::vector<std::string> leaf_names;  // optional; filled by the CLI
    std::vector<double> leaf_val_accuracy;
    double weight_average_val_accuracy = 0.0;
    std::vector<NodeResult> nodes;
    double final_val_accuracy = 0.0;
    std::optional<double> final_test_accuracy;
    double total_wall_seconds = 0.0;
    GaConfig config;
};

struct MergeOutcome {
    Genome final;
    MergeReport report;
};

/// Run every node bottom-up with val_fitness; record leaf baselines, the
/// uniform weight-average baseline, per-node histories, and the final
/// accuracies. test_eval, when given, scores the final genome once.
MergeOutcome execute_merge_plan(const MergePlan& plan, const FitnessFn& val_fitness,
                                const FitnessFn* test_eval = nullptr,
                                unsigned threads = 1);

/// Coordinate-wise arithmetic mean. Requires >= 1 mutually compatible
/// genomes.
Genome weight_average(std::span<const Genome> genomes);

/// Stable-key-order JSON document. Timings are emitted only when asked so
/// reports are byte-identical across reruns.
nlohmann::ordered_json report_to_json(const MergeReport& report,
                                      bool include_timings = false);

/// Inverse of report_to_json (ignores timings unless present).
MergeReport report_from_json(const nlohmann::ordered_json& doc);

/// Human-readable table: per-model baseline accuracy, the weight-average
/// baseline, and the merged result, 4 decimal places.
void print_report_table(std::ostream& out, const MergeReport& report);

}  // namespace mega
