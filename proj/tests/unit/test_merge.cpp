#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "mega/errors.hpp"
#include "mega/merge.hpp"
#include "mega/rng.hpp"

using namespace mega;

namespace {

ShapeManifest small_manifest() {
    ShapeManifest m;
    m.layers.push_back({2, 3});
    return m;
}

Genome make_genome(std::vector<double> values,
                   const ShapeManifest& manifest = small_manifest()) {
    Genome g;
    g.manifest = manifest;
    g.values = std::move(values);
    return g;
}

Genome random_f32_genome(std::uint64_t seed,
                         const ShapeManifest& manifest = small_manifest()) {
    Rng rng(seed);
    std::vector<double> v(manifest.total_len());
    for (double& x : v) x = round_to_f32(2.0 * rng.uniform() - 1.0);
    return make_genome(std::move(v), manifest);
}

FitnessFn distance_fitness(Genome target) {
    return [target = std::move(target)](const Genome& g) {
        double d = 0.0;
        for (std::size_t i = 0; i < g.values.size(); ++i) {
            const double diff = g.values[i] - target.values[i];
            d += diff * diff;
        }
        return -d;
    };
}

GaConfig small_config(std::uint64_t seed = 11) {
    GaConfig cfg;
    cfg.population_size = 8;
    cfg.generations = 5;
    cfg.parents_per_generation = 2;
    cfg.tournament_size = 2;
    cfg.seed = seed;
    return cfg;
}

std::vector<Genome> random_leaves(std::size_t count, std::uint64_t seed0) {
    std::vector<Genome> leaves;
    for (std::size_t i = 0; i < count; ++i) {
        leaves.push_back(random_f32_genome(seed0 + i));
    }
    return leaves;
}

}  // namespace

TEST_CASE("two checkpoints build a single-node plan") {
    const auto plan = build_merge_plan(random_leaves(2, 100), small_config());
    CHECK(plan.depth == 1);
    REQUIRE(plan.nodes.size() == 1);
    CHECK(plan.nodes[0].level == 1);
    CHECK(plan.nodes[0].left == 0);
    CHECK(plan.nodes[0].right == 1);
}

TEST_CASE("eight checkpoints build the 4+2+1 node tree") {
    const auto plan = build_merge_plan(random_leaves(8, 200), small_config());
    CHECK(plan.depth == 3);
    REQUIRE(plan.nodes.size() == 7);
    int per_level[4] = {0, 0, 0, 0};
    for (const auto& node : plan.nodes) {
        REQUIRE(node.level >= 1);
        REQUIRE(node.level <= 3);
        ++per_level[node.level];
        CHECK(node.left == 2 * node.index);
        CHECK(node.right == 2 * node.index + 1);
    }
    CHECK(per_level[1] == 4);
    CHECK(per_level[2] == 2);
    CHECK(per_level[3] == 1);
}

TEST_CASE("non-power-of-two and incompatible inputs are rejected") {
    CHECK_THROWS_AS(build_merge_plan(random_leaves(3, 300), small_config()),
                    ConfigError);
    CHECK_THROWS_AS(build_merge_plan(random_leaves(1, 300), small_config()),
                    ConfigError);
    CHECK_THROWS_AS(build_merge_plan({}, small_config()), ConfigError);

    auto leaves = random_leaves(4, 400);
    ShapeManifest other;
    other.layers.push_back({3, 2});
    leaves[2] = random_f32_genome(55, other);
    CHECK_THROWS_WITH_AS(build_merge_plan(leaves, small_config()),
                         doctest::Contains("checkpoint 2"), ShapeError);
}

TEST_CASE("node seeds are positional") {
    const auto plan = build_merge_plan(random_leaves(4, 500), small_config(7));
    CHECK(plan.nodes[0].seed == seed_stream(7, "merge-node", 1, 0));
    CHECK(plan.nodes[1].seed == seed_stream(7, "merge-node", 1, 1));
    CHECK(plan.nodes[2].seed == seed_stream(7, "merge-node", 2, 0));
    CHECK(plan.nodes[0].seed != plan.nodes[1].seed);
}

TEST_CASE("a depth-1 plan equals a direct run with the node seed") {
    const auto leaves = random_leaves(2, 600);
    const GaConfig cfg = small_config(21);
    const FitnessFn fitness = distance_fitness(random_f32_genome(601));

    const auto plan = build_merge_plan(leaves, cfg);
    const MergeOutcome outcome = execute_merge_plan(plan, fitness);

    GaConfig direct = cfg;
    direct.seed = seed_stream(cfg.seed, "merge-node", 1, 0);
    const MegaResult expect = run_mega(leaves[0], leaves[1], direct, fitness);
    CHECK(outcome.final == expect.best);
    CHECK(outcome.report.final_val_accuracy == expect.best_fitness);
    REQUIRE(outcome.report.nodes.size() == 1);
    CHECK(outcome.report.nodes[0].history.size() == cfg.generations);
}

TEST_CASE("the final merge dominates every leaf") {
    const auto leaves = random_leaves(4, 700);
    GaConfig cfg = small_config(31);
    cfg.mutation_rate = 0.0;
    const FitnessFn fitness = distance_fitness(random_f32_genome(701));
    const MergeOutcome outcome = execute_merge_plan(build_merge_plan(leaves, cfg),
                                                    fitness);
    REQUIRE(outcome.report.leaf_val_accuracy.size() == 4);
    const double best_leaf = *std::max_element(
        outcome.report.leaf_val_accuracy.begin(),
        outcome.report.leaf_val_accuracy.end());
    CHECK(outcome.report.final_val_accuracy >= best_leaf);
    CHECK(outcome.report.final_val_accuracy == fitness(outcome.final));
}

TEST_CASE("plan execution is deterministic and order-insensitive") {
    const auto leaves = random_leaves(4, 800);
    const GaConfig cfg = small_config(41);
    const FitnessFn fitness = distance_fitness(random_f32_genome(801));
    const auto plan = build_merge_plan(leaves, cfg);

    const MergeOutcome first = execute_merge_plan(plan, fitness);
    const MergeOutcome second = execute_merge_plan(plan, fitness, nullptr, 4);
    CHECK(first.final == second.final);

    // Replaying the nodes by hand in sibling-swapped order reproduces the
    // orchestrator's result: seeds are positional, not temporal.
    GaConfig right_cfg = cfg;
    right_cfg.seed = seed_stream(cfg.seed, "merge-node", 1, 1);
    const MegaResult right = run_mega(leaves[2], leaves[3], right_cfg, fitness);
    GaConfig left_cfg = cfg;
    left_cfg.seed = seed_stream(cfg.seed, "merge-node", 1, 0);
    const MegaResult left = run_mega(leaves[0], leaves[1], left_cfg, fitness);
    GaConfig root_cfg = cfg;
    root_cfg.seed = seed_stream(cfg.seed, "merge-node", 2, 0);
    const MegaResult root = run_mega(left.best, right.best, root_cfg, fitness);
    CHECK(root.best == first.final);
}

TEST_CASE("weight_average follows the coordinate-wise mean") {
    const Genome a = make_genome({0, 2, 0, 0, 0, 0, 0, 0, 0});
    const Genome b = make_genome({4, 6, 0, 0, 0, 0, 0, 0, 0});
    const std::vector<Genome> two{a, b};
    const Genome avg = weight_average(two);
    CHECK(avg.values[0] == 2.0);
    CHECK(avg.values[1] == 4.0);

    const std::vector<Genome> one{a};
    CHECK(weight_average(one) == a);

    const std::vector<Genome> clones{b, b, b};
    CHECK(weight_average(clones) == b);
}

TEST_CASE("weight_average is permutation-invariant and scale-linear") {
    auto leaves = random_leaves(6, 900);
    const Genome base = weight_average(leaves);

    Rng rng(901);
    shuffle(rng, leaves);
    CHECK(weight_average(leaves) == base);  // bitwise at weight-like scales

    std::vector<Genome> doubled = leaves;
    for (auto& g : doubled) {
        for (double& v : g.values) v *= 2.0;  // exact in binary floating point
    }
    Genome expect = base;
    for (double& v : expect.values) v *= 2.0;
    CHECK(weight_average(doubled) == expect);

    auto incompatible = leaves;
    ShapeManifest other;
    other.layers.push_back({1, 1});
    incompatible.push_back(random_f32_genome(902, other));
    CHECK_THROWS_AS(weight_average(incompatible), ShapeError);
    CHECK_THROWS_AS(weight_average(std::vector<Genome>{}), ConfigError);
}

TEST_CASE("report JSON round-trips and keeps a stable key order") {
    const auto leaves = random_leaves(2, 1000);
    GaConfig cfg = small_config(51);
    cfg.generations = 3;
    const FitnessFn fitness = distance_fitness(random_f32_genome(1001));
    MergeOutcome outcome = execute_merge_plan(build_merge_plan(leaves, cfg),
                                              fitness);
    outcome.report.leaf_names = {"a.ckpt", "b.ckpt"};

    const auto doc = report_to_json(outcome.report);
    CHECK(doc.dump() == report_to_json(outcome.report).dump());
    CHECK(doc.dump().find("wall_seconds") == std::string::npos);
    const auto timed = report_to_json(outcome.report, true);
    CHECK(timed.dump().find("wall_seconds") != std::string::npos);

    const MergeReport back = report_from_json(doc);
    CHECK(back.leaf_names == outcome.report.leaf_names);
    CHECK(back.leaf_val_accuracy == outcome.report.leaf_val_accuracy);
    CHECK(back.weight_average_val_accuracy ==
          outcome.report.weight_average_val_accuracy);
    CHECK(back.final_val_accuracy == outcome.report.final_val_accuracy);
    CHECK(back.config.seed == cfg.seed);
    REQUIRE(back.nodes.size() == 1);
    CHECK(back.nodes[0].history.size() == 3);
    CHECK(back.nodes[0].history[2].best_fitness ==
          outcome.report.nodes[0].history[2].best_fitness);

    std::ostringstream table;
    print_report_table(table, back);
    CHECK(table.str().find("weight average") != std::string::npos);
    CHECK(table.str().find("merged (MeGA)") != std::string::npos);
}
