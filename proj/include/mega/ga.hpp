#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "mega/genome.hpp"
#include "mega/rng.hpp"

namespace mega {

struct GaConfig {
    std::uint32_t population_size = 20;        // N
    std::uint32_t generations = 20;            // G
    std::uint32_t parents_per_generation = 4;  // K, even
    double mutation_rate = 0.02;               // per-coordinate probability
    double mutation_sigma = 0.01;              // stddev of additive noise
    std::uint32_t tournament_size = 3;         // t
    std::uint32_t elite_count = 1;
    std::uint64_t seed = 0;
    bool seed_endpoints = true;  // individuals 0 and 1 are exact parent copies

    void validate() const;  // ConfigError on violated bounds
};

/// Candidate solution; fitness is cached after first evaluation.
struct Individual {
    Genome genome;
    std::optional<double> fitness;
};

using Population = std::vector<Individual>;

/// Deterministic for a fixed validation set; higher is better.
using FitnessFn = std::function<double(const Genome&)>;

struct GenerationRecord {
    std::uint32_t generation = 0;  // 1-based
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
    std::uint32_t best_individual_id = 0;  // index in the post-update population
};

// The engine's four named streams, all derived from GaConfig::seed. Draws
// happen on the coordinator only, never inside fitness evaluation, so thread
// count cannot change results. Per-generation consumption:
//   select:  K rounds x t draws (tournament), then per offspring 2 draws
//            (parent pair without replacement within the pair);
//   cross:   1 uniform per offspring (the blend coefficient);
//   mutate:  1 uniform per coordinate, plus 2 per triggered coordinate.
struct GaStreams {
    Rng init;
    Rng select;
    Rng cross;
    Rng mutate;

    explicit GaStreams(std::uint64_t seed)
        : init(seed_stream(seed, "ga-init")),
          select(seed_stream(seed, "ga-select")),
          cross(seed_stream(seed, "ga-cross")),
          mutate(seed_stream(seed, "ga-mutate")) {}
};

/// child = alpha * a + (1 - alpha) * b, one scalar for every coordinate,
/// rounded to checkpoint (f32) precision.
Genome blend(const Genome& a, const Genome& b, double alpha);

/// N individuals blended from the two parents, one alpha ~ U(0,1) per
/// individual. With seed_endpoints, individuals 0 and 1 are verbatim copies
/// of a and b and only the remaining N-2 draw an alpha.
Population init_population(const Genome& a, const Genome& b, const GaConfig& cfg,
                           Rng& init_rng);

/// Fill every missing fitness cache. Evaluations may run on `threads` workers;
/// results are independent of scheduling. Throws FitnessError (lowest failing
/// index) if the fitness function throws.
void evaluate(Population& population, const FitnessFn& fitness, unsigned threads = 1);

/// K independent tournament rounds. Each round samples t distinct individuals
/// (partial Fisher-Yates, t draws) and returns the fitness argmax, ties to the
/// lower population index. Requires cached fitness for all individuals.
std::vector<std::uint32_t> tournament_select(const Population& population,
                                             std::uint32_t tournament_size,
                                             std::uint32_t k, Rng& rng);

/// blend() with beta ~ U(0,1) (one draw).
Genome crossover(const Genome& a, const Genome& b, Rng& rng);

/// Coordinate-major: one uniform per coordinate; when it falls below p_mut,
/// add sigma * gaussian (two more draws) and round to f32 precision.
Genome mutate(Genome child, double p_mut, double sigma, Rng& rng);

/// One full generation: elitism, tournament selection, pair-with-replacement
/// offspring (crossover + mutation), offspring evaluation, record of the
/// post-update population. The population is replaced in place.
GenerationRecord step_generation(Population& population, const GaConfig& cfg,
                                 const FitnessFn& fitness, GaStreams& streams,
                                 unsigned threads = 1);

struct MegaResult {
    Genome best;
    double best_fitness = 0.0;
    std::vector<GenerationRecord> history;
};

/// Algorithm: blend-initialize N individuals from the two parents, then for G
/// generations evaluate, tournament-select K parents, produce offspring by
/// crossover + mutation, and carry the elite forward. Returns the best
/// individual observed across all generations (initial population included)
/// and one record per generation. Fully determined by (a, b, cfg).
MegaResult run_mega(const Genome& a, const Genome& b, const GaConfig& cfg,
                    const FitnessFn& fitness, unsigned threads = 1);

/// Header "generation,best_fitness,mean_fitness", one row per generation.
void write_history_csv(std::ostream& out, std::span<const GenerationRecord> history);

}  // namespace mega
