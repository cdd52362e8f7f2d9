#include "mega/ga.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <thread>

#include "mega/errors.hpp"

namespace mega {

namespace {

void require_compatible(const Genome& a, const Genome& b) {
    if (!compatible(a, b)) {
        throw ShapeError("genomes have incompatible manifests");
    }
}

std::uint32_t best_index(const Population& population) {
    std::uint32_t best = 0;
    for (std::uint32_t i = 1; i < population.size(); ++i) {
        if (*population[i].fitness > *population[best].fitness) best = i;
    }
    return best;
}

/// Indices of the `count` best individuals, fitness descending, population
/// index ascending on ties.
std::vector<std::uint32_t> top_indices(const Population& population,
                                       std::uint32_t count) {
    std::vector<std::uint32_t> idx(population.size());
    for (std::uint32_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
        return *population[a].fitness > *population[b].fitness;
    });
    idx.resize(count);
    return idx;
}

}  // namespace

void GaConfig::validate() const {
    if (population_size == 0) throw ConfigError("population_size must be >= 1");
    if (generations == 0) throw ConfigError("generations must be >= 1");
    if (parents_per_generation < 2 || parents_per_generation % 2 != 0) {
        throw ConfigError("parents_per_generation must be a positive even number");
    }
    if (parents_per_generation > population_size) {
        throw ConfigError("parents_per_generation cannot exceed population_size");
    }
    if (mutation_rate < 0.0 || mutation_rate > 1.0) {
        throw ConfigError("mutation_rate must lie in [0, 1]");
    }
    if (mutation_sigma < 0.0) throw ConfigError("mutation_sigma must be >= 0");
    if (tournament_size < 1 || tournament_size > population_size) {
        throw ConfigError("tournament_size must lie in [1, population_size]");
    }
    if (elite_count < 1 || elite_count >= population_size) {
        throw ConfigError("elite_count must lie in [1, population_size)");
    }
    if (seed_endpoints && population_size < 2) {
        throw ConfigError("seed_endpoints needs population_size >= 2");
    }
}

Genome blend(const Genome& a, const Genome& b, double alpha) {
    require_compatible(a, b);
    Genome child;
    child.manifest = a.manifest;
    child.values.resize(a.values.size());
    for (std::size_t c = 0; c < a.values.size(); ++c) {
        child.values[c] = round_to_f32(alpha * a.values[c] + (1.0 - alpha) * b.values[c]);
    }
    return child;
}

Population init_population(const Genome& a, const Genome& b, const GaConfig& cfg,
                           Rng& init_rng) {
    cfg.validate();
    require_compatible(a, b);
    Population population;
    population.reserve(cfg.population_size);
    std::uint32_t i = 0;
    if (cfg.seed_endpoints) {
        population.push_back({a, std::nullopt});
        population.push_back({b, std::nullopt});
        i = 2;
    }
    for (; i < cfg.population_size; ++i) {
        population.push_back({blend(a, b, init_rng.uniform()), std::nullopt});
    }
    return population;
}

void evaluate(Population& population, const FitnessFn& fitness, unsigned threads) {
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < population.size(); ++i) {
        if (!population[i].fitness) pending.push_back(i);
    }
    if (pending.empty()) return;

    const unsigned workers = std::max(1u, std::min<unsigned>(
                                              threads, static_cast<unsigned>(
                                                           pending.size())));
    if (workers == 1) {
        for (std::size_t i : pending) {
            try {
                population[i].fitness = fitness(population[i].genome);
            } catch (const std::exception& e) {
                throw FitnessError(i, e.what());
            }
        }
        return;
    }

    std::vector<std::exception_ptr> failures(pending.size());
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const std::size_t slot = next.fetch_add(1);
            if (slot >= pending.size()) return;
            const std::size_t i = pending[slot];
            try {
                population[i].fitness = fitness(population[i].genome);
            } catch (...) {
                failures[slot] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();

    for (std::size_t slot = 0; slot < pending.size(); ++slot) {
        if (failures[slot]) {
            try {
                std::rethrow_exception(failures[slot]);
            } catch (const std::exception& e) {
                throw FitnessError(pending[slot], e.what());
            }
        }
    }
}

std::vector<std::uint32_t> tournament_select(const Population& population,
                                             std::uint32_t tournament_size,
                                             std::uint32_t k, Rng& rng) {
    const auto n = static_cast<std::uint32_t>(population.size());
    if (tournament_size < 1 || tournament_size > n) {
        throw ConfigError("tournament_size must lie in [1, population size]");
    }
    for (const auto& ind : population) {
        if (!ind.fitness) {
            throw ConfigError("tournament selection requires cached fitness");
        }
    }
    std::vector<std::uint32_t> parents;
    parents.reserve(k);
    for (std::uint32_t round = 0; round < k; ++round) {
        const auto entrants = sample_without_replacement(rng, n, tournament_size);
        std::uint32_t winner = entrants[0];
        for (const auto e : entrants) {
            const double f = *population[e].fitness;
            const double w = *population[winner].fitness;
            if (f > w || (f == w && e < winner)) winner = e;
        }
        parents.push_back(winner);
    }
    return parents;
}

Genome crossover(const Genome& a, const Genome& b, Rng& rng) {
    require_compatible(a, b);
    return blend(a, b, rng.uniform());
}

Genome mutate(Genome child, double p_mut, double sigma, Rng& rng) {
    for (double& v : child.values) {
        const double u = rng.uniform();
        if (u < p_mut) {
            v = round_to_f32(v + sigma * rng.gaussian());
        }
    }
    return child;
}

GenerationRecord step_generation(Population& population, const GaConfig& cfg,
                                 const FitnessFn& fitness, GaStreams& streams,
                                 unsigned threads) {
    cfg.validate();
    if (population.size() != cfg.population_size) {
        throw ConfigError("population size does not match the configuration");
    }
    for (const auto& ind : population) {
        if (!ind.fitness) {
            throw ConfigError("step_generation requires an evaluated population");
        }
    }

    const auto elites = top_indices(population, cfg.elite_count);
    const auto parents = tournament_select(population, cfg.tournament_size,
                                           cfg.parents_per_generation,
                                           streams.select);

    Population next;
    next.reserve(cfg.population_size);
    for (const auto e : elites) next.push_back(population[e]);

    const std::uint32_t k = cfg.parents_per_generation;
    while (next.size() < cfg.population_size) {
        // A random ordered pair of distinct parent slots.
        const auto ia = static_cast<std::uint32_t>(streams.select.below(k));
        auto ib = static_cast<std::uint32_t>(streams.select.below(k - 1));
        if (ib >= ia) ++ib;
        Genome child = crossover(population[parents[ia]].genome,
                                 population[parents[ib]].genome, streams.cross);
        child = mutate(std::move(child), cfg.mutation_rate, cfg.mutation_sigma,
                       streams.mutate);
        next.push_back({std::move(child), std::nullopt});
    }

    evaluate(next, fitness, threads);
    population = std::move(next);

    GenerationRecord record;
    record.best_individual_id = best_index(population);
    record.best_fitness = *population[record.best_individual_id].fitness;
    double sum = 0.0;
    for (const auto& ind : population) sum += *ind.fitness;
    record.mean_fitness = sum / static_cast<double>(population.size());
    return record;
}

MegaResult run_mega(const Genome& a, const Genome& b, const GaConfig& cfg,
                    const FitnessFn& fitness, unsigned threads) {
    cfg.validate();
    require_compatible(a, b);

    GaStreams streams(cfg.seed);
    Population population = init_population(a, b, cfg, streams.init);
    evaluate(population, fitness, threads);

    MegaResult result;
    const auto first_best = best_index(population);
    result.best = population[first_best].genome;
    result.best_fitness = *population[first_best].fitness;

    result.history.reserve(cfg.generations);
    for (std::uint32_t g = 1; g <= cfg.generations; ++g) {
        GenerationRecord record =
            step_generation(population, cfg, fitness, streams, threads);
        record.generation = g;
        if (record.best_fitness > result.best_fitness) {
            result.best = population[record.best_individual_id].genome;
            result.best_fitness = record.best_fitness;
        }
        result.history.push_back(record);
    }
    return result;
}

void write_history_csv(std::ostream& out,
                       std::span<const GenerationRecord> history) {
    out << "generation,best_fitness,mean_fitness\n";
    char line[96];
    for (const auto& rec : history) {
        std::snprintf(line, sizeof(line), "%u,%.17g,%.17g\n", rec.generation,
                      rec.best_fitness, rec.mean_fitness);
        out << line;
    }
}

}  // namespace mega
