#pragma once

#include <cstdint>
#include <vector>

#include "brw/environment.hpp"
#include "brw/estimate.hpp"
#include "brw/offspring.hpp"
#include "brw/rng.hpp"

namespace brw {

inline constexpr std::uint64_t kDefaultPopulationCap = 10'000'000;

// Particle positions of one generation, stored as a flat coordinate array
// (dimension entries per particle). Multiset semantics; order carries no
// meaning beyond reproducibility of the sampling sequence.
struct Population {
    int dimension = 1;
    std::int64_t generation = 0;
    std::vector<std::int32_t> coords;

    std::uint64_t size() const {
        return static_cast<std::uint64_t>(coords.size()) / static_cast<std::uint64_t>(dimension);
    }

    static Population single_at_origin(int dimension);
};

struct ReplicaOutcome {
    bool survived = false;
    std::uint64_t final_size = 0;
    bool truncated = false;  // population cap hit; counted as a survivor
};

struct SimOptions {
    std::uint64_t population_cap = kDefaultPopulationCap;
    unsigned workers = 0;  // 0 = hardware concurrency
};

// One generation of the dynamics: every particle moves to a uniformly chosen
// nearest neighbor; at a vacant destination it is replaced by an offspring
// draw, at an obstacle nothing happens to it. Returns false if appending
// offspring would push the next generation past `cap` (output holds the
// truncated prefix).
bool step_into(const Population& pop, Population& out, const ObstacleField& field,
               const OffspringLaw& law, Xoshiro256ss& rng,
               std::uint64_t cap = kDefaultPopulationCap);

Population step(const Population& pop, const ObstacleField& field, const OffspringLaw& law,
                Xoshiro256ss& rng, std::uint64_t cap = kDefaultPopulationCap);

// Runs one replica from a single particle at the origin up to horizon n,
// early-exiting on extinction.
ReplicaOutcome run_replica(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                           Xoshiro256ss& rng, std::uint64_t cap = kDefaultPopulationCap);

// Same dynamics started from an arbitrary site (used for the spine's bushes).
ReplicaOutcome run_replica_from(const ObstacleField& field, const OffspringLaw& law,
                                std::span<const std::int32_t> start, std::int64_t n,
                                Xoshiro256ss& rng, std::uint64_t cap = kDefaultPopulationCap);

// Fraction of surviving replicas with binomial standard error. Replica r draws
// from the stream derived from (master_seed, McReplica, r), so the result is
// invariant to the worker count. Truncated replicas count as survivors and are
// reported in truncated_count.
SurvivalEstimate estimate_survival_mc(const ObstacleField& field, const OffspringLaw& law,
                                      std::int64_t n, std::uint64_t replicates,
                                      std::uint64_t master_seed, const SimOptions& opts = {});

// Sample mean of |Z_n| with standard error; same replica stream contract.
SurvivalEstimate estimate_mean_population_mc(const ObstacleField& field, const OffspringLaw& law,
                                             std::int64_t n, std::uint64_t replicates,
                                             std::uint64_t master_seed,
                                             const SimOptions& opts = {});

}  // namespace brw
