#include "brw/brw_sim.hpp"

#include <cmath>
#include <stdexcept>

#include "brw/parallel.hpp"

namespace brw {

namespace {

EstimateMeta make_meta(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                       std::uint64_t master_seed) {
    EstimateMeta meta;
    meta.horizon = n;
    meta.dimension = field.dimension();
    meta.obstacle_p = field.spec().obstacle_probability;
    meta.env_seed = field.spec().master_seed;
    meta.replica_seed = master_seed;
    meta.law_id = law.id();
    return meta;
}

}  // namespace

Population Population::single_at_origin(int dimension) {
    if (dimension < 1) throw std::invalid_argument("population: dimension must be >= 1");
    Population pop;
    pop.dimension = dimension;
    pop.coords.assign(static_cast<std::size_t>(dimension), 0);
    return pop;
}

bool step_into(const Population& pop, Population& out, const ObstacleField& field,
               const OffspringLaw& law, Xoshiro256ss& rng, std::uint64_t cap) {
    const int d = pop.dimension;
    if (d != field.dimension()) {
        throw std::invalid_argument("brw_sim: population/field dimension mismatch");
    }
    out.dimension = d;
    out.generation = pop.generation + 1;
    out.coords.clear();

    const std::uint64_t directions = 2ULL * static_cast<std::uint64_t>(d);
    std::int32_t moved[3];
    const std::size_t count = pop.coords.size();
    for (std::size_t base = 0; base < count; base += static_cast<std::size_t>(d)) {
        for (int a = 0; a < d; ++a) moved[a] = pop.coords[base + static_cast<std::size_t>(a)];
        const std::uint64_t dir = rng.uniform_below(directions);
        moved[dir >> 1] += (dir & 1) ? 1 : -1;

        int copies = 1;
        if (field.is_vacant(std::span<const std::int32_t>(moved, static_cast<std::size_t>(d)))) {
            copies = law.sample(rng);
        }
        if (copies == 0) continue;
        if (out.size() + static_cast<std::uint64_t>(copies) > cap) return false;
        for (int c = 0; c < copies; ++c) {
            out.coords.insert(out.coords.end(), moved, moved + d);
        }
    }
    return true;
}

Population step(const Population& pop, const ObstacleField& field, const OffspringLaw& law,
                Xoshiro256ss& rng, std::uint64_t cap) {
    Population out;
    step_into(pop, out, field, law, rng, cap);
    return out;
}

ReplicaOutcome run_replica(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                           Xoshiro256ss& rng, std::uint64_t cap) {
    Population start = Population::single_at_origin(field.dimension());
    return run_replica_from(field, law, start.coords, n, rng, cap);
}

ReplicaOutcome run_replica_from(const ObstacleField& field, const OffspringLaw& law,
                                std::span<const std::int32_t> start, std::int64_t n,
                                Xoshiro256ss& rng, std::uint64_t cap) {
    if (n < 0) throw std::invalid_argument("brw_sim: horizon must be >= 0");
    Population cur;
    cur.dimension = field.dimension();
    cur.coords.assign(start.begin(), start.end());
    Population nxt;
    nxt.dimension = cur.dimension;

    ReplicaOutcome outcome;
    for (std::int64_t k = 0; k < n; ++k) {
        if (cur.size() == 0) break;  // extinction is absorbing
        if (!step_into(cur, nxt, field, law, rng, cap)) {
            outcome.truncated = true;
            outcome.survived = true;
            outcome.final_size = nxt.size();
            return outcome;
        }
        std::swap(cur.coords, nxt.coords);
        cur.generation = nxt.generation;
    }
    outcome.final_size = cur.size();
    outcome.survived = outcome.final_size >= 1;
    return outcome;
}

SurvivalEstimate estimate_survival_mc(const ObstacleField& field, const OffspringLaw& law,
                                      std::int64_t n, std::uint64_t replicates,
                                      std::uint64_t master_seed, const SimOptions& opts) {
    if (replicates < 1) throw std::invalid_argument("brw_sim: replicates must be >= 1");

    struct Partial {
        std::uint64_t survived = 0;
        std::uint64_t truncated = 0;
    };
    auto partials = map_chunks<Partial>(
        replicates, opts.workers, [&](std::uint64_t begin, std::uint64_t end) {
            Partial p;
            for (std::uint64_t r = begin; r < end; ++r) {
                auto rng = make_stream(master_seed, StreamDomain::McReplica, r);
                const ReplicaOutcome out = run_replica(field, law, n, rng, opts.population_cap);
                if (out.survived) ++p.survived;
                if (out.truncated) ++p.truncated;
            }
            return p;
        });

    std::uint64_t survived = 0;
    std::uint64_t truncated = 0;
    for (const auto& p : partials) {
        survived += p.survived;
        truncated += p.truncated;
    }

    SurvivalEstimate est;
    est.method = Method::DirectMc;
    est.replicates = replicates;
    est.truncated_count = truncated;
    est.estimate = static_cast<double>(survived) / static_cast<double>(replicates);
    est.stderr_ =
        std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(replicates));
    est.meta = make_meta(field, law, n, master_seed);
    return est;
}

SurvivalEstimate estimate_mean_population_mc(const ObstacleField& field, const OffspringLaw& law,
                                             std::int64_t n, std::uint64_t replicates,
                                             std::uint64_t master_seed, const SimOptions& opts) {
    if (replicates < 1) throw std::invalid_argument("brw_sim: replicates must be >= 1");

    struct Partial {
        std::uint64_t sum = 0;
        unsigned __int128 sum_sq = 0;
        std::uint64_t truncated = 0;
    };
    auto partials = map_chunks<Partial>(
        replicates, opts.workers, [&](std::uint64_t begin, std::uint64_t end) {
            Partial p;
            for (std::uint64_t r = begin; r < end; ++r) {
                auto rng = make_stream(master_seed, StreamDomain::McReplica, r);
                const ReplicaOutcome out = run_replica(field, law, n, rng, opts.population_cap);
                p.sum += out.final_size;
                p.sum_sq += static_cast<unsigned __int128>(out.final_size) * out.final_size;
                if (out.truncated) ++p.truncated;
            }
            return p;
        });

    unsigned __int128 sum = 0;
    unsigned __int128 sum_sq = 0;
    std::uint64_t truncated = 0;
    for (const auto& p : partials) {
        sum += p.sum;
        sum_sq += p.sum_sq;
        truncated += p.truncated;
    }

    const double r = static_cast<double>(replicates);
    const double mean = static_cast<double>(sum) / r;
    double variance = 0.0;
    if (replicates > 1) {
        variance = (static_cast<double>(sum_sq) - r * mean * mean) / (r - 1.0);
        variance = std::max(variance, 0.0);
    }

    SurvivalEstimate est;
    est.method = Method::DirectMc;
    est.replicates = replicates;
    est.truncated_count = truncated;
    est.estimate = mean;
    est.stderr_ = std::sqrt(variance / r);
    est.meta = make_meta(field, law, n, master_seed);
    return est;
}

}  // namespace brw
