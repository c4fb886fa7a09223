#include "brw/spine.hpp"

#include <cmath>
#include <stdexcept>

#include "brw/parallel.hpp"

namespace brw {

namespace {

constexpr double kCriticalTol = 1e-12;

void require_critical(const OffspringLaw& law) {
    if (std::abs(law.mean() - 1.0) > kCriticalTol) {
        throw std::invalid_argument("spine: the spine machinery requires a critical law");
    }
}

EstimateMeta spine_meta(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
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

// Core spine replica. The size-biased law is passed in so estimator loops
// construct it once.
SpineRealization run_spine_impl(const ObstacleField& field, const OffspringLaw& law,
                                const OffspringLaw& size_biased, std::int64_t n,
                                Xoshiro256ss& rng, bool track_labels, bool store_path,
                                std::uint64_t cap) {
    if (n < 0) throw std::invalid_argument("spine: horizon must be >= 0");
    const int d = field.dimension();
    const std::uint64_t directions = 2ULL * static_cast<std::uint64_t>(d);

    SpineRealization real;
    real.labels_tracked = track_labels;
    std::int32_t pos[3] = {0, 0, 0};
    if (store_path) {
        real.path.reserve(static_cast<std::size_t>((n + 1) * d));
        real.path.insert(real.path.end(), pos, pos + d);
    }

    for (std::int64_t t = 1; t <= n; ++t) {
        const std::uint64_t dir = rng.uniform_below(directions);
        pos[dir >> 1] += (dir & 1) ? 1 : -1;
        if (store_path) real.path.insert(real.path.end(), pos, pos + d);

        const std::span<const std::int32_t> here(pos, static_cast<std::size_t>(d));
        if (!field.is_vacant(here)) continue;  // nothing happens at obstacles
        ++real.vacant_visits;

        const int brood = size_biased.sample(rng);  // >= 1 by construction
        std::uint64_t spine_rank = 0;
        if (track_labels && brood > 1) {
            spine_rank = rng.uniform_below(static_cast<std::uint64_t>(brood));
        }

        for (int s = 0; s + 1 < brood; ++s) {
            if (real.truncated) break;
            const std::uint64_t budget = cap - std::min<std::uint64_t>(cap, real.total_population);
            ReplicaOutcome bush = run_replica_from(field, law, here, n - t, rng, budget);
            if (bush.truncated) real.truncated = true;
            real.total_population += bush.final_size;
            if (track_labels && bush.survived) {
                // sibling s occupies rank s, shifted past the spine's slot
                const std::uint64_t sibling_rank =
                    static_cast<std::uint64_t>(s) + (static_cast<std::uint64_t>(s) >= spine_rank);
                if (sibling_rank < spine_rank) real.spine_leftmost = false;
            }
        }
        if (real.total_population >= cap) real.truncated = true;
    }

    real.weight = real.truncated ? 1.0 / static_cast<double>(cap)
                                 : 1.0 / static_cast<double>(real.total_population);
    return real;
}

}  // namespace

SpineRealization run_spine(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                           Xoshiro256ss& rng, bool track_labels, std::uint64_t cap) {
    require_critical(law);
    const OffspringLaw biased = law.size_biased();
    return run_spine_impl(field, law, biased, n, rng, track_labels, /*store_path=*/true, cap);
}

SurvivalEstimate estimate_survival_is(const ObstacleField& field, const OffspringLaw& law,
                                      std::int64_t n, std::uint64_t replicates,
                                      std::uint64_t master_seed, const SpineOptions& opts) {
    require_critical(law);
    if (replicates < 1) throw std::invalid_argument("spine: replicates must be >= 1");
    const OffspringLaw biased = law.size_biased();

    struct Partial {
        double sum_w = 0.0;
        double sum_w_sq = 0.0;
        std::uint64_t truncated = 0;
    };
    auto partials = map_chunks<Partial>(
        replicates, opts.workers, [&](std::uint64_t begin, std::uint64_t end) {
            Partial p;
            for (std::uint64_t r = begin; r < end; ++r) {
                auto rng = make_stream(master_seed, StreamDomain::SpineReplica, r);
                const SpineRealization real =
                    run_spine_impl(field, law, biased, n, rng, /*track_labels=*/false,
                                   /*store_path=*/false, opts.population_cap);
                p.sum_w += real.weight;
                p.sum_w_sq += real.weight * real.weight;
                if (real.truncated) ++p.truncated;
            }
            return p;
        });

    double sum_w = 0.0;
    double sum_w_sq = 0.0;
    std::uint64_t truncated = 0;
    for (const auto& p : partials) {
        sum_w += p.sum_w;
        sum_w_sq += p.sum_w_sq;
        truncated += p.truncated;
    }

    const double r = static_cast<double>(replicates);
    SurvivalEstimate est;
    est.method = Method::SpineIs;
    est.replicates = replicates;
    est.truncated_count = truncated;
    est.estimate = sum_w / r;
    double variance = 0.0;
    if (replicates > 1) {
        variance = (sum_w_sq - r * est.estimate * est.estimate) / (r - 1.0);
        variance = std::max(variance, 0.0);
    }
    est.stderr_ = std::sqrt(variance / r);
    est.meta = spine_meta(field, law, n, master_seed);
    return est;
}

OccupationStats occupation_frequency_stats(const ObstacleField& field, std::int64_t n,
                                           std::uint64_t replicates, std::uint64_t master_seed,
                                           double eps, const SpineOptions& opts) {
    if (n < 1) throw std::invalid_argument("spine: horizon must be >= 1");
    if (replicates < 1) throw std::invalid_argument("spine: replicates must be >= 1");
    if (!(eps > 0.0)) throw std::invalid_argument("spine: eps must be > 0");
    const int d = field.dimension();
    const std::uint64_t directions = 2ULL * static_cast<std::uint64_t>(d);
    const double q = field.spec().vacancy_probability();

    struct Partial {
        std::uint64_t sum_l = 0;
        unsigned __int128 sum_l_sq = 0;
        std::uint64_t exceed = 0;
    };
    auto partials = map_chunks<Partial>(
        replicates, opts.workers, [&](std::uint64_t begin, std::uint64_t end) {
            Partial p;
            std::int32_t pos[3];
            for (std::uint64_t r = begin; r < end; ++r) {
                auto rng = make_stream(master_seed, StreamDomain::SpineReplica, r);
                pos[0] = pos[1] = pos[2] = 0;
                std::int64_t visits = 0;
                for (std::int64_t t = 1; t <= n; ++t) {
                    const std::uint64_t dir = rng.uniform_below(directions);
                    pos[dir >> 1] += (dir & 1) ? 1 : -1;
                    if (field.is_vacant(
                            std::span<const std::int32_t>(pos, static_cast<std::size_t>(d)))) {
                        ++visits;
                    }
                }
                p.sum_l += static_cast<std::uint64_t>(visits);
                p.sum_l_sq += static_cast<unsigned __int128>(visits) *
                              static_cast<unsigned __int128>(visits);
                if (std::abs(static_cast<double>(visits) / static_cast<double>(n) - q) > eps) {
                    ++p.exceed;
                }
            }
            return p;
        });

    std::uint64_t sum_l = 0;
    unsigned __int128 sum_l_sq = 0;
    std::uint64_t exceed = 0;
    for (const auto& p : partials) {
        sum_l += p.sum_l;
        sum_l_sq += p.sum_l_sq;
        exceed += p.exceed;
    }

    const double r = static_cast<double>(replicates);
    const double nd = static_cast<double>(n);
    OccupationStats stats;
    stats.horizon = n;
    stats.replicates = replicates;
    stats.eps = eps;
    stats.mean = static_cast<double>(sum_l) / (r * nd);
    if (replicates > 1) {
        const double mean_l = static_cast<double>(sum_l) / r;
        double var_l = (static_cast<double>(sum_l_sq) - r * mean_l * mean_l) / (r - 1.0);
        var_l = std::max(var_l, 0.0);
        stats.stddev = std::sqrt(var_l) / nd;
    }
    stats.tail_fraction = static_cast<double>(exceed) / r;
    return stats;
}

ConditionalCheck conditional_population_check(const ObstacleField& field, const OffspringLaw& law,
                                              std::int64_t n, std::uint64_t replicates,
                                              std::uint64_t master_seed,
                                              const SpineOptions& opts) {
    require_critical(law);
    if (replicates < 1) throw std::invalid_argument("spine: replicates must be >= 1");
    const OffspringLaw biased = law.size_biased();

    struct Partial {
        std::uint64_t accepted = 0;
        double sum_z = 0.0;
        double sum_z_sq = 0.0;
        std::uint64_t truncated = 0;
    };
    auto partials = map_chunks<Partial>(
        replicates, opts.workers, [&](std::uint64_t begin, std::uint64_t end) {
            Partial p;
            for (std::uint64_t r = begin; r < end; ++r) {
                auto rng = make_stream(master_seed, StreamDomain::SpineReplica, r);
                const SpineRealization real =
                    run_spine_impl(field, law, biased, n, rng, /*track_labels=*/true,
                                   /*store_path=*/false, opts.population_cap);
                if (real.truncated) ++p.truncated;
                if (!real.spine_leftmost) continue;
                ++p.accepted;
                const double z = static_cast<double>(real.total_population);
                p.sum_z += z;
                p.sum_z_sq += z * z;
            }
            return p;
        });

    std::uint64_t accepted = 0;
    std::uint64_t truncated = 0;
    double sum_z = 0.0;
    double sum_z_sq = 0.0;
    for (const auto& p : partials) {
        accepted += p.accepted;
        truncated += p.truncated;
        sum_z += p.sum_z;
        sum_z_sq += p.sum_z_sq;
    }

    ConditionalCheck check;
    check.replicates = replicates;
    check.accepted = accepted;
    check.truncated = truncated;
    check.conclusive = accepted >= 100;

    const double u = expected_population(field, law, n);
    const double s = survival_exact(field, law, n);
    check.dp_value = u / s;

    if (accepted > 0) {
        const double a = static_cast<double>(accepted);
        check.is_estimate = sum_z / a;
        if (accepted > 1) {
            double variance = (sum_z_sq - a * check.is_estimate * check.is_estimate) / (a - 1.0);
            variance = std::max(variance, 0.0);
            check.is_stderr = std::sqrt(variance / a);
        }
        check.agree = std::abs(check.is_estimate - check.dp_value) <= 3.0 * check.is_stderr;
        if (n == 0) check.agree = check.is_estimate == check.dp_value;
    }
    return check;
}

}  // namespace brw
