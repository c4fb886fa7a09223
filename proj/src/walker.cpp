#include "brw/walker.hpp"

#include <cmath>
#include <stdexcept>

#include "brw/parallel.hpp"

namespace brw {

namespace {

EstimateMeta walk_meta(const ObstacleField& field, std::int64_t n, std::uint64_t master_seed) {
    EstimateMeta meta;
    meta.horizon = n;
    meta.dimension = field.dimension();
    meta.obstacle_p = field.spec().obstacle_probability;
    meta.env_seed = field.spec().master_seed;
    meta.replica_seed = master_seed;
    meta.law_id = "srw";
    return meta;
}

}  // namespace

WalkOutcome srw_occupation(const ObstacleField& field, std::int64_t n, Xoshiro256ss& rng) {
    if (n < 1) throw std::invalid_argument("walker: horizon must be >= 1");
    const int d = field.dimension();
    const std::uint64_t directions = 2ULL * static_cast<std::uint64_t>(d);
    std::int32_t pos[3] = {0, 0, 0};

    WalkOutcome out;
    for (std::int64_t i = 1; i <= n; ++i) {
        const std::uint64_t dir = rng.uniform_below(directions);
        pos[dir >> 1] += (dir & 1) ? 1 : -1;
        if (field.is_vacant(std::span<const std::int32_t>(pos, static_cast<std::size_t>(d)))) {
            ++out.occupation;
        }
    }
    return out;
}

SurvivalEstimate tail_probability_estimate(const ObstacleField& field, std::int64_t n, double eps,
                                           std::uint64_t replicates, std::uint64_t master_seed,
                                           const WalkOptions& opts) {
    if (!(eps > 0.0)) throw std::invalid_argument("walker: eps must be > 0");
    if (replicates < 1) throw std::invalid_argument("walker: replicates must be >= 1");
    const double q = field.spec().vacancy_probability();

    auto partials = map_chunks<std::uint64_t>(
        replicates, opts.workers, [&](std::uint64_t begin, std::uint64_t end) {
            std::uint64_t exceed = 0;
            for (std::uint64_t r = begin; r < end; ++r) {
                auto rng = make_stream(master_seed, StreamDomain::WalkerReplica, r);
                const WalkOutcome out = srw_occupation(field, n, rng);
                const double ratio = static_cast<double>(out.occupation) / static_cast<double>(n);
                if (std::abs(ratio - q) > eps) ++exceed;
            }
            return exceed;
        });

    std::uint64_t exceed = 0;
    for (auto p : partials) exceed += p;

    SurvivalEstimate est;
    est.method = Method::DirectMc;
    est.replicates = replicates;
    est.estimate = static_cast<double>(exceed) / static_cast<double>(replicates);
    est.stderr_ =
        std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(replicates));
    est.meta = walk_meta(field, n, master_seed);
    return est;
}

SoftKillEstimate soft_kill_survival_mc(const ObstacleField& field, double mu, std::int64_t n,
                                       std::uint64_t replicates, std::uint64_t master_seed,
                                       const WalkOptions& opts) {
    if (!(mu > 0.0 && mu <= 1.0)) throw std::invalid_argument("walker: mu must lie in (0,1]");
    if (n < 1) throw std::invalid_argument("walker: horizon must be >= 1");
    if (replicates < 1) throw std::invalid_argument("walker: replicates must be >= 1");

    const int d = field.dimension();
    const std::uint64_t directions = 2ULL * static_cast<std::uint64_t>(d);

    struct Partial {
        std::uint64_t alive = 0;
        double sum_pow = 0.0;
        double sum_pow_sq = 0.0;
    };
    auto partials = map_chunks<Partial>(
        replicates, opts.workers, [&](std::uint64_t begin, std::uint64_t end) {
            Partial p;
            std::int32_t pos[3];
            for (std::uint64_t r = begin; r < end; ++r) {
                auto rng = make_stream(master_seed, StreamDomain::WalkerReplica, r);
                pos[0] = pos[1] = pos[2] = 0;
                std::int64_t occupation = 0;
                bool alive = true;
                // the walk continues past a kill so that the full T_n feeds the
                // mu^{T_n} average
                for (std::int64_t i = 1; i <= n; ++i) {
                    const std::uint64_t dir = rng.uniform_below(directions);
                    pos[dir >> 1] += (dir & 1) ? 1 : -1;
                    if (field.is_vacant(
                            std::span<const std::int32_t>(pos, static_cast<std::size_t>(d)))) {
                        ++occupation;
                        if (rng.uniform01() < 1.0 - mu) alive = false;
                    }
                }
                if (alive) ++p.alive;
                const double w = std::pow(mu, static_cast<double>(occupation));
                p.sum_pow += w;
                p.sum_pow_sq += w * w;
            }
            return p;
        });

    std::uint64_t alive = 0;
    double sum_pow = 0.0;
    double sum_pow_sq = 0.0;
    for (const auto& p : partials) {
        alive += p.alive;
        sum_pow += p.sum_pow;
        sum_pow_sq += p.sum_pow_sq;
    }

    const double r = static_cast<double>(replicates);
    SoftKillEstimate out;

    out.killed.method = Method::DirectMc;
    out.killed.replicates = replicates;
    out.killed.estimate = static_cast<double>(alive) / r;
    out.killed.stderr_ = std::sqrt(out.killed.estimate * (1.0 - out.killed.estimate) / r);
    out.killed.meta = walk_meta(field, n, master_seed);

    out.mean_power_t.method = Method::DirectMc;
    out.mean_power_t.replicates = replicates;
    out.mean_power_t.estimate = sum_pow / r;
    double variance = 0.0;
    if (replicates > 1) {
        variance = (sum_pow_sq - r * out.mean_power_t.estimate * out.mean_power_t.estimate) /
                   (r - 1.0);
        variance = std::max(variance, 0.0);
    }
    out.mean_power_t.stderr_ = std::sqrt(variance / r);
    out.mean_power_t.meta = walk_meta(field, n, master_seed);
    return out;
}

}  // namespace brw
