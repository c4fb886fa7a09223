#pragma once

#include <cstdint>

#include "brw/environment.hpp"
#include "brw/estimate.hpp"
#include "brw/rng.hpp"

namespace brw {

struct WalkOutcome {
    std::int64_t occupation = 0;       // T_n, vacant-site visits among steps 1..n
    bool survived_soft_kill = true;    // meaningful when killing was enabled
};

struct WalkOptions {
    unsigned workers = 0;
};

// Runs a simple random walk from the origin and counts the time spent on
// vacant sites between steps 1 and n.
WalkOutcome srw_occupation(const ObstacleField& field, std::int64_t n, Xoshiro256ss& rng);

// Empirical fraction of walks with |T_n/n - q| > eps, with binomial stderr.
SurvivalEstimate tail_probability_estimate(const ObstacleField& field, std::int64_t n, double eps,
                                           std::uint64_t replicates, std::uint64_t master_seed,
                                           const WalkOptions& opts = {});

// Soft-killing survival: at each vacant site the walker is killed with
// probability 1 - mu, independently. Both unbiased estimators of DV_q(n) are
// computed from the same walks: the raw kill-simulation fraction and the
// conditional mean of mu^{T_n} (the default for variance).
struct SoftKillEstimate {
    SurvivalEstimate killed;        // fraction of walks never killed
    SurvivalEstimate mean_power_t;  // sample mean of mu^{T_n}
};

SoftKillEstimate soft_kill_survival_mc(const ObstacleField& field, double mu, std::int64_t n,
                                       std::uint64_t replicates, std::uint64_t master_seed,
                                       const WalkOptions& opts = {});

}  // namespace brw
