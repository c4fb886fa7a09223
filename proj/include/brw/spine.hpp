#pragma once

#include <cstdint>
#include <vector>

#include "brw/brw_sim.hpp"
#include "brw/environment.hpp"
#include "brw/estimate.hpp"
#include "brw/exact_dp.hpp"
#include "brw/offspring.hpp"

namespace brw {

// Size-biased branching random walk with a distinguished spine. The spine
// moves as a plain simple random walk; at every vacant site it splits
// according to the size-biased offspring law (always into two for critical
// binary), the non-spine offspring launching ordinary BRW bushes. The process
// is immortal, and reweighting by 1/|Z_n| recovers ordinary survival
// probabilities (change of measure by the unit-mean martingale |Z|).
//
// Spine machinery is restricted to critical laws.
struct SpineRealization {
    std::vector<std::int32_t> path;      // X_0..X_n, (n+1) * dimension entries
    std::int64_t vacant_visits = 0;      // L_n, vacant sites among X_1..X_n
    std::uint64_t total_population = 1;  // |Z_n| of the size-biased tree
    double weight = 1.0;                 // 1/|Z_n|; 1/cap when truncated
    bool truncated = false;
    bool labels_tracked = false;
    bool spine_leftmost = true;          // the A_n indicator; valid when labels_tracked
};

struct SpineOptions {
    std::uint64_t population_cap = kDefaultPopulationCap;
    unsigned workers = 0;
};

SpineRealization run_spine(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                           Xoshiro256ss& rng, bool track_labels = false,
                           std::uint64_t cap = kDefaultPopulationCap);

// Importance-sampling estimator of P^w(S_n): the sample mean of 1/|Z_n| over
// spine replicas. Unbiased since E_hat[1/|Z_n|] = P(S_n). Truncated replicas
// contribute 1/cap (recorded upward bias).
SurvivalEstimate estimate_survival_is(const ObstacleField& field, const OffspringLaw& law,
                                      std::int64_t n, std::uint64_t replicates,
                                      std::uint64_t master_seed, const SpineOptions& opts = {});

// Statistics of L_n/n over spine replicas. The bushes do not influence the
// spine's motion, so only the spine walk itself is simulated here.
struct OccupationStats {
    double mean = 0.0;
    double stddev = 0.0;
    double tail_fraction = 0.0;  // fraction of replicas with |L_n/n - q| > eps
    double eps = 0.0;
    std::int64_t horizon = 0;
    std::uint64_t replicates = 0;
};

OccupationStats occupation_frequency_stats(const ObstacleField& field, std::int64_t n,
                                           std::uint64_t replicates, std::uint64_t master_seed,
                                           double eps = 0.1, const SpineOptions& opts = {});

// Rejection-sampling check of the conditional-law identity
//   E^w(|Z_n| | S_n) = E_hat_*(|Z_n| | A_n),
// where A_n = {the spine is the leftmost particle at time n} under uniformly
// random fission rank labels. The left side is expected_population /
// survival_exact from the exact DP. Acceptance of A_n has probability
// P^w(S_n), so keep n small.
struct ConditionalCheck {
    double is_estimate = 0.0;  // mean |Z_n| over accepted replicas
    double is_stderr = 0.0;
    double dp_value = 0.0;     // expected_population / survival_exact
    bool agree = false;        // within 3 stderr
    bool conclusive = false;   // at least 100 accepted replicas
    std::uint64_t accepted = 0;
    std::uint64_t replicates = 0;
    std::uint64_t truncated = 0;
};

ConditionalCheck conditional_population_check(const ObstacleField& field, const OffspringLaw& law,
                                              std::int64_t n, std::uint64_t replicates,
                                              std::uint64_t master_seed,
                                              const SpineOptions& opts = {});

}  // namespace brw
