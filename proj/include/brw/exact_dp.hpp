#pragma once

#include <cstdint>
#include <vector>

#include "brw/environment.hpp"
#include "brw/errors.hpp"
#include "brw/offspring.hpp"

namespace brw {

// Finite-horizon lattice dynamic programming on the centered L-infinity box of
// radius n. A walk of n nearest-neighbor steps cannot leave that box, so the
// truncation is exact, not an approximation. Dimensions 1..3 are supported;
// the (2n+1)^d storage is checked against the memory budget up front.

struct DpOptions {
    std::uint64_t memory_budget_bytes = 1ULL << 30;
};

enum class DpKind { ExpectationU, ExtinctionE, Dv };

struct DPField {
    DpKind kind = DpKind::ExpectationU;
    int dimension = 1;
    std::int64_t horizon = 0;
    std::int64_t radius = 0;
    bool log_space = false;
    std::vector<double> values;  // dense, offset coordinates, row-major

    double at(const Site& site) const;
    double origin_value() const;
};

// u_n(0) = E^w|Z_n| via the backward recursion
//   u_k(x) = (1/2d) sum_{y~x} u_{k-1}(y) * (1 at obstacles, mean at vacant sites)
double expected_population(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                           const DpOptions& opts = {});

// Quenched survival probability P^w(S_n), computed on the survival complement
//   s_k(x) = (1/2d) sum_{y~x} [ s_{k-1}(y) at obstacles, G(s_{k-1}(y)) at vacant sites ]
// with s_0 = 1 and G(s) = 1 - phi(1-s); returns s_n(0) = 1 - e_n(0).
double survival_exact(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                      const DpOptions& opts = {});

// log P^w(S_n); same recursion run in log space (log-sum-exp combination), for
// subcritical horizons where the probability underflows linear doubles.
double log_survival_exact(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                          const DpOptions& opts = {});

// DV_q(n) = E^w[ mu^{T_n} ] for a single walker with soft killing; identical
// recursion to expected_population with multiplier mu, exposed separately for
// the single-walker semantics. Requires mu in (0,1].
double dv_exact(const ObstacleField& field, double mu, std::int64_t n, const DpOptions& opts = {});

// log DV_q(n), exact log-space evaluation.
double log_dv_exact(const ObstacleField& field, double mu, std::int64_t n,
                    const DpOptions& opts = {});

// Validation hook: the expectation recursion with explicit multipliers applied
// at obstacle / vacant destination sites. expected_population == kernel(1, mean).
double expectation_kernel(const ObstacleField& field, double obstacle_mult, double vacant_mult,
                          std::int64_t n, const DpOptions& opts = {});

// Full fields for invariant checks.
DPField expectation_field(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                          const DpOptions& opts = {});
DPField extinction_field(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                         const DpOptions& opts = {});

struct SandwichResult {
    double lower = 0.0;  // DV with mu* = 1 - p0
    double exact = 0.0;  // P^w(S_n)
    double upper = 0.0;  // DV with mu = mean
    bool holds = false;
};

// Subcritical coupling bounds: DV^{mu*}(n) <= P^w(S_n) <= DV^{mu}(n), checked
// with 1e-12 slack. Rejects critical laws.
SandwichResult sandwich_check(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                              const DpOptions& opts = {});

}  // namespace brw
