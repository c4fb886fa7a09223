#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "brw/rng.hpp"

namespace brw {

// Supercritical is never accepted from user input; it only appears on laws
// produced by size_biased(), whose mean exceeds 1.
enum class Regime { Critical, Subcritical, Supercritical };

// Finite-support offspring distribution. Finite support makes the L log L
// moment condition automatic and lets sampling use an exact cumulative table.
// Supercritical laws (mean > 1) are rejected at construction.
class OffspringLaw {
public:
    struct Mass {
        int count;    // offspring number k
        double prob;  // p_k
    };

    // {0: 1/2, 2: 1/2}; the paper's critical binary branching law.
    static OffspringLaw critical_binary();

    // Validates and normalizes an explicit mass list. The masses must be
    // nonnegative and sum to 1 within 1e-12 before the exact renormalization.
    static OffspringLaw from_masses(const std::vector<Mass>& masses);

    const std::vector<Mass>& masses() const { return masses_; }
    double mean() const { return mean_; }
    double variance() const { return variance_; }
    double p0() const { return p0_; }
    Regime regime() const { return regime_; }
    bool is_critical() const { return regime_ == Regime::Critical; }
    int max_count() const { return max_count_; }

    // canonical "k:p_k,..." string, used as law_id in result records
    const std::string& id() const { return id_; }

    // phi(z) = sum_k p_k z^k, for z in [0,1]
    double pgf(double z) const;

    // phi''(1) = sum_k k(k-1) p_k
    double second_factorial_moment() const { return second_factorial_; }

    // sum_k p_k k log k  (Assumption "L log L"; finite by construction)
    double llogl() const;

    // Survival complement of the pgf, G(s) = 1 - phi(1-s), evaluated without
    // cancellation: G is the polynomial sum_j g_j s^j with g_1 = mean,
    // precomputed from binomial expansions of (1-s)^k.
    double survival_complement(double s) const;

    // log G(exp(log_s)) for the log-space recursions; accurate down to
    // log_s ~ -745 and beyond (switches to the series around s = 0).
    double log_survival_complement(double log_s) const;

    // exact draw by cumulative-table lookup
    int sample(Xoshiro256ss& rng) const {
        const double u = rng.uniform01();
        std::size_t i = 0;
        while (i + 1 < cdf_.size() && u >= cdf_[i]) ++i;
        return masses_[i].count;
    }

    // p̂_k = k p_k / mean on k >= 1. Requires mean > 0; the result has p̂_0 = 0.
    OffspringLaw size_biased() const;

private:
    OffspringLaw() = default;
    void finalize();  // computes moments, tables, regime, id

    std::vector<Mass> masses_;        // sorted by count, zero-mass entries dropped
    std::vector<double> cdf_;         // aligned with masses_
    std::vector<double> g_coeffs_;    // g_coeffs_[j-1] = coefficient of s^j in G(s)
    double mean_ = 0.0;
    double variance_ = 0.0;
    double p0_ = 0.0;
    double second_factorial_ = 0.0;
    int max_count_ = 0;
    Regime regime_ = Regime::Critical;
    std::string id_;
};

}  // namespace brw
