#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <vector>

#include "brw/exact_dp.hpp"

using namespace brw;

namespace {

EnvironmentSpec spec_of(int d, double p, std::uint64_t seed) {
    EnvironmentSpec spec;
    spec.dimension = d;
    spec.obstacle_probability = p;
    spec.master_seed = seed;
    return spec;
}

// Independent scalar oracle for homogeneous (p = 0) environments: the survival
// probability obeys s_{k+1} = 1 - phi(1 - s_k), evaluated here directly from
// the mass list in extended precision.
double scalar_survival(const std::vector<std::pair<int, double>>& masses, int n) {
    long double s = 1.0L;
    for (int k = 0; k < n; ++k) {
        long double phi = 0.0L;
        for (const auto& [count, prob] : masses) {
            phi += static_cast<long double>(prob) *
                   std::pow(1.0L - s, static_cast<long double>(count));
        }
        s = 1.0L - phi;
    }
    return static_cast<double>(s);
}

}  // namespace

TEST_CASE("expected_population: critical martingale value is exactly 1") {
    const OffspringLaw law = OffspringLaw::critical_binary();
    for (int d : {1, 2, 3}) {
        const ObstacleField field = make_field(spec_of(d, 0.5, 42));
        const std::int64_t n = d == 3 ? 15 : 50;
        CHECK(std::abs(expected_population(field, law, n) - 1.0) <= 1e-12);
    }
    const OffspringLaw degenerate = OffspringLaw::from_masses({{1, 1.0}});
    const ObstacleField field = make_field(spec_of(1, 0.7, 9));
    CHECK(std::abs(expected_population(field, degenerate, 40) - 1.0) <= 1e-12);
}

TEST_CASE("expected_population: homogeneous environment gives mu^n") {
    const OffspringLaw law = OffspringLaw::from_masses({{0, 0.6}, {1, 0.2}, {2, 0.2}});
    const ObstacleField field = make_field(spec_of(1, 0.0, 1));
    CHECK(expected_population(field, law, 4) == doctest::Approx(0.1296).epsilon(1e-12));
    CHECK(expected_population(field, law, 0) == 1.0);
}

TEST_CASE("expected_population: all-obstacle field never applies the mean") {
    const OffspringLaw law = OffspringLaw::from_masses({{0, 0.6}, {1, 0.2}, {2, 0.2}});
    const ObstacleField blocked = ObstacleField::all_obstacles(2);
    CHECK(expected_population(blocked, law, 12) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("survival_exact matches the scalar recursion at p=0") {
    const OffspringLaw binary = OffspringLaw::critical_binary();
    const ObstacleField field = make_field(spec_of(1, 0.0, 3));
    CHECK(survival_exact(field, binary, 0) == 1.0);
    CHECK(survival_exact(field, binary, 1) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(survival_exact(field, binary, 2) == doctest::Approx(0.375).epsilon(1e-14));
    CHECK(survival_exact(field, binary, 3) == doctest::Approx(39.0 / 128.0).epsilon(1e-14));
    for (int n : {5, 10, 25}) {
        const double oracle = scalar_survival({{0, 0.5}, {2, 0.5}}, n);
        CHECK(survival_exact(field, binary, n) == doctest::Approx(oracle).epsilon(1e-12));
    }
    // the same homogeneity holds in d = 2
    const ObstacleField field2 = make_field(spec_of(2, 0.0, 3));
    CHECK(survival_exact(field2, binary, 8) ==
          doctest::Approx(scalar_survival({{0, 0.5}, {2, 0.5}}, 8)).epsilon(1e-12));
}

TEST_CASE("survival_exact is monotone nonincreasing in n") {
    const OffspringLaw law = OffspringLaw::critical_binary();
    const ObstacleField field = make_field(spec_of(1, 0.5, 10));
    double prev = 1.0;
    for (int n = 1; n <= 25; ++n) {
        const double s = survival_exact(field, law, n);
        CHECK(s <= prev + 1e-15);
        CHECK(s >= 0.0);
        prev = s;
    }
}

TEST_CASE("extinction probabilities are in [0,1] and nondecreasing in k pointwise") {
    const OffspringLaw law = OffspringLaw::critical_binary();
    const ObstacleField field = make_field(spec_of(1, 0.5, 11));
    const int n = 12;
    // compare layer k and k+1 on the sites of the smaller box
    for (int k = 1; k < n; ++k) {
        const DPField ek = extinction_field(field, law, k);
        const DPField ek1 = extinction_field(field, law, k + 1);
        for (std::int32_t x = -k; x <= k; ++x) {
            const double a = ek.at(Site{x});
            const double b = ek1.at(Site{x});
            CHECK(a >= 0.0);
            CHECK(a <= 1.0);
            CHECK(b >= a - 1e-13);
        }
    }
}

TEST_CASE("quenched monotonicity: obstacles never hurt survival") {
    const OffspringLaw law = OffspringLaw::critical_binary();
    const ObstacleField free_field = make_field(spec_of(1, 0.0, 0));
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        const ObstacleField field = make_field(spec_of(1, 0.5, seed));
        for (int n : {1, 7, 20, 30}) {
            CHECK(survival_exact(field, law, n) >=
                  survival_exact(free_field, law, n) - 1e-12);
        }
    }
}

TEST_CASE("conditional population E(|Z_n| | S_n) is always >= 1") {
    const OffspringLaw law = OffspringLaw::critical_binary();
    const ObstacleField field = make_field(spec_of(1, 0.5, 12));
    for (int n : {1, 5, 10, 20}) {
        const double u = expected_population(field, law, n);
        const double s = survival_exact(field, law, n);
        CHECK(u / s >= 1.0 - 1e-12);
    }
}

TEST_CASE("dv_exact basics and equivalence with the expectation recursion") {
    const ObstacleField field = make_field(spec_of(1, 0.5, 13));
    CHECK(dv_exact(field, 1.0, 17) == doctest::Approx(1.0).epsilon(1e-12));

    const ObstacleField free_field = make_field(spec_of(1, 0.0, 13));
    CHECK(dv_exact(free_field, 0.5, 6) == doctest::Approx(std::pow(0.5, 6)).epsilon(1e-12));

    const OffspringLaw half = OffspringLaw::from_masses({{0, 0.5}, {1, 0.5}});
    CHECK(dv_exact(field, 0.5, 10) ==
          doctest::Approx(expected_population(field, half, 10)).epsilon(1e-12));

    CHECK_THROWS_AS(dv_exact(field, 0.0, 3), std::invalid_argument);
    CHECK_THROWS_AS(dv_exact(field, 1.5, 3), std::invalid_argument);
}

TEST_CASE("log-space recursions agree with linear ones on small instances") {
    const ObstacleField field = make_field(spec_of(1, 0.5, 14));
    const OffspringLaw law = OffspringLaw::from_masses({{0, 0.6}, {1, 0.2}, {2, 0.2}});
    for (int n : {1, 5, 12, 25}) {
        CHECK(log_dv_exact(field, 0.5, n) ==
              doctest::Approx(std::log(dv_exact(field, 0.5, n))).epsilon(1e-10));
        CHECK(log_survival_exact(field, law, n) ==
              doctest::Approx(std::log(survival_exact(field, law, n))).epsilon(1e-10));
    }
}

TEST_CASE("log-space survival reaches horizons where linear space underflows") {
    // single-successor law at p=0: survival is exactly mu^n, so n=300 at
    // mu=0.05 sits ~900 nats down, far past the double underflow threshold
    const ObstacleField field = make_field(spec_of(1, 0.0, 15));
    const OffspringLaw law = OffspringLaw::from_masses({{0, 0.95}, {1, 0.05}});
    CHECK(survival_exact(field, law, 300) == 0.0);  // linear path underflows
    const double log_p = log_survival_exact(field, law, 300);
    CHECK(log_p == doctest::Approx(300.0 * std::log(0.05)).epsilon(1e-12));
}

TEST_CASE("log-space survival tracks the quenched spatial gain") {
    // at d=1, p=0.5 the walk exploits obstacle-rich stretches: -log P grows
    // much slower than the non-spatial floor n log(1/mu)
    const ObstacleField field = make_field(spec_of(1, 0.5, 15));
    const OffspringLaw law = OffspringLaw::from_masses({{0, 0.75}, {2, 0.25}});  // mean 0.5
    const double log_p = log_survival_exact(field, law, 600);
    CHECK(log_p == doctest::Approx(std::log(survival_exact(field, law, 600))).epsilon(1e-9));
    CHECK(log_p > 600.0 * std::log(0.5));  // strictly better than mu^n
}

TEST_CASE("sandwich_check holds subcritically and rejects critical laws") {
    const OffspringLaw sub = OffspringLaw::from_masses({{0, 0.6}, {1, 0.2}, {2, 0.2}});

    SUBCASE("p=0 example") {
        const ObstacleField field = make_field(spec_of(1, 0.0, 1));
        const SandwichResult r = sandwich_check(field, sub, 5);
        CHECK(r.holds);
        CHECK(r.lower <= r.exact + 1e-12);
        CHECK(r.exact <= r.upper + 1e-12);
        CHECK(r.upper == doctest::Approx(std::pow(0.6, 5)).epsilon(1e-12));
        CHECK(r.lower == doctest::Approx(std::pow(0.4, 5)).epsilon(1e-12));
    }
    SUBCASE("quenched example") {
        const ObstacleField field = make_field(spec_of(1, 0.5, 16));
        CHECK(sandwich_check(field, sub, 30).holds);
    }
    SUBCASE("critical law rejected") {
        const ObstacleField field = make_field(spec_of(1, 0.5, 16));
        CHECK_THROWS_AS(sandwich_check(field, OffspringLaw::critical_binary(), 5),
                        std::invalid_argument);
    }
}

TEST_CASE("capacity and dimension guards") {
    const OffspringLaw law = OffspringLaw::critical_binary();
    const ObstacleField field = make_field(spec_of(2, 0.5, 17));
    DpOptions tiny;
    tiny.memory_budget_bytes = 1024;
    CHECK_THROWS_AS(expected_population(field, law, 50, tiny), CapacityError);
    CHECK_THROWS_AS(survival_exact(field, law, 50, tiny), CapacityError);

    const ObstacleField field4 = make_field(spec_of(4, 0.5, 17));
    CHECK_THROWS_AS(expected_population(field4, law, 3), std::invalid_argument);
    CHECK_THROWS_AS(expected_population(field, law, -1), std::invalid_argument);
}

TEST_CASE("expectation field exposes per-site values") {
    const OffspringLaw law = OffspringLaw::from_masses({{0, 0.6}, {1, 0.2}, {2, 0.2}});
    const ObstacleField field = make_field(spec_of(1, 0.5, 18));
    const DPField u = expectation_field(field, law, 6);
    CHECK(u.origin_value() == doctest::Approx(expected_population(field, law, 6)).epsilon(1e-14));
    CHECK(u.at(Site{0}) == u.origin_value());
    CHECK_THROWS_AS(u.at(Site{7}), std::invalid_argument);
}
