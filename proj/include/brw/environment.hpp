#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "brw/rng.hpp"

namespace brw {

inline constexpr const char* kHashSchemeId = "splitmix64-zigzag-v1";

using Site = std::vector<std::int32_t>;

struct EnvironmentSpec {
    int dimension = 1;
    double obstacle_probability = 0.0;  // p in [0,1)
    std::uint64_t master_seed = 0;

    void validate() const;  // throws std::invalid_argument on violation
    double vacancy_probability() const { return 1.0 - obstacle_probability; }
};

// IID Bernoulli(p) obstacle configuration on Z^d. Site status is a pure
// function of (master_seed, site): the per-site hash chain
//
//     h = mix64(seed ^ salt); for each coordinate c: h = mix64(h ^ (zigzag(c) + golden))
//
// is mapped to [0,1) with 53 bits and compared against p. Nothing is stored,
// so the field is effectively infinite, immutable and freely shared between
// threads. Every replica of a run sees the same realization.
class ObstacleField {
public:
    explicit ObstacleField(EnvironmentSpec spec);

    // Diagnostic constant fields (an all-obstacle environment is not reachable
    // through EnvironmentSpec, which requires p < 1).
    static ObstacleField all_obstacles(int dimension);
    static ObstacleField all_vacant(int dimension);

    const EnvironmentSpec& spec() const { return spec_; }
    int dimension() const { return spec_.dimension; }

    bool is_obstacle(std::span<const std::int32_t> site) const {
        check_dimension(site.size());
        switch (mode_) {
            case Mode::AllObstacle: return true;
            case Mode::AllVacant: return false;
            case Mode::Hashed: break;
        }
        std::uint64_t h = seed_hash_;
        for (std::int32_t c : site) h = mix64(h ^ (zigzag(c) + kGolden));
        return to_unit_interval(h) < spec_.obstacle_probability;
    }

    bool is_vacant(std::span<const std::int32_t> site) const { return !is_obstacle(site); }

private:
    enum class Mode { Hashed, AllVacant, AllObstacle };

    ObstacleField(EnvironmentSpec spec, Mode mode);
    void check_dimension(std::size_t got) const;

    EnvironmentSpec spec_;
    Mode mode_ = Mode::Hashed;
    std::uint64_t seed_hash_ = 0;
};

ObstacleField make_field(const EnvironmentSpec& spec);

bool is_vacant(const ObstacleField& field, const Site& site);

// Fraction of vacant sites in the centered L-infinity box of the given radius.
double vacancy_fraction(const ObstacleField& field, int box_radius);

}  // namespace brw
