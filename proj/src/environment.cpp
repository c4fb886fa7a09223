#include "brw/environment.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace brw {

namespace {
constexpr std::uint64_t kEnvSalt =
    kGolden * static_cast<std::uint64_t>(StreamDomain::Environment);
}

void EnvironmentSpec::validate() const {
    if (dimension < 1) {
        throw std::invalid_argument("environment: dimension must be >= 1, got " +
                                    std::to_string(dimension));
    }
    if (!(obstacle_probability >= 0.0 && obstacle_probability < 1.0)) {
        throw std::invalid_argument("environment: obstacle probability must lie in [0,1), got " +
                                    std::to_string(obstacle_probability));
    }
}

ObstacleField::ObstacleField(EnvironmentSpec spec) : spec_(spec) {
    spec_.validate();
    seed_hash_ = mix64(spec_.master_seed ^ kEnvSalt);
}

ObstacleField::ObstacleField(EnvironmentSpec spec, Mode mode) : spec_(spec), mode_(mode) {}

ObstacleField ObstacleField::all_obstacles(int dimension) {
    if (dimension < 1) throw std::invalid_argument("environment: dimension must be >= 1");
    EnvironmentSpec spec;
    spec.dimension = dimension;
    spec.obstacle_probability = 1.0;  // diagnostic only; bypasses spec validation
    return ObstacleField(spec, Mode::AllObstacle);
}

ObstacleField ObstacleField::all_vacant(int dimension) {
    if (dimension < 1) throw std::invalid_argument("environment: dimension must be >= 1");
    EnvironmentSpec spec;
    spec.dimension = dimension;
    spec.obstacle_probability = 0.0;
    return ObstacleField(spec, Mode::AllVacant);
}

void ObstacleField::check_dimension(std::size_t got) const {
    if (got != static_cast<std::size_t>(spec_.dimension)) {
        throw std::invalid_argument("environment: site has dimension " + std::to_string(got) +
                                    ", field has dimension " + std::to_string(spec_.dimension));
    }
}

ObstacleField make_field(const EnvironmentSpec& spec) { return ObstacleField(spec); }

bool is_vacant(const ObstacleField& field, const Site& site) { return field.is_vacant(site); }

double vacancy_fraction(const ObstacleField& field, int box_radius) {
    if (box_radius < 1) throw std::invalid_argument("vacancy_fraction: box_radius must be >= 1");
    const int d = field.dimension();
    const std::int64_t side = 2 * static_cast<std::int64_t>(box_radius) + 1;

    std::uint64_t total = 1;
    for (int i = 0; i < d; ++i) {
        if (total > (1ULL << 40) / static_cast<std::uint64_t>(side)) {
            throw std::invalid_argument("vacancy_fraction: box too large");
        }
        total *= static_cast<std::uint64_t>(side);
    }

    Site site(static_cast<std::size_t>(d), static_cast<std::int32_t>(-box_radius));
    std::uint64_t vacant = 0;
    for (std::uint64_t i = 0; i < total; ++i) {
        if (field.is_vacant(site)) ++vacant;
        // odometer increment over the box
        for (int k = 0; k < d; ++k) {
            if (site[static_cast<std::size_t>(k)] < box_radius) {
                ++site[static_cast<std::size_t>(k)];
                break;
            }
            site[static_cast<std::size_t>(k)] = -box_radius;
        }
    }
    return static_cast<double>(vacant) / static_cast<double>(total);
}

}  // namespace brw
