#include "brw/exact_dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace brw {

namespace {

constexpr double kSandwichSlack = 1e-12;

struct Box {
    int d = 1;
    std::int64_t radius = 0;
    std::int64_t side = 1;
    std::int64_t size = 1;
    std::int64_t stride[3] = {1, 1, 1};
    std::vector<std::uint8_t> vacant;

    Box(const ObstacleField& field, std::int64_t r, const DpOptions& opts)
        : d(field.dimension()), radius(r), side(2 * r + 1) {
        if (d < 1 || d > 3) {
            throw std::invalid_argument("exact_dp: dimension must be 1, 2 or 3, got " +
                                        std::to_string(d));
        }
        size = 1;
        for (int a = 0; a < d; ++a) {
            stride[a] = size;
            size *= side;
        }
        // two value arrays (8 bytes each) plus the vacancy bitmap
        const std::uint64_t bytes = static_cast<std::uint64_t>(size) * 17u;
        if (bytes > opts.memory_budget_bytes) {
            throw CapacityError("exact_dp: box of " + std::to_string(size) + " sites (~" +
                                std::to_string(bytes >> 20) + " MiB) exceeds budget of " +
                                std::to_string(opts.memory_budget_bytes >> 20) + " MiB");
        }

        vacant.assign(static_cast<std::size_t>(size), 0);
        Site site(static_cast<std::size_t>(d), static_cast<std::int32_t>(-radius));
        for (std::int64_t i = 0; i < size; ++i) {
            vacant[static_cast<std::size_t>(i)] = field.is_vacant(site) ? 1 : 0;
            for (int a = 0; a < d; ++a) {
                if (site[static_cast<std::size_t>(a)] < radius) {
                    ++site[static_cast<std::size_t>(a)];
                    break;
                }
                site[static_cast<std::size_t>(a)] = static_cast<std::int32_t>(-radius);
            }
        }
    }

    std::int64_t origin_index() const { return (size - 1) / 2; }
};

inline double lse2(double a, double b) {
    const double m = std::max(a, b);
    if (m == -std::numeric_limits<double>::infinity()) return m;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// One backward step: combine transformed neighbor values over the active box
// of radius r. Linear mode averages; log mode does log-sum-exp minus log(2d).
void combine(const Box& box, const std::vector<double>& w, std::vector<double>& out,
             std::int64_t r, bool log_space) {
    const std::int64_t R = box.radius;
    const double inv_count = 2.0 * box.d;
    const double log_count = std::log(inv_count);
    switch (box.d) {
        case 1: {
            for (std::int64_t x = -r; x <= r; ++x) {
                const std::int64_t i = x + R;
                if (log_space) {
                    out[i] = lse2(w[i - 1], w[i + 1]) - log_count;
                } else {
                    out[i] = (w[i - 1] + w[i + 1]) / inv_count;
                }
            }
            break;
        }
        case 2: {
            const std::int64_t sy = box.stride[1];
            for (std::int64_t y = -r; y <= r; ++y) {
                const std::int64_t row = (y + R) * sy + R;
                for (std::int64_t x = -r; x <= r; ++x) {
                    const std::int64_t i = row + x;
                    if (log_space) {
                        out[i] = lse2(lse2(w[i - 1], w[i + 1]), lse2(w[i - sy], w[i + sy])) -
                                 log_count;
                    } else {
                        out[i] = (w[i - 1] + w[i + 1] + w[i - sy] + w[i + sy]) / inv_count;
                    }
                }
            }
            break;
        }
        case 3: {
            const std::int64_t sy = box.stride[1];
            const std::int64_t sz = box.stride[2];
            for (std::int64_t z = -r; z <= r; ++z) {
                for (std::int64_t y = -r; y <= r; ++y) {
                    const std::int64_t row = (z + R) * sz + (y + R) * sy + R;
                    for (std::int64_t x = -r; x <= r; ++x) {
                        const std::int64_t i = row + x;
                        if (log_space) {
                            out[i] = lse2(lse2(lse2(w[i - 1], w[i + 1]), lse2(w[i - sy], w[i + sy])),
                                          lse2(w[i - sz], w[i + sz])) -
                                     log_count;
                        } else {
                            out[i] = (w[i - 1] + w[i + 1] + w[i - sy] + w[i + sy] + w[i - sz] +
                                      w[i + sz]) /
                                     inv_count;
                        }
                    }
                }
            }
            break;
        }
    }
}

// Runs the n-step backward DP. Transform(value, vacant) produces the per-site
// contribution of a destination site; init is the horizon-0 value everywhere.
template <class Transform>
std::vector<double> run_dp(const Box& box, std::int64_t n, double init, bool log_space,
                           Transform&& transform) {
    std::vector<double> val(static_cast<std::size_t>(box.size), init);
    std::vector<double> w(static_cast<std::size_t>(box.size), init);
    for (std::int64_t k = 1; k <= n; ++k) {
        // full-box transform keeps indexing simple; the combine step only reads
        // back the entries within radius n-k+1, which feed the active layer
        for (std::int64_t i = 0; i < box.size; ++i) {
            w[static_cast<std::size_t>(i)] =
                transform(val[static_cast<std::size_t>(i)],
                          box.vacant[static_cast<std::size_t>(i)] != 0);
        }
        combine(box, w, val, n - k, log_space);
    }
    return val;
}

void check_horizon(std::int64_t n) {
    if (n < 0) throw std::invalid_argument("exact_dp: horizon must be >= 0");
}

}  // namespace

double DPField::at(const Site& site) const {
    if (site.size() != static_cast<std::size_t>(dimension)) {
        throw std::invalid_argument("DPField: site dimension mismatch");
    }
    std::int64_t idx = 0;
    std::int64_t stride = 1;
    for (int a = 0; a < dimension; ++a) {
        const std::int64_t c = site[static_cast<std::size_t>(a)];
        if (c < -radius || c > radius) {
            throw std::invalid_argument("DPField: site outside the box");
        }
        idx += (c + radius) * stride;
        stride *= 2 * radius + 1;
    }
    return values[static_cast<std::size_t>(idx)];
}

double DPField::origin_value() const { return values[(values.size() - 1) / 2]; }

double expectation_kernel(const ObstacleField& field, double obstacle_mult, double vacant_mult,
                          std::int64_t n, const DpOptions& opts) {
    check_horizon(n);
    if (n == 0) return 1.0;
    Box box(field, n, opts);
    auto val = run_dp(box, n, 1.0, false, [=](double v, bool vac) {
        return v * (vac ? vacant_mult : obstacle_mult);
    });
    return val[static_cast<std::size_t>(box.origin_index())];
}

double expected_population(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                           const DpOptions& opts) {
    return expectation_kernel(field, 1.0, law.mean(), n, opts);
}

double dv_exact(const ObstacleField& field, double mu, std::int64_t n, const DpOptions& opts) {
    if (!(mu > 0.0 && mu <= 1.0)) {
        throw std::invalid_argument("exact_dp: dv_exact requires mu in (0,1]");
    }
    return expectation_kernel(field, 1.0, mu, n, opts);
}

double log_dv_exact(const ObstacleField& field, double mu, std::int64_t n, const DpOptions& opts) {
    if (!(mu > 0.0 && mu <= 1.0)) {
        throw std::invalid_argument("exact_dp: log_dv_exact requires mu in (0,1]");
    }
    check_horizon(n);
    if (n == 0) return 0.0;
    Box box(field, n, opts);
    const double log_mu = std::log(mu);
    auto val = run_dp(box, n, 0.0, true,
                      [=](double v, bool vac) { return vac ? v + log_mu : v; });
    return val[static_cast<std::size_t>(box.origin_index())];
}

double survival_exact(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                      const DpOptions& opts) {
    check_horizon(n);
    if (n == 0) return 1.0;
    Box box(field, n, opts);
    auto val = run_dp(box, n, 1.0, false, [&law](double s, bool vac) {
        return vac ? law.survival_complement(s) : s;
    });
    return val[static_cast<std::size_t>(box.origin_index())];
}

double log_survival_exact(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                          const DpOptions& opts) {
    check_horizon(n);
    if (law.mean() <= 0.0) {
        throw std::invalid_argument("exact_dp: log-space survival requires offspring mean > 0");
    }
    if (n == 0) return 0.0;
    Box box(field, n, opts);
    auto val = run_dp(box, n, 0.0, true, [&law](double ls, bool vac) {
        return vac ? law.log_survival_complement(ls) : ls;
    });
    return val[static_cast<std::size_t>(box.origin_index())];
}

DPField expectation_field(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                          const DpOptions& opts) {
    check_horizon(n);
    DPField out;
    out.kind = DpKind::ExpectationU;
    out.dimension = field.dimension();
    out.horizon = n;
    out.radius = n;
    if (n == 0) {
        out.values = {1.0};
        return out;
    }
    Box box(field, n, opts);
    const double mu = law.mean();
    out.values = run_dp(box, n, 1.0, false,
                        [=](double v, bool vac) { return v * (vac ? mu : 1.0); });
    return out;
}

DPField extinction_field(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                         const DpOptions& opts) {
    check_horizon(n);
    DPField out;
    out.kind = DpKind::ExtinctionE;
    out.dimension = field.dimension();
    out.horizon = n;
    out.radius = n;
    if (n == 0) {
        out.values = {0.0};
        return out;
    }
    Box box(field, n, opts);
    auto s = run_dp(box, n, 1.0, false, [&law](double v, bool vac) {
        return vac ? law.survival_complement(v) : v;
    });
    out.values.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out.values[i] = 1.0 - s[i];
    return out;
}

SandwichResult sandwich_check(const ObstacleField& field, const OffspringLaw& law, std::int64_t n,
                              const DpOptions& opts) {
    if (law.regime() != Regime::Subcritical) {
        throw std::invalid_argument("exact_dp: sandwich_check requires a subcritical law");
    }
    const double mu_star = 1.0 - law.p0();
    if (!(mu_star > 0.0 && mu_star < 1.0)) {
        throw std::invalid_argument("exact_dp: sandwich_check requires mu* = 1 - p0 in (0,1)");
    }
    SandwichResult r;
    r.lower = dv_exact(field, mu_star, n, opts);
    r.exact = survival_exact(field, law, n, opts);
    r.upper = dv_exact(field, law.mean(), n, opts);
    r.holds = (r.lower <= r.exact + kSandwichSlack) && (r.exact <= r.upper + kSandwichSlack);
    return r;
}

}  // namespace brw
