#include "brw/offspring.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <stdexcept>

namespace brw {

namespace {

constexpr double kProbTol = 1e-12;
constexpr int kMaxSupport = 64;  // keeps the binomial expansion of G well conditioned

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace

OffspringLaw OffspringLaw::critical_binary() {
    return from_masses({{0, 0.5}, {2, 0.5}});
}

OffspringLaw OffspringLaw::from_masses(const std::vector<Mass>& masses) {
    if (masses.empty()) throw std::invalid_argument("offspring: empty mass list");

    std::map<int, double> merged;
    double sum = 0.0;
    for (const auto& m : masses) {
        if (m.count < 0) throw std::invalid_argument("offspring: negative offspring count");
        if (m.count > kMaxSupport) {
            throw std::invalid_argument("offspring: support exceeds " +
                                        std::to_string(kMaxSupport));
        }
        if (!(m.prob >= 0.0) || !std::isfinite(m.prob)) {
            throw std::invalid_argument("offspring: masses must be nonnegative and finite");
        }
        merged[m.count] += m.prob;
        sum += m.prob;
    }
    if (std::abs(sum - 1.0) > kProbTol) {
        throw std::invalid_argument("offspring: masses sum to " + format_double(sum) +
                                    ", expected 1 within 1e-12");
    }

    OffspringLaw law;
    for (const auto& [k, p] : merged) {
        if (p > 0.0) law.masses_.push_back({k, p / sum});
    }
    if (law.masses_.empty()) throw std::invalid_argument("offspring: all masses are zero");
    law.finalize();

    if (law.mean_ > 1.0 + kProbTol) {
        throw std::invalid_argument("offspring: supercritical law (mean " +
                                    format_double(law.mean_) + " > 1) rejected");
    }
    return law;
}

void OffspringLaw::finalize() {
    mean_ = 0.0;
    p0_ = 0.0;
    second_factorial_ = 0.0;
    max_count_ = 0;
    double second_moment = 0.0;

    cdf_.clear();
    double running = 0.0;
    for (const auto& [k, p] : masses_) {
        const double kd = static_cast<double>(k);
        mean_ += kd * p;
        second_moment += kd * kd * p;
        second_factorial_ += kd * (kd - 1.0) * p;
        if (k == 0) p0_ = p;
        max_count_ = std::max(max_count_, k);
        running += p;
        cdf_.push_back(running);
    }
    variance_ = second_moment - mean_ * mean_;

    if (std::abs(mean_ - 1.0) <= kProbTol) {
        regime_ = Regime::Critical;
    } else if (mean_ < 1.0) {
        regime_ = Regime::Subcritical;
    } else {
        regime_ = Regime::Supercritical;
    }

    // G(s) = 1 - phi(1-s) = sum_{j>=1} g_j s^j,  g_j = (-1)^{j+1} sum_k p_k C(k,j)
    g_coeffs_.assign(static_cast<std::size_t>(std::max(max_count_, 1)), 0.0);
    for (const auto& [k, p] : masses_) {
        double binom = 1.0;
        for (int j = 1; j <= k; ++j) {
            binom *= static_cast<double>(k - j + 1) / static_cast<double>(j);
            const double sign = (j % 2 == 1) ? 1.0 : -1.0;
            g_coeffs_[static_cast<std::size_t>(j - 1)] += sign * p * binom;
        }
    }

    // ';' separator keeps the id usable as a single CSV cell
    id_.clear();
    for (const auto& [k, p] : masses_) {
        if (!id_.empty()) id_ += ';';
        id_ += std::to_string(k);
        id_ += ':';
        id_ += format_double(p);
    }
}

double OffspringLaw::pgf(double z) const {
    if (!(z >= 0.0 && z <= 1.0)) {
        throw std::invalid_argument("offspring: pgf argument must lie in [0,1]");
    }
    double acc = 0.0;
    for (const auto& [k, p] : masses_) acc += p * std::pow(z, k);
    return acc;
}

double OffspringLaw::llogl() const {
    double acc = 0.0;
    for (const auto& [k, p] : masses_) {
        if (k >= 2) acc += p * static_cast<double>(k) * std::log(static_cast<double>(k));
    }
    return acc;
}

double OffspringLaw::survival_complement(double s) const {
    if (!(s >= 0.0 && s <= 1.0)) {
        throw std::invalid_argument("offspring: survival_complement argument must lie in [0,1]");
    }
    // Near s=1 the direct form is exact; near s=0 it would cancel, so use the
    // expanded polynomial whose leading term is mean*s.
    if (s >= 0.5) {
        double phi = 0.0;
        for (const auto& [k, p] : masses_) phi += p * std::pow(1.0 - s, k);
        return 1.0 - phi;
    }
    double acc = 0.0;
    for (std::size_t j = g_coeffs_.size(); j-- > 0;) acc = g_coeffs_[j] + s * acc;
    return s * acc;
}

double OffspringLaw::log_survival_complement(double log_s) const {
    if (mean_ <= 0.0) {
        throw std::invalid_argument("offspring: log-space recursion needs mean > 0");
    }
    if (log_s > -18.0) {
        return std::log(survival_complement(std::exp(log_s)));
    }
    // G(s) = mean*s*(1 + (g2/g1) s + O(s^2)); the dropped terms are < 1e-16
    // relative for s < 1.5e-8.
    const double s = std::exp(log_s);
    const double ratio = g_coeffs_.size() > 1 ? g_coeffs_[1] / g_coeffs_[0] : 0.0;
    return std::log(mean_) + log_s + std::log1p(ratio * s);
}

OffspringLaw OffspringLaw::size_biased() const {
    if (mean_ <= 0.0) {
        throw std::invalid_argument("offspring: size-biasing undefined for mean 0");
    }
    OffspringLaw biased;
    for (const auto& [k, p] : masses_) {
        if (k >= 1) biased.masses_.push_back({k, static_cast<double>(k) * p / mean_});
    }
    biased.finalize();
    return biased;
}

}  // namespace brw
