#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "brw/brw_sim.hpp"
#include "brw/environment.hpp"
#include "brw/estimate.hpp"
#include "brw/errors.hpp"
#include "brw/offspring.hpp"

namespace brw {

enum class ExperimentKind { SurvivalCurve, SpineStats, Validate };

// Parsed experiment description. Configs are plain "key = value" text files
// ('#' starts a comment); every field has a documented default, and the
// canonical serialization of the materialized config is what gets hashed for
// idempotent output naming.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::SurvivalCurve;
    std::string name;  // output file stem; defaults to the kind name

    int dimension = 1;
    double obstacle_p = 0.0;
    std::vector<OffspringLaw::Mass> law_masses = {{0, 0.5}, {2, 0.5}};

    std::vector<std::int64_t> horizons;
    std::vector<Method> methods = {Method::DirectMc, Method::ExactDp};
    std::uint64_t mc_replicates = 100'000;
    std::uint64_t is_replicates = 10'000;
    std::uint64_t spine_replicates = 200;
    std::uint64_t conditional_replicates = 5'000;
    std::int64_t conditional_n = -1;  // spine-stats: enable the A_n check when >= 0
    double occupation_eps = 0.1;

    std::uint64_t env_seed = 1;  // base seed; environment i uses derive_seed(env_seed, EnvSweep, i)
    unsigned env_count = 1;
    std::uint64_t master_seed = 1;
    unsigned workers = 0;
    std::uint64_t population_cap = kDefaultPopulationCap;
    bool log_space = false;           // exact_dp runs in log space (subcritical studies)
    bool emit_size_histogram = false; // diagnostic |Z_n| histogram at the largest horizon

    std::string out_dir = "results";

    OffspringLaw law() const { return OffspringLaw::from_masses(law_masses); }
    void validate() const;  // throws ConfigError
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

struct ConfigOverrides {
    std::optional<std::uint64_t> master_seed;
    std::optional<unsigned> workers;
    std::optional<std::vector<Method>> methods;
    std::optional<std::string> out_dir;
};
void apply_overrides(ExperimentConfig& config, const ConfigOverrides& overrides);

// Canonical key=value serialization with all defaults materialized; its FNV-1a
// hash names the output files and makes reruns idempotent.
std::string canonical_config(const ExperimentConfig& config);
std::uint64_t config_content_hash(const ExperimentConfig& config);

// One output row of a survival-curve experiment. neg_log_estimate is filled by
// log-space DP rows whose linear value may underflow.
struct SurvivalRow {
    std::int64_t n = 0;
    Method method = Method::DirectMc;
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::uint64_t replicates = 0;
    std::uint64_t truncated_count = 0;
    std::uint64_t env_seed = 0;
    double p = 0.0;
    int d = 1;
    std::string law_id;
    bool has_neg_log = false;
    double neg_log = 0.0;
    double wall_time_s = 0.0;
};

struct CurveResult {
    std::vector<SurvivalRow> rows;
    std::vector<std::string> row_errors;  // per-row capacity errors, not fatal
    std::string summary_json;             // provenance + environment averages
};

// Runs every (environment, horizon, method) cell of the grid. Replica streams
// derive from (master_seed, env seed, n, method), so rows are independent of
// grid composition and of the worker count.
CurveResult run_survival_curve(const ExperimentConfig& config);

std::string survival_csv_header();
std::string survival_row_csv(const SurvivalRow& row);
std::vector<SurvivalRow> read_survival_csv(const std::string& path);

// Writes <out>/<name>-<hash>.csv and .json. If both files already exist with a
// matching config hash the run is skipped entirely (idempotent rerun).
struct RunOutput {
    std::string csv_path;
    std::string json_path;
    bool reused = false;
    CurveResult result;  // loaded from disk when reused
};
RunOutput run_and_write_curve(const ExperimentConfig& config);

// Scaling fits of Theorem-style normalizations over a result table.
struct ScalingFit {
    enum class Kind { Critical, Subcritical };
    struct Series {
        std::uint64_t env_seed = 0;
        std::vector<std::pair<std::int64_t, double>> points;
    };

    Kind kind = Kind::Critical;
    std::vector<Series> series;  // c_n (critical) or r_n (subcritical), per environment

    // critical verdicts
    std::vector<std::pair<std::int64_t, double>> mean_abs_dev;  // env-mean |c_n - 1| per n
    double largest_n_dev = 0.0;
    bool deviation_shrinks = false;  // dev at largest n <= dev at smallest n

    // subcritical verdicts
    std::vector<Series> an_over_n;   // a_n/n = -log P / n, per environment
    bool sublinear = false;          // a_n/n strictly decreasing for every environment
    bool nonspatial_profile = false; // a_n/n flat across the grid (mu^n-type decay)
    double decay_ratio = 0.0;        // env-mean (a_N/N) / (a_n0/n0)
};

// c_n = n * q * P(S_n) / 2; the critical normalization approaches 1.
ScalingFit fit_critical_constant(const std::vector<SurvivalRow>& rows, double q);

// r_n = -log P(S_n) * (log n)^{2/d} / n plus the a_n/n sub-linearity profile.
ScalingFit fit_subcritical_rate(const std::vector<SurvivalRow>& rows, int d);

std::string scaling_fit_json(const ScalingFit& fit);

// Spine statistics experiment (occupation frequency, optional conditional-law
// rejection check); JSON output with the same idempotent naming scheme.
struct SpineStatsOutput {
    std::string json_path;
    bool reused = false;
    std::string summary_json;
};
SpineStatsOutput run_and_write_spine_stats(const ExperimentConfig& config);

// Cross-module validation profile: cross-method agreement, martingale,
// sandwich, monotonicity, spine and determinism checks.
struct ValidationReport {
    struct Check {
        std::string name;
        bool pass = false;
        std::string detail;
    };
    std::vector<Check> checks;
    bool all_pass() const {
        for (const auto& c : checks) {
            if (!c.pass) return false;
        }
        return true;
    }
};

struct ValidateOptions {
    unsigned workers = 0;
};

ValidationReport validate(const ValidateOptions& opts = {});

}  // namespace brw
