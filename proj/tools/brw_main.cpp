#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "brw/environment.hpp"
#include "brw/errors.hpp"
#include "brw/experiments.hpp"
#include "brw/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidationFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitCapacityError = 3;

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string methods;
    std::uint64_t seed = 0;
    unsigned workers = 0;
    bool seed_set = false;
    bool workers_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required) {
    auto* opt = cmd->add_option("--config", flags.config_path, "experiment config file");
    if (config_required) opt->required();
    cmd->add_option("--out", flags.out_dir, "output directory (overrides config)");
    cmd->add_option("--workers", flags.workers, "worker threads, 0 = hardware")
        ->each([&flags](const std::string&) { flags.workers_set = true; });
    cmd->add_option("--seed", flags.seed, "master seed (overrides config)")
        ->each([&flags](const std::string&) { flags.seed_set = true; });
    cmd->add_option("--method", flags.methods,
                    "comma-separated methods: direct_mc,spine_is,exact_dp");
}

brw::ExperimentConfig load_config(const CommonFlags& flags, brw::ExperimentKind expected) {
    brw::ExperimentConfig config = brw::parse_config_file(flags.config_path);
    if (config.kind != expected) {
        throw brw::ConfigError("config kind does not match the subcommand");
    }
    brw::ConfigOverrides overrides;
    if (flags.seed_set) overrides.master_seed = flags.seed;
    if (flags.workers_set) overrides.workers = flags.workers;
    if (!flags.out_dir.empty()) overrides.out_dir = flags.out_dir;
    if (!flags.methods.empty()) {
        std::vector<brw::Method> methods;
        std::string cur;
        for (char c : flags.methods + ",") {
            if (c == ',') {
                if (cur == "direct_mc") {
                    methods.push_back(brw::Method::DirectMc);
                } else if (cur == "spine_is") {
                    methods.push_back(brw::Method::SpineIs);
                } else if (cur == "exact_dp") {
                    methods.push_back(brw::Method::ExactDp);
                } else if (!cur.empty()) {
                    throw brw::ConfigError("unknown method '" + cur + "'");
                }
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        overrides.methods = methods;
    }
    brw::apply_overrides(config, overrides);
    return config;
}

int run_survival_curve_cmd(const CommonFlags& flags) {
    const auto config = load_config(flags, brw::ExperimentKind::SurvivalCurve);
    const auto output = brw::run_and_write_curve(config);
    std::printf("%s: %zu rows -> %s%s\n", config.name.c_str(), output.result.rows.size(),
                output.csv_path.c_str(), output.reused ? " (cached)" : "");
    for (const auto& err : output.result.row_errors) {
        std::fprintf(stderr, "row skipped: %s\n", err.c_str());
    }
    if (!output.result.row_errors.empty() && output.result.rows.empty()) {
        return kExitCapacityError;
    }
    return kExitOk;
}

int run_fit_cmd(const CommonFlags& flags, bool critical) {
    const auto config = load_config(flags, brw::ExperimentKind::SurvivalCurve);
    const auto output = brw::run_and_write_curve(config);
    brw::ScalingFit fit;
    if (critical) {
        fit = brw::fit_critical_constant(output.result.rows, 1.0 - config.obstacle_p);
    } else {
        fit = brw::fit_subcritical_rate(output.result.rows, config.dimension);
    }
    const std::string fit_json = brw::scaling_fit_json(fit);
    const std::string fit_path =
        output.csv_path.substr(0, output.csv_path.size() - 4) + (critical ? "-cfit" : "-rfit") +
        ".json";
    {
        std::FILE* f = std::fopen(fit_path.c_str(), "wb");
        if (!f) throw brw::ConfigError("cannot write '" + fit_path + "'");
        std::fwrite(fit_json.data(), 1, fit_json.size(), f);
        std::fclose(f);
    }
    std::printf("%s\n", fit_json.c_str());
    std::printf("fit written to %s\n", fit_path.c_str());
    return kExitOk;
}

int run_spine_stats_cmd(const CommonFlags& flags) {
    const auto config = load_config(flags, brw::ExperimentKind::SpineStats);
    const auto output = brw::run_and_write_spine_stats(config);
    std::printf("%s%s\n", output.summary_json.c_str(), output.reused ? "\n(cached)" : "");
    return kExitOk;
}

int run_validate_cmd(const CommonFlags& flags) {
    brw::ValidateOptions opts;
    if (!flags.config_path.empty()) {
        // validate accepts a config only to pick up worker counts
        const auto config = brw::parse_config_file(flags.config_path);
        opts.workers = config.workers;
    }
    if (flags.workers_set) opts.workers = flags.workers;
    const auto report = brw::validate(opts);
    for (const auto& check : report.checks) {
        std::printf("[%s] %s: %s\n", check.pass ? "PASS" : "FAIL", check.name.c_str(),
                    check.detail.c_str());
    }
    return report.all_pass() ? kExitOk : kExitValidationFailure;
}

int run_env_inspect_cmd(const CommonFlags& flags, int dimension, double obstacle_p,
                        std::uint64_t env_seed, int radius, bool direct_given) {
    brw::EnvironmentSpec spec;
    if (!flags.config_path.empty()) {
        const auto config = brw::parse_config_file(flags.config_path);
        spec.dimension = config.dimension;
        spec.obstacle_probability = config.obstacle_p;
        spec.master_seed = config.env_seed;
    } else if (direct_given) {
        spec.dimension = dimension;
        spec.obstacle_probability = obstacle_p;
        spec.master_seed = env_seed;
    } else {
        throw brw::ConfigError("env-inspect needs --config or --dim/--p/--env-seed");
    }
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw brw::ConfigError(e.what());
    }
    const brw::ObstacleField field = brw::make_field(spec);

    nlohmann::json out;
    out["artifact_version"] = brw::kArtifactVersion;
    out["hash_scheme"] = brw::kHashSchemeId;
    out["rng_scheme"] = brw::kRngSchemeId;
    out["dimension"] = spec.dimension;
    out["obstacle_p"] = spec.obstacle_probability;
    out["vacancy_q"] = spec.vacancy_probability();
    out["master_seed"] = spec.master_seed;
    out["box_radius"] = radius;
    out["vacancy_fraction"] = brw::vacancy_fraction(field, radius);
    std::printf("%s\n", out.dump(2).c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"branching random walks among Bernoulli obstacles on Z^d"};
    app.set_version_flag("--version", brw::kArtifactVersion);
    app.require_subcommand(1);

    CommonFlags curve_flags, cfit_flags, rfit_flags, spine_flags, validate_flags, env_flags;

    auto* curve = app.add_subcommand("survival-curve",
                                     "run survival estimates over a horizon grid");
    add_common(curve, curve_flags, true);

    auto* cfit = app.add_subcommand("fit-critical",
                                    "run/load a survival curve and fit c_n = n q P(S_n)/2");
    add_common(cfit, cfit_flags, true);

    auto* rfit = app.add_subcommand(
        "fit-subcritical", "run/load a survival curve and fit the -log P decay profile");
    add_common(rfit, rfit_flags, true);

    auto* spine = app.add_subcommand("spine-stats",
                                     "spine occupation statistics and conditional-law check");
    add_common(spine, spine_flags, true);

    auto* val = app.add_subcommand("validate", "run the cross-module validation profile");
    add_common(val, validate_flags, false);

    auto* env = app.add_subcommand("env-inspect", "report environment parameters and vacancy");
    add_common(env, env_flags, false);
    int env_dim = 1;
    double env_p = 0.0;
    std::uint64_t env_seed = 1;
    int env_radius = 50;
    env->add_option("--dim", env_dim, "dimension (without --config)");
    env->add_option("--p", env_p, "obstacle probability (without --config)");
    env->add_option("--env-seed", env_seed, "environment seed (without --config)");
    env->add_option("--radius", env_radius, "inspection box radius");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (curve->parsed()) return run_survival_curve_cmd(curve_flags);
        if (cfit->parsed()) return run_fit_cmd(cfit_flags, true);
        if (rfit->parsed()) return run_fit_cmd(rfit_flags, false);
        if (spine->parsed()) return run_spine_stats_cmd(spine_flags);
        if (val->parsed()) return run_validate_cmd(validate_flags);
        if (env->parsed()) {
            const bool direct = env->count("--dim") || env->count("--p") ||
                                env->count("--env-seed");
            return run_env_inspect_cmd(env_flags, env_dim, env_p, env_seed, env_radius, direct);
        }
    } catch (const brw::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const brw::CapacityError& e) {
        std::fprintf(stderr, "capacity error: %s\n", e.what());
        return kExitCapacityError;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfigError;
    }
    return kExitConfigError;
}
