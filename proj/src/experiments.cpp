#include "brw/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "brw/exact_dp.hpp"
#include "brw/spine.hpp"
#include "brw/version.hpp"
#include "brw/walker.hpp"

namespace brw {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

double parse_double(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: invalid number '" + s + "' for key '" + key + "'");
    }
}

std::int64_t parse_int(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: invalid integer '" + s + "' for key '" + key + "'");
    }
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: invalid unsigned integer '" + s + "' for key '" + key + "'");
    }
}

bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config: invalid boolean '" + s + "' for key '" + key + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

Method parse_method(const std::string& s) {
    if (s == "direct_mc") return Method::DirectMc;
    if (s == "spine_is") return Method::SpineIs;
    if (s == "exact_dp") return Method::ExactDp;
    throw ConfigError("config: unknown method '" + s +
                      "' (expected direct_mc, spine_is or exact_dp)");
}

ExperimentKind parse_kind(const std::string& s) {
    if (s == "survival-curve") return ExperimentKind::SurvivalCurve;
    if (s == "spine-stats") return ExperimentKind::SpineStats;
    if (s == "validate") return ExperimentKind::Validate;
    throw ConfigError("config: unknown kind '" + s +
                      "' (expected survival-curve, spine-stats or validate)");
}

const char* kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::SurvivalCurve: return "survival-curve";
        case ExperimentKind::SpineStats: return "spine-stats";
        case ExperimentKind::Validate: return "validate";
    }
    return "?";
}

std::vector<OffspringLaw::Mass> parse_law(const std::string& s) {
    if (s == "critical-binary") return {{0, 0.5}, {2, 0.5}};
    std::vector<OffspringLaw::Mass> masses;
    for (const auto& item : split_list(s)) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw ConfigError("config: law entries must look like 'k:prob', got '" + item + "'");
        }
        OffspringLaw::Mass m;
        m.count = static_cast<int>(parse_int(item.substr(0, colon), "law"));
        m.prob = parse_double(item.substr(colon + 1), "law");
        masses.push_back(m);
    }
    if (masses.empty()) throw ConfigError("config: empty law");
    return masses;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::uint64_t env_seed_for(const ExperimentConfig& config, unsigned index) {
    return derive_seed(config.env_seed, StreamDomain::EnvSweep, index);
}

std::uint64_t row_master_seed(const ExperimentConfig& config, std::uint64_t env_seed,
                              std::int64_t n, Method method) {
    std::uint64_t h = mix64(config.master_seed +
                            kGolden * static_cast<std::uint64_t>(StreamDomain::Experiment));
    h = mix64(h ^ env_seed);
    h = mix64(h ^ zigzag(n));
    h = mix64(h ^ (static_cast<std::uint64_t>(method) + 1));
    return h;
}

json meta_json(const ExperimentConfig& config) {
    json meta;
    meta["artifact_version"] = kArtifactVersion;
    meta["hash_scheme"] = kHashSchemeId;
    meta["rng_scheme"] = kRngSchemeId;
    meta["config_hash"] = hash_hex(config_content_hash(config));
    meta["kind"] = kind_name(config.kind);
    meta["dimension"] = config.dimension;
    meta["obstacle_p"] = config.obstacle_p;
    meta["vacancy_q"] = 1.0 - config.obstacle_p;
    meta["law_id"] = config.law().id();
    meta["env_seed_base"] = config.env_seed;
    meta["env_count"] = config.env_count;
    json seeds = json::array();
    for (unsigned i = 0; i < config.env_count; ++i) seeds.push_back(env_seed_for(config, i));
    meta["env_seeds"] = seeds;
    meta["master_seed"] = config.master_seed;
    meta["population_cap"] = config.population_cap;
    meta["replica_scheme"] = "stream(master, domain, replica_index); row master = "
                             "mix(master_seed, env_seed, n, method)";
    return meta;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (dimension < 1) throw ConfigError("config: dimension must be >= 1");
    if (!(obstacle_p >= 0.0 && obstacle_p < 1.0)) {
        throw ConfigError("config: obstacle_p must lie in [0,1)");
    }
    bool law_critical = false;
    double law_mean = 0.0;
    try {
        const OffspringLaw parsed_law = law();
        law_critical = parsed_law.is_critical();
        law_mean = parsed_law.mean();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (env_count < 1) throw ConfigError("config: env_count must be >= 1");
    if (kind == ExperimentKind::SurvivalCurve) {
        if (horizons.empty()) throw ConfigError("config: survival-curve requires horizons");
        for (std::size_t i = 0; i < horizons.size(); ++i) {
            if (horizons[i] < 0) throw ConfigError("config: horizons must be >= 0");
            if (i > 0 && horizons[i] <= horizons[i - 1]) {
                throw ConfigError("config: horizons must be strictly increasing");
            }
        }
        if (methods.empty()) throw ConfigError("config: survival-curve requires methods");
        if (mc_replicates < 1 || is_replicates < 1) {
            throw ConfigError("config: replicate counts must be >= 1");
        }
        const bool wants_spine =
            std::find(methods.begin(), methods.end(), Method::SpineIs) != methods.end();
        if (wants_spine && !law_critical) {
            throw ConfigError("config: spine_is requires a critical law");
        }
        if (log_space && law_mean <= 0.0) {
            throw ConfigError("config: log_space requires offspring mean > 0");
        }
    }
    if (kind == ExperimentKind::SpineStats) {
        if (horizons.size() != 1) {
            throw ConfigError("config: spine-stats requires exactly one horizon");
        }
        if (horizons[0] < 1) throw ConfigError("config: spine-stats horizon must be >= 1");
        if (spine_replicates < 1) throw ConfigError("config: spine_replicates must be >= 1");
        if (!(occupation_eps > 0.0)) throw ConfigError("config: occupation_eps must be > 0");
        if (conditional_n >= 0 && !law_critical) {
            throw ConfigError("config: the conditional check requires a critical law");
        }
    }
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig config;
    bool saw_kind = false;
    bool saw_any = false;

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(line_no) +
                              " is not 'key = value': '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("config: line " + std::to_string(line_no) + " has empty key/value");
        }
        saw_any = true;

        if (key == "kind") {
            config.kind = parse_kind(value);
            saw_kind = true;
        } else if (key == "name") {
            config.name = value;
        } else if (key == "dimension") {
            config.dimension = static_cast<int>(parse_int(value, key));
        } else if (key == "obstacle_p") {
            config.obstacle_p = parse_double(value, key);
        } else if (key == "law") {
            config.law_masses = parse_law(value);
        } else if (key == "horizons") {
            config.horizons.clear();
            for (const auto& item : split_list(value)) {
                config.horizons.push_back(parse_int(item, key));
            }
        } else if (key == "methods") {
            config.methods.clear();
            for (const auto& item : split_list(value)) config.methods.push_back(parse_method(item));
        } else if (key == "mc_replicates") {
            config.mc_replicates = parse_u64(value, key);
        } else if (key == "is_replicates") {
            config.is_replicates = parse_u64(value, key);
        } else if (key == "spine_replicates") {
            config.spine_replicates = parse_u64(value, key);
        } else if (key == "conditional_replicates") {
            config.conditional_replicates = parse_u64(value, key);
        } else if (key == "conditional_n") {
            config.conditional_n = parse_int(value, key);
        } else if (key == "occupation_eps") {
            config.occupation_eps = parse_double(value, key);
        } else if (key == "env_seed") {
            config.env_seed = parse_u64(value, key);
        } else if (key == "env_count") {
            config.env_count = static_cast<unsigned>(parse_u64(value, key));
        } else if (key == "master_seed") {
            config.master_seed = parse_u64(value, key);
        } else if (key == "workers") {
            config.workers = static_cast<unsigned>(parse_u64(value, key));
        } else if (key == "population_cap") {
            config.population_cap = parse_u64(value, key);
        } else if (key == "log_space") {
            config.log_space = parse_bool(value, key);
        } else if (key == "emit_size_histogram") {
            config.emit_size_histogram = parse_bool(value, key);
        } else if (key == "out") {
            config.out_dir = value;
        } else {
            throw ConfigError("config: unknown key '" + key + "'");
        }
    }
    if (!saw_any) throw ConfigError("config: empty configuration");
    if (!saw_kind) throw ConfigError("config: missing required key 'kind'");
    if (config.name.empty()) config.name = kind_name(config.kind);
    config.validate();
    return config;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void apply_overrides(ExperimentConfig& config, const ConfigOverrides& overrides) {
    if (overrides.master_seed) config.master_seed = *overrides.master_seed;
    if (overrides.workers) config.workers = *overrides.workers;
    if (overrides.methods) config.methods = *overrides.methods;
    if (overrides.out_dir) config.out_dir = *overrides.out_dir;
    config.validate();
}

std::string canonical_config(const ExperimentConfig& config) {
    std::ostringstream out;
    out << "kind = " << kind_name(config.kind) << '\n';
    out << "name = " << config.name << '\n';
    out << "dimension = " << config.dimension << '\n';
    out << "obstacle_p = " << fmt_double(config.obstacle_p) << '\n';
    out << "law = ";
    for (std::size_t i = 0; i < config.law_masses.size(); ++i) {
        if (i) out << ',';
        out << config.law_masses[i].count << ':' << fmt_double(config.law_masses[i].prob);
    }
    out << '\n';
    out << "horizons = ";
    for (std::size_t i = 0; i < config.horizons.size(); ++i) {
        if (i) out << ',';
        out << config.horizons[i];
    }
    out << '\n';
    out << "methods = ";
    for (std::size_t i = 0; i < config.methods.size(); ++i) {
        if (i) out << ',';
        out << method_name(config.methods[i]);
    }
    out << '\n';
    out << "mc_replicates = " << config.mc_replicates << '\n';
    out << "is_replicates = " << config.is_replicates << '\n';
    out << "spine_replicates = " << config.spine_replicates << '\n';
    out << "conditional_replicates = " << config.conditional_replicates << '\n';
    out << "conditional_n = " << config.conditional_n << '\n';
    out << "occupation_eps = " << fmt_double(config.occupation_eps) << '\n';
    out << "env_seed = " << config.env_seed << '\n';
    out << "env_count = " << config.env_count << '\n';
    out << "master_seed = " << config.master_seed << '\n';
    out << "population_cap = " << config.population_cap << '\n';
    out << "log_space = " << (config.log_space ? "true" : "false") << '\n';
    out << "emit_size_histogram = " << (config.emit_size_histogram ? "true" : "false") << '\n';
    // workers and out are execution details, not part of the experiment identity
    return out.str();
}

std::uint64_t config_content_hash(const ExperimentConfig& config) {
    return fnv1a(canonical_config(config));
}

std::string survival_csv_header() {
    return "n,method,estimate,stderr,replicates,truncated_count,env_seed,p,d,law_id,"
           "neg_log_estimate,wall_time_s";
}

std::string survival_row_csv(const SurvivalRow& row) {
    std::ostringstream out;
    out << row.n << ',' << method_name(row.method) << ',' << fmt_double(row.estimate) << ','
        << fmt_double(row.stderr_) << ',' << row.replicates << ',' << row.truncated_count << ','
        << row.env_seed << ',' << fmt_double(row.p) << ',' << row.d << ',' << row.law_id << ','
        << (row.has_neg_log ? fmt_double(row.neg_log) : std::string()) << ',';
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", row.wall_time_s);
    out << buf;
    return out.str();
}

std::vector<SurvivalRow> read_survival_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open result table '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || trim(line) != survival_csv_header()) {
        throw ConfigError("result table '" + path + "' has an unexpected header");
    }
    std::vector<SurvivalRow> rows;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                cells.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        cells.push_back(cur);
        if (cells.size() != 12) {
            throw ConfigError("result table '" + path + "' has a malformed row: " + line);
        }
        SurvivalRow row;
        row.n = parse_int(cells[0], "n");
        row.method = parse_method(cells[1]);
        row.estimate = parse_double(cells[2], "estimate");
        row.stderr_ = parse_double(cells[3], "stderr");
        row.replicates = parse_u64(cells[4], "replicates");
        row.truncated_count = parse_u64(cells[5], "truncated_count");
        row.env_seed = parse_u64(cells[6], "env_seed");
        row.p = parse_double(cells[7], "p");
        row.d = static_cast<int>(parse_int(cells[8], "d"));
        row.law_id = cells[9];
        if (!cells[10].empty()) {
            row.has_neg_log = true;
            row.neg_log = parse_double(cells[10], "neg_log_estimate");
        }
        row.wall_time_s = parse_double(cells[11], "wall_time_s");
        rows.push_back(row);
    }
    return rows;
}

CurveResult run_survival_curve(const ExperimentConfig& config) {
    config.validate();
    if (config.kind != ExperimentKind::SurvivalCurve) {
        throw ConfigError("run_survival_curve: config kind is not survival-curve");
    }
    const OffspringLaw law = config.law();

    CurveResult result;
    json averages = json::array();

    // accumulated per (n, method) across environments for the summary
    std::map<std::pair<std::int64_t, int>, std::vector<double>> by_cell;

    for (unsigned e = 0; e < config.env_count; ++e) {
        EnvironmentSpec env_spec;
        env_spec.dimension = config.dimension;
        env_spec.obstacle_probability = config.obstacle_p;
        env_spec.master_seed = env_seed_for(config, e);
        const ObstacleField field = make_field(env_spec);

        for (const std::int64_t n : config.horizons) {
            for (const Method method : config.methods) {
                const auto start = std::chrono::steady_clock::now();
                SurvivalRow row;
                row.n = n;
                row.method = method;
                row.env_seed = env_spec.master_seed;
                row.p = config.obstacle_p;
                row.d = config.dimension;
                row.law_id = law.id();

                const std::uint64_t seed = row_master_seed(config, env_spec.master_seed, n, method);
                try {
                    switch (method) {
                        case Method::DirectMc: {
                            SimOptions opts;
                            opts.population_cap = config.population_cap;
                            opts.workers = config.workers;
                            const SurvivalEstimate est = estimate_survival_mc(
                                field, law, n, config.mc_replicates, seed, opts);
                            row.estimate = est.estimate;
                            row.stderr_ = est.stderr_;
                            row.replicates = est.replicates;
                            row.truncated_count = est.truncated_count;
                            break;
                        }
                        case Method::SpineIs: {
                            SpineOptions opts;
                            opts.population_cap = config.population_cap;
                            opts.workers = config.workers;
                            const SurvivalEstimate est = estimate_survival_is(
                                field, law, n, config.is_replicates, seed, opts);
                            row.estimate = est.estimate;
                            row.stderr_ = est.stderr_;
                            row.replicates = est.replicates;
                            row.truncated_count = est.truncated_count;
                            break;
                        }
                        case Method::ExactDp: {
                            if (config.log_space) {
                                const double log_p = log_survival_exact(field, law, n);
                                row.has_neg_log = true;
                                row.neg_log = -log_p;
                                row.estimate = std::exp(log_p);
                            } else {
                                row.estimate = survival_exact(field, law, n);
                            }
                            row.stderr_ = 0.0;
                            row.replicates = 1;
                            break;
                        }
                    }
                } catch (const CapacityError& err) {
                    result.row_errors.push_back("env_seed=" + std::to_string(row.env_seed) +
                                                " n=" + std::to_string(n) + " method=" +
                                                method_name(method) + ": " + err.what());
                    continue;
                }
                row.wall_time_s =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                        .count();
                by_cell[{n, static_cast<int>(method)}].push_back(row.estimate);
                result.rows.push_back(row);
            }
        }
    }

    for (const auto& [cell, values] : by_cell) {
        double sum = 0.0;
        for (double v : values) sum += v;
        const double mean = sum / static_cast<double>(values.size());
        double sq = 0.0;
        for (double v : values) sq += (v - mean) * (v - mean);
        json avg;
        avg["n"] = cell.first;
        avg["method"] = method_name(static_cast<Method>(cell.second));
        avg["env_mean"] = mean;
        avg["env_stderr"] = values.size() > 1
                                ? std::sqrt(sq / (static_cast<double>(values.size() - 1) *
                                                  static_cast<double>(values.size())))
                                : 0.0;
        avg["environments"] = values.size();
        averages.push_back(avg);
    }

    json summary;
    summary["meta"] = meta_json(config);
    summary["environment_averages"] = averages;
    summary["row_count"] = result.rows.size();
    summary["errors"] = result.row_errors;

    // optional diagnostic: empirical |Z_n| distribution conditioned on survival
    // at the largest horizon (the conjectured exponential profile; no check)
    if (config.emit_size_histogram && !config.horizons.empty() &&
        std::find(config.methods.begin(), config.methods.end(), Method::DirectMc) !=
            config.methods.end()) {
        const std::int64_t n = config.horizons.back();
        EnvironmentSpec env_spec;
        env_spec.dimension = config.dimension;
        env_spec.obstacle_probability = config.obstacle_p;
        env_spec.master_seed = env_seed_for(config, 0);
        const ObstacleField field = make_field(env_spec);
        const std::uint64_t replicas = std::min<std::uint64_t>(config.mc_replicates, 200'000);
        const std::uint64_t seed = mix64(config.master_seed ^ 0x5a17u);
        std::map<std::uint64_t, std::uint64_t> hist;
        std::uint64_t survivors = 0;
        double sum_ratio = 0.0;
        for (std::uint64_t r = 0; r < replicas; ++r) {
            auto rng = make_stream(seed, StreamDomain::McReplica, r);
            const ReplicaOutcome out = run_replica(field, law, n, rng, config.population_cap);
            if (!out.survived) continue;
            ++survivors;
            ++hist[out.final_size];
            sum_ratio += static_cast<double>(out.final_size) / static_cast<double>(n);
        }
        json diag;
        diag["n"] = n;
        diag["replicates"] = replicas;
        diag["survivors"] = survivors;
        diag["mean_size_over_n"] = survivors ? sum_ratio / static_cast<double>(survivors) : 0.0;
        json cells = json::array();
        for (const auto& [size, count] : hist) cells.push_back({{"size", size}, {"count", count}});
        diag["histogram"] = cells;
        summary["size_histogram_diagnostic"] = diag;
    }

    result.summary_json = summary.dump(2);
    return result;
}

namespace {

std::filesystem::path output_stem(const ExperimentConfig& config) {
    std::filesystem::create_directories(config.out_dir);
    const std::string stem = config.name + "-" + hash_hex(config_content_hash(config));
    return std::filesystem::path(config.out_dir) / stem;
}

bool matching_json_exists(const std::string& json_path, const ExperimentConfig& config) {
    std::ifstream in(json_path);
    if (!in) return false;
    try {
        json parsed = json::parse(in);
        return parsed.contains("meta") &&
               parsed["meta"].value("config_hash", "") == hash_hex(config_content_hash(config));
    } catch (const json::exception&) {
        return false;
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << text;
}

}  // namespace

RunOutput run_and_write_curve(const ExperimentConfig& config) {
    config.validate();
    RunOutput out;
    const auto stem = output_stem(config);
    out.csv_path = stem.string() + ".csv";
    out.json_path = stem.string() + ".json";

    if (std::filesystem::exists(out.csv_path) && matching_json_exists(out.json_path, config)) {
        out.reused = true;
        out.result.rows = read_survival_csv(out.csv_path);
        std::ifstream in(out.json_path);
        std::ostringstream buf;
        buf << in.rdbuf();
        out.result.summary_json = buf.str();
        return out;
    }

    out.result = run_survival_curve(config);
    std::ostringstream csv;
    csv << survival_csv_header() << '\n';
    for (const auto& row : out.result.rows) csv << survival_row_csv(row) << '\n';
    write_text(out.csv_path, csv.str());
    write_text(out.json_path, out.result.summary_json);
    return out;
}

ScalingFit fit_critical_constant(const std::vector<SurvivalRow>& rows, double q) {
    if (!(q > 0.0 && q <= 1.0)) {
        throw std::invalid_argument("fit_critical_constant: q must lie in (0,1]");
    }
    ScalingFit fit;
    fit.kind = ScalingFit::Kind::Critical;

    // (env, n) -> estimate, preferring exact_dp > direct_mc > spine_is
    auto rank = [](Method m) {
        switch (m) {
            case Method::ExactDp: return 0;
            case Method::DirectMc: return 1;
            case Method::SpineIs: return 2;
        }
        return 3;
    };
    std::map<std::uint64_t, std::map<std::int64_t, std::pair<int, double>>> best;
    for (const auto& row : rows) {
        if (row.n < 1) continue;
        auto& cell = best[row.env_seed];
        auto it = cell.find(row.n);
        if (it == cell.end() || rank(row.method) < it->second.first) {
            cell[row.n] = {rank(row.method), row.estimate};
        }
    }

    std::map<std::int64_t, std::pair<double, int>> dev_acc;  // n -> (sum |c-1|, count)
    for (const auto& [env, by_n] : best) {
        ScalingFit::Series series;
        series.env_seed = env;
        for (const auto& [n, cell] : by_n) {
            const double c = static_cast<double>(n) * q * cell.second / 2.0;
            series.points.emplace_back(n, c);
            auto& acc = dev_acc[n];
            acc.first += std::abs(c - 1.0);
            acc.second += 1;
        }
        fit.series.push_back(std::move(series));
    }

    for (const auto& [n, acc] : dev_acc) {
        fit.mean_abs_dev.emplace_back(n, acc.first / acc.second);
    }
    if (!fit.mean_abs_dev.empty()) {
        fit.largest_n_dev = fit.mean_abs_dev.back().second;
        fit.deviation_shrinks = fit.mean_abs_dev.back().second <=
                                fit.mean_abs_dev.front().second + 1e-15;
    }
    return fit;
}

ScalingFit fit_subcritical_rate(const std::vector<SurvivalRow>& rows, int d) {
    if (d < 1) throw std::invalid_argument("fit_subcritical_rate: d must be >= 1");
    ScalingFit fit;
    fit.kind = ScalingFit::Kind::Subcritical;

    std::map<std::uint64_t, std::map<std::int64_t, double>> neg_logs;
    for (const auto& row : rows) {
        if (row.n < 2) continue;  // log n degenerate at n = 1
        double neg_log;
        if (row.has_neg_log) {
            neg_log = row.neg_log;
        } else if (row.estimate > 0.0) {
            neg_log = -std::log(row.estimate);
        } else {
            continue;
        }
        neg_logs[row.env_seed][row.n] = neg_log;
    }

    bool any_env = false;
    bool all_decreasing = true;
    double ratio_sum = 0.0;
    int ratio_count = 0;
    double flat_min = std::numeric_limits<double>::infinity();
    double flat_max = 0.0;

    for (const auto& [env, by_n] : neg_logs) {
        ScalingFit::Series r_series;
        ScalingFit::Series a_series;
        r_series.env_seed = env;
        a_series.env_seed = env;
        double prev_a = std::numeric_limits<double>::infinity();
        bool decreasing = true;
        for (const auto& [n, neg_log] : by_n) {
            const double nd = static_cast<double>(n);
            const double a_over_n = neg_log / nd;
            const double r_n =
                neg_log * std::pow(std::log(nd), 2.0 / static_cast<double>(d)) / nd;
            r_series.points.emplace_back(n, r_n);
            a_series.points.emplace_back(n, a_over_n);
            if (a_over_n >= prev_a) decreasing = false;
            prev_a = a_over_n;
            flat_min = std::min(flat_min, a_over_n);
            flat_max = std::max(flat_max, a_over_n);
        }
        if (a_series.points.size() >= 2) {
            any_env = true;
            if (!decreasing) all_decreasing = false;
            ratio_sum += a_series.points.back().second / a_series.points.front().second;
            ++ratio_count;
        }
        fit.series.push_back(std::move(r_series));
        fit.an_over_n.push_back(std::move(a_series));
    }

    fit.sublinear = any_env && all_decreasing;
    fit.decay_ratio = ratio_count ? ratio_sum / ratio_count : 0.0;
    if (flat_max > 0.0 && flat_min <= flat_max) {
        fit.nonspatial_profile = (flat_max - flat_min) <= 0.01 * flat_max;
    }
    return fit;
}

std::string scaling_fit_json(const ScalingFit& fit) {
    json out;
    out["kind"] = fit.kind == ScalingFit::Kind::Critical ? "critical" : "subcritical";
    json series = json::array();
    for (const auto& s : fit.series) {
        json pts = json::array();
        for (const auto& [n, v] : s.points) pts.push_back({{"n", n}, {"value", v}});
        series.push_back({{"env_seed", s.env_seed}, {"points", pts}});
    }
    out["series"] = series;
    if (fit.kind == ScalingFit::Kind::Critical) {
        json dev = json::array();
        for (const auto& [n, v] : fit.mean_abs_dev) dev.push_back({{"n", n}, {"value", v}});
        out["mean_abs_dev"] = dev;
        out["largest_n_dev"] = fit.largest_n_dev;
        out["deviation_shrinks"] = fit.deviation_shrinks;
    } else {
        json an = json::array();
        for (const auto& s : fit.an_over_n) {
            json pts = json::array();
            for (const auto& [n, v] : s.points) pts.push_back({{"n", n}, {"value", v}});
            an.push_back({{"env_seed", s.env_seed}, {"points", pts}});
        }
        out["an_over_n"] = an;
        out["sublinear"] = fit.sublinear;
        out["nonspatial_profile"] = fit.nonspatial_profile;
        out["decay_ratio"] = fit.decay_ratio;
    }
    return out.dump(2);
}

SpineStatsOutput run_and_write_spine_stats(const ExperimentConfig& config) {
    config.validate();
    if (config.kind != ExperimentKind::SpineStats) {
        throw ConfigError("run_and_write_spine_stats: config kind is not spine-stats");
    }
    SpineStatsOutput out;
    const auto stem = output_stem(config);
    out.json_path = stem.string() + ".json";
    if (matching_json_exists(out.json_path, config)) {
        out.reused = true;
        std::ifstream in(out.json_path);
        std::ostringstream buf;
        buf << in.rdbuf();
        out.summary_json = buf.str();
        return out;
    }

    const OffspringLaw law = config.law();
    const std::int64_t n = config.horizons[0];

    json summary;
    summary["meta"] = meta_json(config);
    json envs = json::array();
    for (unsigned e = 0; e < config.env_count; ++e) {
        EnvironmentSpec env_spec;
        env_spec.dimension = config.dimension;
        env_spec.obstacle_probability = config.obstacle_p;
        env_spec.master_seed = env_seed_for(config, e);
        const ObstacleField field = make_field(env_spec);

        SpineOptions opts;
        opts.population_cap = config.population_cap;
        opts.workers = config.workers;
        const std::uint64_t seed =
            row_master_seed(config, env_spec.master_seed, n, Method::SpineIs);

        const OccupationStats stats = occupation_frequency_stats(
            field, n, config.spine_replicates, seed, config.occupation_eps, opts);
        json env;
        env["env_seed"] = env_spec.master_seed;
        env["n"] = stats.horizon;
        env["replicates"] = stats.replicates;
        env["occupation_mean"] = stats.mean;
        env["occupation_stddev"] = stats.stddev;
        env["tail_eps"] = stats.eps;
        env["tail_fraction"] = stats.tail_fraction;

        if (config.conditional_n >= 0) {
            const std::uint64_t cseed =
                row_master_seed(config, env_spec.master_seed, config.conditional_n,
                                Method::SpineIs) ^ 0xC01DULL;
            const ConditionalCheck check = conditional_population_check(
                field, law, config.conditional_n, config.conditional_replicates, cseed, opts);
            json cc;
            cc["n"] = config.conditional_n;
            cc["replicates"] = check.replicates;
            cc["accepted"] = check.accepted;
            cc["conclusive"] = check.conclusive;
            cc["is_estimate"] = check.is_estimate;
            cc["is_stderr"] = check.is_stderr;
            cc["dp_value"] = check.dp_value;
            cc["agree"] = check.agree;
            env["conditional_check"] = cc;
        }
        envs.push_back(env);
    }
    summary["environments"] = envs;
    out.summary_json = summary.dump(2);
    write_text(out.json_path, out.summary_json);
    return out;
}

// ---------------------------------------------------------------------------
// validation profile

namespace {

using Check = ValidationReport::Check;

std::string num(double v) { return fmt_double(v); }

Check check_environment_statistics() {
    Check check{"environment_statistics", true, ""};
    // chi-square GOF against Bernoulli(p) over a 10^4-site window, 1 df;
    // critical value at significance 1e-3 is 10.828
    for (double p : {0.2, 0.5, 0.8}) {
        EnvironmentSpec spec;
        spec.dimension = 2;
        spec.obstacle_probability = p;
        spec.master_seed = 9001;
        const ObstacleField field = make_field(spec);
        std::int64_t obstacles = 0;
        const std::int64_t total = 10'000;
        Site site(2);
        for (std::int32_t x = 0; x < 100; ++x) {
            for (std::int32_t y = 0; y < 100; ++y) {
                site[0] = x;
                site[1] = y;
                if (!field.is_vacant(site)) ++obstacles;
            }
        }
        const double expected_obs = p * static_cast<double>(total);
        const double expected_vac = (1.0 - p) * static_cast<double>(total);
        const double chi2 =
            (obstacles - expected_obs) * (obstacles - expected_obs) / expected_obs +
            (total - obstacles - expected_vac) * (total - obstacles - expected_vac) /
                expected_vac;
        if (chi2 > 10.828) {
            check.pass = false;
            check.detail += "chi2(p=" + num(p) + ")=" + num(chi2) + " ";
        }
    }
    // neighbor correlation over 1e5 pairs
    {
        EnvironmentSpec spec;
        spec.dimension = 1;
        spec.obstacle_probability = 0.5;
        spec.master_seed = 9002;
        const ObstacleField field = make_field(spec);
        const std::int64_t pairs = 100'000;
        double sum_x = 0, sum_y = 0, sum_xx = 0, sum_yy = 0, sum_xy = 0;
        Site site(1);
        for (std::int64_t i = 0; i < pairs; ++i) {
            site[0] = static_cast<std::int32_t>(i);
            const double x = field.is_vacant(site) ? 1.0 : 0.0;
            site[0] = static_cast<std::int32_t>(i + 1);
            const double y = field.is_vacant(site) ? 1.0 : 0.0;
            sum_x += x;
            sum_y += y;
            sum_xx += x * x;
            sum_yy += y * y;
            sum_xy += x * y;
        }
        const double nd = static_cast<double>(pairs);
        const double cov = sum_xy / nd - (sum_x / nd) * (sum_y / nd);
        const double vx = sum_xx / nd - (sum_x / nd) * (sum_x / nd);
        const double vy = sum_yy / nd - (sum_y / nd) * (sum_y / nd);
        const double corr = cov / std::sqrt(vx * vy);
        if (std::abs(corr) >= 0.02) {
            check.pass = false;
            check.detail += "neighbor_corr=" + num(corr) + " ";
        }
    }
    if (check.pass) check.detail = "chi-square and neighbor-correlation bounds hold";
    return check;
}

Check check_cross_method(unsigned workers) {
    Check check{"cross_method", true, ""};
    EnvironmentSpec spec;
    spec.dimension = 1;
    spec.obstacle_probability = 0.5;
    spec.master_seed = 2001;
    const ObstacleField field = make_field(spec);
    const OffspringLaw law = OffspringLaw::critical_binary();
    SimOptions mc_opts;
    mc_opts.workers = workers;
    SpineOptions is_opts;
    is_opts.workers = workers;
    for (std::int64_t n : {10, 20}) {
        const double exact = survival_exact(field, law, n);
        const SurvivalEstimate mc = estimate_survival_mc(field, law, n, 200'000, 404, mc_opts);
        const SurvivalEstimate is = estimate_survival_is(field, law, n, 20'000, 505, is_opts);
        if (std::abs(mc.estimate - exact) > 3.0 * mc.stderr_) {
            check.pass = false;
            check.detail += "mc(n=" + std::to_string(n) + ")=" + num(mc.estimate) +
                            " vs exact=" + num(exact) + " ";
        }
        if (std::abs(is.estimate - exact) > 3.0 * is.stderr_) {
            check.pass = false;
            check.detail += "is(n=" + std::to_string(n) + ")=" + num(is.estimate) +
                            " vs exact=" + num(exact) + " ";
        }
    }
    if (check.pass) check.detail = "direct MC and spine IS agree with the exact DP";
    return check;
}

Check check_martingale(unsigned workers) {
    Check check{"martingale", true, ""};
    const OffspringLaw law = OffspringLaw::critical_binary();
    for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
        for (int d : {1, 2}) {
            EnvironmentSpec spec;
            spec.dimension = d;
            spec.obstacle_probability = 0.5;
            spec.master_seed = seed;
            const ObstacleField field = make_field(spec);
            const std::int64_t n = d == 1 ? 50 : 30;
            const double u = expected_population(field, law, n);
            if (std::abs(u - 1.0) > 1e-12) {
                check.pass = false;
                check.detail += "u(d=" + std::to_string(d) + ",seed=" + std::to_string(seed) +
                                ")=" + num(u) + " ";
            }
        }
    }
    {
        EnvironmentSpec spec;
        spec.dimension = 1;
        spec.obstacle_probability = 0.5;
        spec.master_seed = 14;
        const ObstacleField field = make_field(spec);
        SimOptions opts;
        opts.workers = workers;
        const SurvivalEstimate mean =
            estimate_mean_population_mc(field, law, 10, 200'000, 606, opts);
        if (std::abs(mean.estimate - 1.0) > 3.0 * mean.stderr_) {
            check.pass = false;
            check.detail += "mc_mean=" + num(mean.estimate) + " stderr=" + num(mean.stderr_);
        }
    }
    if (check.pass) check.detail = "E|Z_n| = 1 exactly in DP and within 3 stderr in MC";
    return check;
}

Check check_sandwich() {
    Check check{"sandwich", true, ""};
    const OffspringLaw law =
        OffspringLaw::from_masses({{0, 0.6}, {1, 0.2}, {2, 0.2}});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        EnvironmentSpec spec;
        spec.dimension = 1;
        spec.obstacle_probability = 0.5;
        spec.master_seed = 3000 + seed;
        const ObstacleField field = make_field(spec);
        for (std::int64_t n : {1, 5, 15, 30}) {
            const SandwichResult r = sandwich_check(field, law, n);
            if (!r.holds) {
                check.pass = false;
                check.detail += "seed=" + std::to_string(spec.master_seed) +
                                " n=" + std::to_string(n) + " ";
            }
        }
    }
    if (check.pass) check.detail = "DV(mu*) <= P(S_n) <= DV(mu) on all instances";
    return check;
}

Check check_monotonicity() {
    Check check{"quenched_monotonicity", true, ""};
    const OffspringLaw law = OffspringLaw::critical_binary();
    const ObstacleField free_field = ObstacleField::all_vacant(1);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        EnvironmentSpec spec;
        spec.dimension = 1;
        spec.obstacle_probability = 0.5;
        spec.master_seed = 4000 + seed;
        const ObstacleField field = make_field(spec);
        for (std::int64_t n : {1, 10, 30}) {
            const double with_obstacles = survival_exact(field, law, n);
            const double free_case = survival_exact(free_field, law, n);
            if (with_obstacles < free_case - 1e-12) {
                check.pass = false;
                check.detail += "seed=" + std::to_string(spec.master_seed) +
                                " n=" + std::to_string(n) + " ";
            }
        }
    }
    // annealed trend: environment-averaged survival nondecreasing in p
    const std::int64_t n = 20;
    double prev_mean = -1.0;
    double prev_se = 0.0;
    for (double p : {0.2, 0.5, 0.8}) {
        double sum = 0.0, sum_sq = 0.0;
        const int envs = 50;
        for (int e = 0; e < envs; ++e) {
            EnvironmentSpec spec;
            spec.dimension = 1;
            spec.obstacle_probability = p;
            spec.master_seed = 5000 + static_cast<std::uint64_t>(e);
            const double s = survival_exact(make_field(spec), law, n);
            sum += s;
            sum_sq += s * s;
        }
        const double mean = sum / envs;
        const double var = std::max(0.0, (sum_sq - envs * mean * mean) / (envs - 1.0));
        const double se = std::sqrt(var / envs);
        if (prev_mean >= 0.0 && mean < prev_mean - 2.0 * (se + prev_se)) {
            check.pass = false;
            check.detail += "mean(p=" + num(p) + ")=" + num(mean) + " < previous ";
        }
        prev_mean = mean;
        prev_se = se;
    }
    if (check.pass) check.detail = "P(S_n) >= p=0 case pointwise; annealed trend nondecreasing";
    return check;
}

Check check_spine(unsigned workers) {
    Check check{"spine_consistency", true, ""};
    const OffspringLaw law = OffspringLaw::critical_binary();
    EnvironmentSpec spec;
    spec.dimension = 1;
    spec.obstacle_probability = 0.5;
    spec.master_seed = 6001;
    const ObstacleField field = make_field(spec);
    SpineOptions opts;
    opts.workers = workers;

    // immortality + weight range
    for (std::uint64_t r = 0; r < 2000; ++r) {
        auto rng = make_stream(707, StreamDomain::SpineReplica, r);
        const SpineRealization real = run_spine(field, law, 10, rng);
        if (real.total_population < 1 || real.weight <= 0.0 || real.weight > 1.0) {
            check.pass = false;
            check.detail += "immortality violated at replica " + std::to_string(r) + " ";
            break;
        }
    }

    const double exact = survival_exact(field, law, 6);
    const SurvivalEstimate is = estimate_survival_is(field, law, 6, 20'000, 808, opts);
    if (std::abs(is.estimate - exact) > 3.0 * is.stderr_) {
        check.pass = false;
        check.detail += "is(n=6)=" + num(is.estimate) + " vs exact=" + num(exact) + " ";
    }

    const ConditionalCheck cc = conditional_population_check(field, law, 6, 4000, 909, opts);
    if (!cc.conclusive || !cc.agree) {
        check.pass = false;
        check.detail += "conditional check accepted=" + std::to_string(cc.accepted) +
                        " is=" + num(cc.is_estimate) + " dp=" + num(cc.dp_value) + " ";
    }

    const OccupationStats free_stats =
        occupation_frequency_stats(ObstacleField::all_vacant(1), 100, 50, 1010, 0.1, opts);
    const OccupationStats blocked_stats =
        occupation_frequency_stats(ObstacleField::all_obstacles(1), 100, 50, 1011, 0.1, opts);
    if (free_stats.mean != 1.0 || blocked_stats.mean != 0.0) {
        check.pass = false;
        check.detail += "diagnostic occupation means off ";
    }
    if (check.pass) check.detail = "immortal, unbiased, conditional identity holds";
    return check;
}

Check check_determinism() {
    Check check{"determinism", true, ""};
    EnvironmentSpec spec;
    spec.dimension = 1;
    spec.obstacle_probability = 0.5;
    spec.master_seed = 7001;
    const ObstacleField field = make_field(spec);
    const OffspringLaw law = OffspringLaw::critical_binary();

    SimOptions one;
    one.workers = 1;
    SimOptions four;
    four.workers = 4;
    const SurvivalEstimate a = estimate_survival_mc(field, law, 15, 50'000, 111, one);
    const SurvivalEstimate b = estimate_survival_mc(field, law, 15, 50'000, 111, four);
    if (a.estimate != b.estimate || a.stderr_ != b.stderr_ ||
        a.truncated_count != b.truncated_count) {
        check.pass = false;
        check.detail += "direct MC differs across worker counts ";
    }
    SpineOptions sone;
    sone.workers = 1;
    SpineOptions sfour;
    sfour.workers = 4;
    const SurvivalEstimate c = estimate_survival_is(field, law, 15, 20'000, 222, sone);
    const SurvivalEstimate d = estimate_survival_is(field, law, 15, 20'000, 222, sfour);
    if (c.estimate != d.estimate || c.stderr_ != d.stderr_) {
        check.pass = false;
        check.detail += "spine IS differs across worker counts ";
    }
    if (check.pass) check.detail = "estimates are bit-identical for 1 and 4 workers";
    return check;
}

}  // namespace

ValidationReport validate(const ValidateOptions& opts) {
    ValidationReport report;
    report.checks.push_back(check_environment_statistics());
    report.checks.push_back(check_cross_method(opts.workers));
    report.checks.push_back(check_martingale(opts.workers));
    report.checks.push_back(check_sandwich());
    report.checks.push_back(check_monotonicity());
    report.checks.push_back(check_spine(opts.workers));
    report.checks.push_back(check_determinism());
    return report;
}

}  // namespace brw
