#include "entroflow/config.hpp"

#include <cmath>
#include <initializer_list>
#include <set>
#include <string_view>

#include "entroflow/error.hpp"
#include "entroflow/io.hpp"
#include "entroflow/toml_reader.hpp"

namespace entroflow {

namespace {

using Json = nlohmann::ordered_json;

void allow_only(const Json& table, const std::string& where, std::initializer_list<std::string_view> keys) {
    if (!table.is_object()) throw ConfigError("'" + where + "' must be a table");
    const std::set<std::string_view> allowed(keys);
    for (const auto& item : table.items()) {
        if (allowed.count(item.key()) == 0) {
            const std::string name = where.empty() ? item.key() : where + "." + item.key();
            throw ConfigError("unknown key '" + name + "'");
        }
    }
}

std::string dotted(const std::string& where, const char* key) { return where.empty() ? key : where + "." + key; }

double read_double(const Json& table, const std::string& where, const char* key, double fallback) {
    if (!table.contains(key)) return fallback;
    const Json& v = table.at(key);
    if (!v.is_number()) throw ConfigError("'" + dotted(where, key) + "' must be a number");
    return v.get<double>();
}

double read_positive(const Json& table, const std::string& where, const char* key, double fallback) {
    const double v = read_double(table, where, key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("'" + dotted(where, key) + "' must be positive and finite");
    return v;
}

double read_nonnegative(const Json& table, const std::string& where, const char* key, double fallback) {
    const double v = read_double(table, where, key, fallback);
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("'" + dotted(where, key) + "' must be >= 0");
    return v;
}

std::uint64_t read_count(const Json& table, const std::string& where, const char* key, std::uint64_t fallback,
                         std::uint64_t minimum = 1) {
    if (!table.contains(key)) return fallback;
    const Json& v = table.at(key);
    std::uint64_t out = 0;
    if (v.is_number_unsigned()) {
        out = v.get<std::uint64_t>();
    } else if (v.is_number_integer() && v.get<long long>() >= 0) {
        out = static_cast<std::uint64_t>(v.get<long long>());
    } else if (v.is_number_float() && v.get<double>() >= 0.0 && v.get<double>() < 1.8e19 &&
               std::floor(v.get<double>()) == v.get<double>()) {
        out = static_cast<std::uint64_t>(v.get<double>());
    } else {
        throw ConfigError("'" + dotted(where, key) + "' must be a non-negative integer");
    }
    if (out < minimum) throw ConfigError("'" + dotted(where, key) + "' must be >= " + std::to_string(minimum));
    return out;
}

bool read_bool(const Json& table, const std::string& where, const char* key, bool fallback) {
    if (!table.contains(key)) return fallback;
    if (!table.at(key).is_boolean()) throw ConfigError("'" + dotted(where, key) + "' must be true or false");
    return table.at(key).get<bool>();
}

std::string read_string(const Json& table, const std::string& where, const char* key, const std::string& fallback) {
    if (!table.contains(key)) return fallback;
    if (!table.at(key).is_string()) throw ConfigError("'" + dotted(where, key) + "' must be a string");
    return table.at(key).get<std::string>();
}

std::vector<double> read_numbers(const Json& table, const std::string& where, const char* key,
                                 std::vector<double> fallback) {
    if (!table.contains(key)) return fallback;
    const Json& v = table.at(key);
    if (!v.is_array()) throw ConfigError("'" + dotted(where, key) + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError("'" + dotted(where, key) + "' must be an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

const Json& section(const Json& doc, const char* key) {
    static const Json empty = Json::object();
    return doc.contains(key) ? doc.at(key) : empty;
}

}  // namespace

ExperimentConfig config_from_json(const Json& doc) {
    allow_only(doc, "",
               {"potential", "domain", "initial", "time", "ensemble", "control", "iterate", "ergodic", "output",
                "tolerances"});
    ExperimentConfig c;

    const Json& pot = section(doc, "potential");
    allow_only(pot, "potential", {"name", "params"});
    c.potential.name = read_string(pot, "potential", "name", c.potential.name);
    c.potential.params = read_numbers(pot, "potential", "params", {});
    try {
        (void)builtin_potential(c.potential.name, c.potential.params);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("'potential': ") + e.what());
    }

    const Json& dom = section(doc, "domain");
    allow_only(dom, "domain", {"lower", "upper", "resolution"});
    c.domain.lower = read_double(dom, "domain", "lower", c.domain.lower);
    c.domain.upper = read_double(dom, "domain", "upper", c.domain.upper);
    if (!(c.domain.upper > c.domain.lower) || !std::isfinite(c.domain.width())) {
        throw ConfigError("'domain.upper' must exceed 'domain.lower'");
    }
    c.resolution = read_count(dom, "domain", "resolution", c.resolution, Grid::kMinPoints);

    const Json& init = section(doc, "initial");
    allow_only(init, "initial", {"kind", "mean", "variance", "components", "nodes"});
    c.initial.kind = read_string(init, "initial", "kind", c.initial.kind);
    c.initial.mean = read_double(init, "initial", "mean", c.initial.mean);
    c.initial.variance = read_positive(init, "initial", "variance", c.initial.variance);
    if (init.contains("components")) {
        const Json& comps = init.at("components");
        if (!comps.is_array()) throw ConfigError("'initial.components' must be an array of tables");
        for (std::size_t i = 0; i < comps.size(); ++i) {
            const std::string where = "initial.components[" + std::to_string(i) + "]";
            allow_only(comps[i], where, {"weight", "mean", "variance"});
            c.initial.components.push_back({read_positive(comps[i], where, "weight", 1.0),
                                            read_double(comps[i], where, "mean", 0.0),
                                            read_positive(comps[i], where, "variance", 1.0)});
        }
    }
    c.initial.nodes = read_numbers(init, "initial", "nodes", {});
    if (c.initial.kind == "mixture" && c.initial.components.empty()) {
        throw ConfigError("'initial.components' is required for a mixture");
    }
    if (c.initial.kind == "nodes" && c.initial.nodes.size() != c.resolution) {
        throw ConfigError("'initial.nodes' must have 'domain.resolution' entries");
    }
    if (c.initial.kind != "gaussian" && c.initial.kind != "mixture" && c.initial.kind != "gibbs" &&
        c.initial.kind != "nodes") {
        throw ConfigError("'initial.kind' must be gaussian, mixture, gibbs or nodes");
    }

    const Json& time = section(doc, "time");
    allow_only(time, "time", {"horizon", "dt", "store_stride", "t_min", "probe_times"});
    c.time.horizon = read_positive(time, "time", "horizon", c.time.horizon);
    c.time.dt = read_positive(time, "time", "dt", c.time.dt);
    if (c.time.dt > c.time.horizon) throw ConfigError("'time.dt' must not exceed 'time.horizon'");
    c.time.store_stride = read_count(time, "time", "store_stride", c.time.store_stride);
    c.time.t_min = read_nonnegative(time, "time", "t_min", c.time.t_min);
    c.time.probe_times = read_numbers(time, "time", "probe_times", {});
    for (double t : c.time.probe_times) {
        if (!(t >= 0.0) || t > c.time.horizon) throw ConfigError("'time.probe_times' must lie in [0, time.horizon]");
    }

    const Json& ens = section(doc, "ensemble");
    allow_only(ens, "ensemble", {"enabled", "particles", "seed", "record_stride", "histogram_bins"});
    c.ensemble.enabled = read_bool(ens, "ensemble", "enabled", c.ensemble.enabled);
    c.ensemble.particles = read_count(ens, "ensemble", "particles", c.ensemble.particles, 2);
    c.ensemble.seed = read_count(ens, "ensemble", "seed", c.ensemble.seed, 0);
    c.ensemble.record_stride = read_count(ens, "ensemble", "record_stride", c.ensemble.record_stride);
    c.ensemble.histogram_bins = read_count(ens, "ensemble", "histogram_bins", c.ensemble.histogram_bins, 15);

    const Json& ctl = section(doc, "control");
    allow_only(ctl, "control", {"policies", "stage"});
    if (ctl.contains("policies")) {
        const Json& list = ctl.at("policies");
        if (!list.is_array() || list.empty()) throw ConfigError("'control.policies' must be a non-empty array");
        c.control.policies.clear();
        for (const auto& p : list) {
            if (!p.is_string()) throw ConfigError("'control.policies' entries must be strings");
            c.control.policies.push_back(p.get<std::string>());
        }
    }
    for (const auto& p : c.control.policies) {
        try {
            (void)parse_policy(p);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("'control.policies': ") + e.what());
        }
    }
    c.control.stage = read_string(ctl, "control", "stage", c.control.stage);
    if (c.control.stage != "first" && c.control.stage != "second") {
        throw ConfigError("'control.stage' must be \"first\" or \"second\"");
    }

    const Json& it = section(doc, "iterate");
    allow_only(it, "iterate", {"stages", "verify_stages", "early_stop"});
    c.iterate.stages = read_count(it, "iterate", "stages", c.iterate.stages);
    if (it.contains("verify_stages")) {
        c.iterate.verify_stages.clear();
        for (double v : read_numbers(it, "iterate", "verify_stages", {})) {
            if (v < 0.0 || std::floor(v) != v) throw ConfigError("'iterate.verify_stages' must hold stage indices");
            c.iterate.verify_stages.push_back(static_cast<std::size_t>(v));
        }
    }
    c.iterate.early_stop = read_nonnegative(it, "iterate", "early_stop", c.iterate.early_stop);

    const Json& erg = section(doc, "ergodic");
    allow_only(erg, "ergodic", {"lower", "upper", "horizon", "dt", "trajectories"});
    c.ergodic.lower = std::max(read_double(erg, "ergodic", "lower", c.ergodic.lower), c.domain.lower);
    c.ergodic.upper = std::min(read_double(erg, "ergodic", "upper", c.domain.upper), c.domain.upper);
    if (!(c.ergodic.upper > c.ergodic.lower)) throw ConfigError("'ergodic.upper' must exceed 'ergodic.lower'");
    c.ergodic.horizon = read_positive(erg, "ergodic", "horizon", c.ergodic.horizon);
    c.ergodic.dt = read_positive(erg, "ergodic", "dt", c.ergodic.dt);
    c.ergodic.trajectories = read_count(erg, "ergodic", "trajectories", c.ergodic.trajectories, 2);

    if (doc.contains("output")) {
        const Json& out = doc.at("output");
        if (out.is_string()) {
            c.output = out.get<std::string>();
        } else {
            allow_only(out, "output", {"directory", "density_stride"});
            c.output = read_string(out, "output", "directory", c.output);
            c.density_stride = read_count(out, "output", "density_stride", c.density_stride);
        }
    }

    const Json& tol = section(doc, "tolerances");
    allow_only(tol, "tolerances",
               {"relative", "standard_errors", "stationary_entropy", "dissipation_relative", "dissipation_absolute",
                "integral_relative", "marginal_tv", "pinsker_slack", "monotone_slack", "decay_factor", "occupation"});
    auto& t = c.tolerances;
    t.relative = read_positive(tol, "tolerances", "relative", t.relative);
    t.standard_errors = read_positive(tol, "tolerances", "standard_errors", t.standard_errors);
    t.stationary_entropy = read_positive(tol, "tolerances", "stationary_entropy", t.stationary_entropy);
    t.dissipation_relative = read_positive(tol, "tolerances", "dissipation_relative", t.dissipation_relative);
    t.dissipation_absolute = read_nonnegative(tol, "tolerances", "dissipation_absolute", t.dissipation_absolute);
    t.integral_relative = read_positive(tol, "tolerances", "integral_relative", t.integral_relative);
    t.marginal_tv = read_positive(tol, "tolerances", "marginal_tv", t.marginal_tv);
    t.pinsker_slack = read_nonnegative(tol, "tolerances", "pinsker_slack", t.pinsker_slack);
    t.monotone_slack = read_nonnegative(tol, "tolerances", "monotone_slack", t.monotone_slack);
    t.decay_factor = read_nonnegative(tol, "tolerances", "decay_factor", t.decay_factor);
    t.occupation = read_positive(tol, "tolerances", "occupation", t.occupation);
    return c;
}

Json config_to_json(const ExperimentConfig& c) {
    Json j;
    j["potential"] = {{"name", c.potential.name}, {"params", c.potential.params}};
    j["domain"] = {{"lower", c.domain.lower}, {"upper", c.domain.upper}, {"resolution", c.resolution}};
    Json init = {{"kind", c.initial.kind}, {"mean", c.initial.mean}, {"variance", c.initial.variance}};
    Json comps = Json::array();
    for (const auto& m : c.initial.components) {
        comps.push_back({{"weight", m.weight}, {"mean", m.mean}, {"variance", m.variance}});
    }
    init["components"] = std::move(comps);
    init["nodes"] = c.initial.nodes;
    j["initial"] = std::move(init);
    j["time"] = {{"horizon", c.time.horizon},
                 {"dt", c.time.dt},
                 {"store_stride", c.time.store_stride},
                 {"t_min", c.time.t_min},
                 {"probe_times", c.time.probe_times}};
    j["ensemble"] = {{"enabled", c.ensemble.enabled},
                     {"particles", c.ensemble.particles},
                     {"seed", c.ensemble.seed},
                     {"record_stride", c.ensemble.record_stride},
                     {"histogram_bins", c.ensemble.histogram_bins}};
    j["control"] = {{"policies", c.control.policies}, {"stage", c.control.stage}};
    j["iterate"] = {{"stages", c.iterate.stages},
                    {"verify_stages", c.iterate.verify_stages},
                    {"early_stop", c.iterate.early_stop}};
    j["ergodic"] = {{"lower", c.ergodic.lower},
                    {"upper", c.ergodic.upper},
                    {"horizon", c.ergodic.horizon},
                    {"dt", c.ergodic.dt},
                    {"trajectories", c.ergodic.trajectories}};
    j["output"] = {{"directory", c.output}, {"density_stride", c.density_stride}};
    const auto& t = c.tolerances;
    j["tolerances"] = {{"relative", t.relative},
                       {"standard_errors", t.standard_errors},
                       {"stationary_entropy", t.stationary_entropy},
                       {"dissipation_relative", t.dissipation_relative},
                       {"dissipation_absolute", t.dissipation_absolute},
                       {"integral_relative", t.integral_relative},
                       {"marginal_tv", t.marginal_tv},
                       {"pinsker_slack", t.pinsker_slack},
                       {"monotone_slack", t.monotone_slack},
                       {"decay_factor", t.decay_factor},
                       {"occupation", t.occupation}};
    return j;
}

ExperimentConfig parse_config_text(std::string_view text, bool json) {
    Json doc;
    if (json) {
        try {
            doc = Json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(std::string("JSON config: ") + e.what());
        }
    } else {
        doc = parse_toml(text);
    }
    return config_from_json(doc);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_text(path);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return parse_config_text(text, path.extension() == ".json");
}

Potential make_potential(const ExperimentConfig& config) {
    return builtin_potential(config.potential.name, config.potential.params);
}

Grid make_grid(const ExperimentConfig& config) { return Grid(config.domain, config.resolution); }

std::vector<double> make_initial(const ExperimentConfig& config, const Grid& grid, const GibbsMeasure& gibbs) {
    const InitialSpec& s = config.initial;
    if (s.kind == "gaussian") return gaussian_slice(grid, s.mean, s.variance);
    if (s.kind == "mixture") return mixture_slice(grid, s.components);
    if (s.kind == "nodes") return normalized_slice(grid, s.nodes);
    if (!gibbs.finite()) throw ConfigError("'initial.kind' = \"gibbs\" needs a normalizable potential");
    const auto q = gibbs.density_nodes();
    return {q.begin(), q.end()};
}

ControlPolicy parse_policy(const std::string& text) {
    if (text == "zero") return ControlPolicy::zero();
    if (text == "score_optimal") return ControlPolicy::score_optimal();
    if (text == "lambda_optimal") return ControlPolicy::lambda_optimal();
    const auto colon = text.find(':');
    if (colon != std::string::npos) {
        const std::string kind = text.substr(0, colon);
        double value = 0.0;
        try {
            std::size_t used = 0;
            value = std::stod(text.substr(colon + 1), &used);
            if (used != text.size() - colon - 1) throw std::invalid_argument(text);
        } catch (const std::logic_error&) {
            throw ConfigError("bad policy parameter in '" + text + "'");
        }
        if (!std::isfinite(value)) throw ConfigError("bad policy parameter in '" + text + "'");
        if (kind == "constant") return ControlPolicy::constant_shift(value);
        if (kind == "sine") return ControlPolicy::sine_shift(value);
    }
    throw ConfigError("unknown policy '" + text + "'");
}

}  // namespace entroflow
