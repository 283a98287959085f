#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "entroflow/fokker_planck.hpp"
#include "entroflow/grid.hpp"
#include "entroflow/potential.hpp"
#include "entroflow/sde.hpp"

namespace entroflow {

struct PotentialSpec {
    std::string name = "quadratic";
    std::vector<double> params;
};

/// Initial law: "gaussian" (mean, variance), "mixture" (components),
/// "gibbs" (start at q) or "nodes" (raw values on the grid).
struct InitialSpec {
    std::string kind = "gaussian";
    double mean = 1.0;
    double variance = 1.0;
    std::vector<MixtureComponent> components;
    std::vector<double> nodes;
};

struct TimeSpec {
    double horizon = 0.5;
    double dt = 1e-3;
    std::size_t store_stride = 1;
    double t_min = 1e-3;
    /// Times at which E_Q[l(t, X(t))] is estimated by the entropy report.
    std::vector<double> probe_times;
};

struct EnsembleSpec {
    bool enabled = true;
    std::size_t particles = 100000;
    std::uint64_t seed = 1;
    std::size_t record_stride = 50;
    std::size_t histogram_bins = 64;
};

struct ControlSpec {
    /// "zero", "score_optimal", "lambda_optimal", "constant:<c>", "sine:<a>".
    std::vector<std::string> policies{"score_optimal", "zero", "constant:0.5"};
    /// "first" (reversed, cost of leg [0, T]) or "second" (forward, leg [T, 2T]).
    std::string stage = "first";
};

struct IterateSpec {
    std::size_t stages = 6;
    std::vector<std::size_t> verify_stages{0, 1};
    double early_stop = 1e-6;
};

struct ErgodicSpec {
    double lower = 0.0;
    double upper = 8.0;
    double horizon = 1e4;
    double dt = 1e-2;
    std::size_t trajectories = 16;
};

struct Tolerances {
    double relative = 1e-2;
    double standard_errors = 3.0;
    double stationary_entropy = 1e-8;
    double dissipation_relative = 2e-2;
    double dissipation_absolute = 1e-8;
    double integral_relative = 1e-2;
    double marginal_tv = 2e-2;
    double pinsker_slack = 1e-6;
    double monotone_slack = 1e-6;
    double decay_factor = 1e-2;
    double occupation = 1e-2;
};

/// Every field has a default; the defaults table in the README lists them.
struct ExperimentConfig {
    PotentialSpec potential;
    Interval domain{-8.0, 8.0};
    std::size_t resolution = 1024;
    InitialSpec initial;
    TimeSpec time;
    EnsembleSpec ensemble;
    ControlSpec control;
    IterateSpec iterate;
    ErgodicSpec ergodic;
    /// Empty: resolved at run time (ENTROFLOW_OUT or ./entroflow-out).
    std::string output;
    /// Write every k-th stored density slice to density.csv.
    std::size_t density_stride = 10;
    Tolerances tolerances;
};

/// Builds a config from parsed JSON. Unknown keys and out-of-range values throw
/// ConfigError naming the key.
ExperimentConfig config_from_json(const nlohmann::ordered_json& doc);
/// Full config with every default filled in.
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
/// Reads TOML, or JSON when the file ends in .json.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(std::string_view text, bool json);

Potential make_potential(const ExperimentConfig& config);
Grid make_grid(const ExperimentConfig& config);
std::vector<double> make_initial(const ExperimentConfig& config, const Grid& grid, const GibbsMeasure& gibbs);
/// Parses a policy string; throws ConfigError for an unknown form.
ControlPolicy parse_policy(const std::string& text);

}  // namespace entroflow
