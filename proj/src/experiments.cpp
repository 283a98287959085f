#include "entroflow/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "entroflow/control.hpp"
#include "entroflow/entropy.hpp"
#include "entroflow/error.hpp"
#include "entroflow/io.hpp"
#include "entroflow/iterate.hpp"
#include "entroflow/parallel.hpp"
#include "entroflow/score.hpp"
#include "entroflow/sde.hpp"

#ifndef ENTROFLOW_VERSION
#define ENTROFLOW_VERSION "0.0.0"
#endif

namespace entroflow {

namespace fs = std::filesystem;
using Json = io::Json;

bool CommandOutcome::pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string version_string() { return ENTROFLOW_VERSION; }

const std::vector<std::string>& subcommand_names() {
    static const std::vector<std::string> names{"forward",        "reverse", "verify-control",
                                                "entropy-report", "iterate", "ergodic"};
    return names;
}

namespace {

constexpr double kBoundaryWarning = 1e-8;

struct Setup {
    Potential potential;
    Grid grid;
    GibbsMeasure gibbs;
    std::vector<double> p0;
};

Setup make_setup(const ExperimentConfig& config) {
    Potential potential = make_potential(config);
    GibbsMeasure gibbs = gibbs_measure(potential, config.domain, config.resolution);
    Grid grid = gibbs.grid();
    std::vector<double> p0 = make_initial(config, grid, gibbs);
    return {std::move(potential), std::move(grid), std::move(gibbs), std::move(p0)};
}

Grid histogram_bins(const ExperimentConfig& config) { return Grid(config.domain, config.ensemble.histogram_bins + 1); }

void add(CommandOutcome& out, std::string module, std::string name, bool pass, double value, double limit) {
    out.checks.push_back({std::move(module), std::move(name), pass, value, limit});
}

void warn_boundary(CommandOutcome& out, std::span<const double> slice, const std::string& what) {
    const double edge = std::max(slice.front(), slice.back());
    if (edge > kBoundaryWarning) {
        out.summary.push_back("warning: " + what + " density at the domain boundary is " + io::format_double(edge) +
                              " (> 1e-8); widen the domain");
        out.notes["boundary_warnings"].push_back(what);
    }
}

std::string write_file(CommandOutcome& out, const fs::path& dir, const std::string& name,
                       const std::string& contents) {
    io::write_text(dir / name, contents);
    out.files.push_back(name);
    return name;
}

std::string write_json(CommandOutcome& out, const fs::path& dir, const std::string& name, const Json& j) {
    return write_file(out, dir, name, j.dump(2) + "\n");
}

DensityField solve(const Setup& s, const ExperimentConfig& config, double horizon, std::size_t stride = 1) {
    FokkerPlanckOptions fp;
    fp.horizon = horizon;
    fp.dt = config.time.dt;
    fp.store_stride = stride;
    return solve_fokker_planck(s.potential, s.p0, s.grid, fp);
}

// At most about 200 exported slices whatever the configured stride.
std::size_t export_stride(const DensityField& field, std::size_t stride) {
    return std::max(stride, (field.times.size() + 199) / 200);
}

DensityField thin(const DensityField& field, std::size_t stride) {
    DensityField out;
    out.grid = field.grid;
    for (std::size_t k = 0; k < field.times.size(); ++k) {
        if (k % stride == 0 || k + 1 == field.times.size()) {
            out.times.push_back(field.times[k]);
            out.slices.push_back(field.slices[k]);
        }
    }
    return out;
}

void write_density_files(CommandOutcome& out, const fs::path& dir, const DensityField& field, std::size_t stride) {
    std::ostringstream csv;
    Json header;
    io::write_density(thin(field, export_stride(field, stride)), csv, header);
    write_file(out, dir, "density.csv", csv.str());
    write_json(out, dir, "density.json", header);
}

std::size_t nearest(std::span<const double> times, double t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (std::abs(times[k] - t) < std::abs(times[best] - t)) best = k;
    }
    return best;
}

SimulationOptions simulation_options(const ExperimentConfig& config, double horizon) {
    SimulationOptions sim;
    sim.horizon = horizon;
    sim.dt = config.time.dt;
    sim.record_stride = config.ensemble.record_stride;
    sim.seed = config.ensemble.seed;
    sim.domain = config.domain;
    return sim;
}

bool within(double value, double target, double rel, double se, double k, double abs_floor = 1e-8) {
    return std::abs(value - target) <= std::max(rel * std::abs(target), k * se) + abs_floor;
}

// Pointwise de Bruijn residual, integral form, monotonicity and (for a finite
// Gibbs measure) Pinsker and the exponential rate.
void entropy_checks(CommandOutcome& out, const ExperimentConfig& config, const Setup& s, const EntropyReport& r) {
    const Tolerances& tol = config.tolerances;
    double worst = 0.0;
    bool residual_ok = true;
    for (std::size_t i = 0; i < r.times.size(); ++i) {
        if (r.times[i] < config.time.t_min - 1e-12 || !std::isfinite(r.residual[i])) continue;
        const double half_i = 0.5 * r.fisher[i];
        const double limit = tol.dissipation_relative * half_i + tol.dissipation_absolute;
        if (r.residual[i] > limit) residual_ok = false;
        if (half_i > 0.0) worst = std::max(worst, r.residual[i] / half_i);
    }
    add(out, "entropy", "de_bruijn_pointwise", residual_ok, worst, tol.dissipation_relative);

    const double scale = std::max(std::abs(r.integral_lhs), std::abs(r.integral_rhs));
    const double integral_err = std::abs(r.integral_lhs - r.integral_rhs);
    add(out, "entropy", "de_bruijn_integral", integral_err <= tol.integral_relative * scale + tol.dissipation_absolute,
        r.integral_relative_error(), tol.integral_relative);

    add(out, "entropy", "monotone", r.max_entropy_increase() <= tol.monotone_slack, r.max_entropy_increase(),
        tol.monotone_slack);

    if (!s.gibbs.finite()) return;
    const double margin = r.min_pinsker_margin();
    add(out, "entropy", "pinsker", margin >= -tol.pinsker_slack, margin, -tol.pinsker_slack);

    const auto kappa = s.potential.hessian_lower_bound;
    if (kappa && *kappa > 0.0) {
        const double h0 = r.entropy.front();
        const double t0 = r.times.front();
        double worst_ratio = 0.0;
        bool ok = true;
        for (std::size_t i = 0; i < r.times.size(); ++i) {
            const double bound = std::exp(-2.0 * *kappa * (r.times[i] - t0)) * h0 * (1.0 + tol.decay_factor);
            if (r.entropy[i] > bound + 1e-12) ok = false;
            if (bound > 0.0) worst_ratio = std::max(worst_ratio, r.entropy[i] / bound);
        }
        add(out, "entropy", "exponential_decay", ok, worst_ratio, 1.0);
    }

    if (config.initial.kind == "gibbs") {
        const double h_max = *std::max_element(r.entropy.begin(), r.entropy.end());
        add(out, "entropy", "stationary_entropy", h_max <= tol.stationary_entropy, h_max, tol.stationary_entropy);
    }
}

EntropyReport entropy_report(const Setup& s, const DensityField& field, const ScoreField* score) {
    if (s.gibbs.finite()) return dissipation_check(field, *score, s.gibbs, 0.0);
    return lebesgue_dissipation_check(field, 0.0);
}

void write_entropy_files(CommandOutcome& out, const fs::path& dir, const EntropyReport& report) {
    std::ostringstream csv;
    io::write_entropy_report(report, csv);
    write_file(out, dir, "entropy.csv", csv.str());
}

Json martingale_json(std::span<const double> log_weights) {
    std::vector<double> w(log_weights.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i]);
    const MeanEstimate est = estimate_mean(w);
    return Json{{"mean", est.mean}, {"std_error", est.std_error}};
}

void martingale_check(CommandOutcome& out, const ExperimentConfig& config, const std::string& name,
                      const Json& m) {
    const double mean = m.at("mean").get<double>();
    const double se = m.at("std_error").get<double>();
    const double k = config.tolerances.standard_errors;
    add(out, "sde", name, std::abs(mean - 1.0) <= k * se + 1e-12, mean, 1.0);
}

}  // namespace

CommandOutcome cmd_forward(const ExperimentConfig& config, const fs::path& dir) {
    CommandOutcome out;
    const Setup s = make_setup(config);
    warn_boundary(out, s.p0, "initial");
    if (s.gibbs.finite()) warn_boundary(out, s.gibbs.density_nodes(), "Gibbs");

    const DensityField field = solve(s, config, config.time.horizon, config.time.store_stride);
    write_density_files(out, dir, field, config.density_stride);

    std::optional<ScoreField> score;
    if (s.gibbs.finite()) score = build_score(field, s.gibbs);
    const EntropyReport report = entropy_report(s, field, score ? &*score : nullptr);
    write_entropy_files(out, dir, report);
    entropy_checks(out, config, s, report);

    Json summary;
    summary["entropy"] = io::entropy_report_json(report);
    const double mass_drift = std::abs(field.grid.integrate(field.back()) - 1.0);
    add(out, "grid", "mass_conservation", mass_drift <= 1e-10, mass_drift, 1e-10);
    summary["mass_drift"] = mass_drift;

    if (s.gibbs.finite()) {
        const AdmissibilityReport adm = check_admissibility(s.potential, s.grid, s.p0, 0.5 * config.domain.upper, 1.0);
        summary["admissibility"] = {{"coercivity_margin", adm.coercivity_margin},
                                    {"coercivity_pass", adm.coercivity_pass},
                                    {"second_moment", adm.second_moment},
                                    {"second_moment_pass", adm.second_moment_pass},
                                    {"relative_entropy", adm.relative_entropy ? Json(*adm.relative_entropy) : Json()},
                                    {"entropy_pass", adm.entropy_pass}};
        if (config.initial.kind == "gibbs") {
            const double drift = total_variation(field.back(), s.gibbs.density_nodes(), s.grid) * 2.0;
            add(out, "potential", "stationary_l1", drift <= 1e-8, drift, 1e-8);
        }
    }

    if (config.ensemble.enabled) {
        const Grid bins = histogram_bins(config);
        const auto x0 = sample_from_slice(s.grid, s.p0, config.ensemble.particles, config.ensemble.seed);
        const PathEnsemble ens = simulate_forward(s.potential, x0, simulation_options(config, config.time.horizon));
        const double t_end = ens.times.back();
        const double tv = histogram_tv(empirical_marginal(ens, t_end, bins), bin_masses(s.grid, field.back(), bins));
        add(out, "sde", "forward_marginal_tv", tv <= config.tolerances.marginal_tv, tv, config.tolerances.marginal_tv);
        Json ej = io::ensemble_summary(ens, bins);
        ej["final_tv_vs_density"] = tv;
        write_json(out, dir, "ensemble.json", ej);
    }
    write_json(out, dir, "forward.json", summary);
    return out;
}

CommandOutcome cmd_reverse(const ExperimentConfig& config, const fs::path& dir) {
    CommandOutcome out;
    const Setup s = make_setup(config);
    if (!s.gibbs.finite()) throw ConfigError("'reverse' needs a normalizable potential");
    const double horizon = config.time.horizon;
    const DensityField field = solve(s, config, 2.0 * horizon);
    const ScoreField score = build_score(field, s.gibbs);

    const auto start = sample_from_slice(s.grid, field.at(horizon), config.ensemble.particles, config.ensemble.seed);
    const PathEnsemble ens = simulate_reversed(s.potential, score, ControlPolicy::score_optimal(), start,
                                               simulation_options(config, horizon));
    const Grid bins = histogram_bins(config);

    Json marginals = Json::array();
    for (double s_probe : {0.5 * horizon, horizon}) {
        const std::size_t k = nearest(ens.times, s_probe);
        const double s_rec = ens.times[k];
        const std::size_t j = nearest(field.times, horizon + s_rec);
        const double tv = histogram_tv(empirical_marginal(ens, s_rec, bins), bin_masses(s.grid, field.slices[j], bins));
        add(out, "sde", "reversed_marginal_tv_s" + io::format_double(s_rec), tv <= config.tolerances.marginal_tv, tv,
            config.tolerances.marginal_tv);
        marginals.push_back({{"s", s_rec}, {"density_time", field.times[j]}, {"tv", tv}});
    }
    const Json mart = martingale_json(ens.final_log_weights());
    martingale_check(out, config, "girsanov_martingale", mart);

    const CostReport cost = expected_cost_reversed(ens, score, field, s.gibbs, config.time.t_min);
    Json j;
    j["marginals"] = std::move(marginals);
    j["martingale"] = mart;
    j["cost"] = io::cost_report_json(cost);
    j["ensemble"] = io::ensemble_summary(ens, bins);
    write_json(out, dir, "reverse.json", j);
    return out;
}

CommandOutcome cmd_verify_control(const ExperimentConfig& config, const fs::path& dir) {
    CommandOutcome out;
    const Setup s = make_setup(config);
    if (!s.gibbs.finite()) throw ConfigError("'verify-control' needs a normalizable potential");
    const bool second = config.control.stage == "second";
    const double horizon = config.time.horizon;
    const Tolerances& tol = config.tolerances;
    const DensityField field = solve(s, config, second ? 2.0 * horizon : horizon);
    const Grid bins = histogram_bins(config);

    std::optional<ScoreField> score;
    std::optional<LambdaField> lambda;
    if (second) {
        lambda = build_lambda(field, s.gibbs, horizon);
    } else {
        score = build_score(field, s.gibbs);
    }
    const double origin = second ? horizon : 0.0;
    const double zero_reference = relative_entropy(field.at(origin), s.gibbs);
    const auto start = sample_from_slice(s.grid, field.back(), config.ensemble.particles, config.ensemble.seed);
    SimulationOptions sim = simulation_options(config, horizon);
    sim.record_stride = std::numeric_limits<std::size_t>::max();

    Json rows = Json::array();
    std::ostringstream text;
    text << "policy,total,se,reference,verdict\n";
    for (const std::string& name : config.control.policies) {
        const ControlPolicy policy = parse_policy(name);
        if (second && policy.kind == PolicyKind::score_optimal) {
            throw ConfigError("'control.policies': score_optimal belongs to the first stage");
        }
        if (!second && policy.kind == PolicyKind::lambda_optimal) {
            throw ConfigError("'control.policies': lambda_optimal belongs to the second stage");
        }
        const PathEnsemble ens = second ? simulate_second_forward(s.potential, *lambda, policy, start, sim)
                                        : simulate_reversed(s.potential, *score, policy, start, sim);
        const CostReport cost = second ? expected_cost_second(ens, *lambda, field, s.gibbs)
                                       : expected_cost_reversed(ens, *score, field, s.gibbs, config.time.t_min);
        const double k = tol.standard_errors;
        Json row;
        row["cost"] = io::cost_report_json(cost);
        std::size_t first_check = out.checks.size();
        double reference = cost.reference_entropy;
        if (policy.kind == PolicyKind::score_optimal || policy.kind == PolicyKind::lambda_optimal) {
            add(out, "control", name + ".optimal_value",
                within(cost.total, reference, tol.relative, cost.std_error, k), cost.total, reference);
            const Json mart = martingale_json(ens.final_log_weights());
            row["martingale"] = mart;
            martingale_check(out, config, name + ".girsanov_martingale", mart);
        } else if (policy.kind == PolicyKind::zero) {
            reference = zero_reference;
            add(out, "control", name + ".initial_entropy",
                within(cost.total, reference, tol.relative, cost.std_error, k), cost.total, reference);
        } else {
            add(out, "control", name + ".above_optimum", cost.total >= cost.reference_entropy - k * cost.std_error,
                cost.total, cost.reference_entropy);
            if (policy.bound <= 10.0) {
                const GapReport gap = suboptimality_gap(ens, cost, policy);
                row["gap"] = io::gap_report_json(gap);
                add(out, "control", name + ".gap_identity",
                    std::abs(gap.measured - gap.predicted) <= k * gap.combined_se() + 1e-12, gap.measured,
                    gap.predicted);
            }
        }
        add(out, "control", name + ".clip_rate", !cost.clip_flagged, cost.clip_rate, kMaxClipRate);
        row["decomposition"] = io::decomposition_json(entropic_decomposition(ens, cost, s.gibbs, bins));
        bool ok = true;
        for (std::size_t c = first_check; c < out.checks.size(); ++c) ok = ok && out.checks[c].pass;
        row["reference"] = reference;
        row["pass"] = ok;
        rows.push_back(std::move(row));
        text << name << ',' << io::format_double(cost.total) << ',' << io::format_double(cost.std_error) << ','
             << io::format_double(reference) << ',' << (ok ? "pass" : "FAIL") << '\n';
        std::ostringstream line;
        line.precision(6);
        line << name << ": total " << cost.total << " +- " << cost.std_error << " (reference " << reference << ") "
             << (ok ? "pass" : "FAIL");
        out.summary.push_back(line.str());
    }
    Json j;
    j["stage"] = config.control.stage;
    j["horizon"] = horizon;
    j["optimal_value"] = relative_entropy(field.back(), s.gibbs);
    j["initial_entropy"] = zero_reference;
    j["policies"] = std::move(rows);
    write_json(out, dir, "costs.json", j);
    write_file(out, dir, "summary.csv", text.str());
    return out;
}

CommandOutcome cmd_entropy_report(const ExperimentConfig& config, const fs::path& dir) {
    CommandOutcome out;
    const Setup s = make_setup(config);
    const DensityField field = solve(s, config, config.time.horizon, config.time.store_stride);
    std::optional<ScoreField> score;
    if (s.gibbs.finite()) score = build_score(field, s.gibbs);
    const EntropyReport report = entropy_report(s, field, score ? &*score : nullptr);
    write_entropy_files(out, dir, report);
    entropy_checks(out, config, s, report);

    Json j;
    j["entropy"] = io::entropy_report_json(report);
    if (s.gibbs.finite()) {
        const HorizonIdentity id = infinite_horizon_identity(field, *score, s.gibbs);
        const double err = std::abs(id.lhs - id.rhs) / std::max(std::abs(id.lhs), 1e-300);
        j["horizon_identity"] = {{"lhs", id.lhs},
                                 {"rhs", id.rhs},
                                 {"truncation", id.truncation},
                                 {"horizon_sufficient", id.horizon_sufficient},
                                 {"relative_error", err}};
        if (!id.horizon_sufficient) out.notes["horizon_identity"] = "horizon too short; truncation term reported";
        add(out, "entropy", "horizon_identity",
            std::abs(id.lhs - id.rhs) <= config.tolerances.integral_relative * std::abs(id.lhs) +
                                             config.tolerances.dissipation_absolute,
            err, config.tolerances.integral_relative);

        Json probes = Json::array();
        for (double t : config.time.probe_times) {
            const std::size_t k = nearest(field.times, t);
            const MartingaleExpectation m = backwards_martingale_expectation(
                s.potential, s.gibbs, field, field.times[k], config.ensemble.particles, config.ensemble.seed,
                config.time.dt);
            probes.push_back({{"t", m.probe_time}, {"mean", m.mean}, {"std_error", m.std_error}});
            add(out, "entropy", "backwards_martingale_t" + io::format_double(m.probe_time),
                std::abs(m.mean - 1.0) <= config.tolerances.standard_errors * m.std_error + 1e-12, m.mean, 1.0);
        }
        j["backwards_martingale"] = std::move(probes);

        std::ostringstream csv;
        io::write_score(build_score(thin(field, export_stride(field, config.density_stride)), s.gibbs), csv);
        write_file(out, dir, "score.csv", csv.str());
    }
    write_json(out, dir, "entropy.json", j);
    return out;
}

CommandOutcome cmd_iterate(const ExperimentConfig& config, const fs::path& dir) {
    CommandOutcome out;
    const Setup s = make_setup(config);
    IterationOptions opts;
    opts.stage_horizon = config.time.horizon;
    opts.stages = config.iterate.stages;
    opts.dt = config.time.dt;
    opts.store_stride = config.time.store_stride;
    opts.verify_stages = std::set<std::size_t>(config.iterate.verify_stages.begin(), config.iterate.verify_stages.end());
    opts.particles = config.ensemble.enabled ? config.ensemble.particles : 0;
    if (!config.ensemble.enabled) opts.verify_stages.clear();
    opts.seed = config.ensemble.seed;
    opts.early_stop = config.iterate.early_stop;
    const IterationResult result = run_iteration(s.potential, s.gibbs, s.p0, opts);

    std::ostringstream csv;
    io::write_trace(result, csv);
    write_file(out, dir, "trace.csv", csv.str());

    const Tolerances& tol = config.tolerances;
    const auto& st = result.stages;
    bool monotone = true, pinsker = true, costs = true, decay = true;
    double min_margin = std::numeric_limits<double>::infinity();
    double worst_cost = 0.0;
    const auto kappa = s.potential.hessian_lower_bound;
    Json rows = Json::array();
    for (std::size_t k = 0; k < st.size(); ++k) {
        if (st[k].next_entropy > st[k].entropy + tol.monotone_slack) monotone = false;
        if (2.0 * st[k].tv * st[k].tv > st[k].entropy + tol.pinsker_slack) pinsker = false;
        min_margin = std::min(min_margin, st[k].entropy - 2.0 * st[k].tv * st[k].tv);
        if (kappa && *kappa > 0.0) {
            const double bound = std::exp(-2.0 * *kappa * static_cast<double>(k) * opts.stage_horizon) *
                                 st.front().entropy * (1.0 + tol.decay_factor);
            if (st[k].entropy > bound + 1e-12) decay = false;
        }
        if (st[k].cost && st[k].next_entropy > 0.0) {
            worst_cost = std::max(worst_cost, std::abs(*st[k].cost - st[k].next_entropy) / st[k].next_entropy);
        }
        if (st[k].cost && !within(*st[k].cost, st[k].next_entropy, tol.relative, *st[k].cost_se, tol.standard_errors)) {
            costs = false;
        }
        rows.push_back({{"k", st[k].stage},
                        {"direction", st[k].direction},
                        {"entropy", st[k].entropy},
                        {"tv", st[k].tv},
                        {"next_entropy", st[k].next_entropy},
                        {"cost", st[k].cost ? Json(*st[k].cost) : Json()},
                        {"cost_se", st[k].cost_se ? Json(*st[k].cost_se) : Json()}});
    }
    add(out, "iterate", "monotone_entropy", monotone, st.back().next_entropy, st.front().entropy);
    add(out, "iterate", "pinsker", pinsker, min_margin, -tol.pinsker_slack);
    if (kappa && *kappa > 0.0) add(out, "iterate", "exponential_rate", decay, st.back().entropy, st.front().entropy);
    add(out, "iterate", "stage_costs", costs, worst_cost, tol.relative);
    out.notes["stopped_early"] = result.stopped_early;
    out.notes["rows"] = st.size();
    Json wall = Json::array();
    for (const auto& r : st) wall.push_back(r.wall_time);
    out.notes["stage_wall_time_s"] = std::move(wall);
    write_json(out, dir, "iterate.json", Json{{"stages", std::move(rows)}, {"stopped_early", result.stopped_early}});
    return out;
}

CommandOutcome cmd_ergodic(const ExperimentConfig& config, const fs::path& dir) {
    CommandOutcome out;
    const Setup s = make_setup(config);
    OccupationOptions opts;
    opts.horizon = config.ergodic.horizon;
    opts.dt = config.ergodic.dt;
    opts.trajectories = config.ergodic.trajectories;
    opts.seed = config.ensemble.seed;
    const Occupation occ =
        ergodic_occupation(s.potential, s.gibbs, Interval{config.ergodic.lower, config.ergodic.upper}, opts);
    const double err = std::abs(occ.fraction - occ.gibbs_probability);
    add(out, "iterate", "occupation", err <= config.tolerances.occupation, occ.fraction, occ.gibbs_probability);
    write_json(out, dir, "occupation.json",
               Json{{"set", {config.ergodic.lower, config.ergodic.upper}},
                    {"fraction", occ.fraction},
                    {"std_error", occ.std_error},
                    {"gibbs_probability", occ.gibbs_probability},
                    {"horizon", opts.horizon},
                    {"dt", opts.dt},
                    {"trajectories", opts.trajectories}});
    return out;
}

namespace {

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

fs::path resolve_output(const RunRequest& req, const ExperimentConfig& config) {
    if (req.out) return *req.out;
    if (!config.output.empty()) return config.output;
    if (const char* env = std::getenv("ENTROFLOW_OUT"); env != nullptr && *env != '\0') return env;
    return "entroflow-out";
}

using CommandFn = CommandOutcome (*)(const ExperimentConfig&, const fs::path&);

CommandFn lookup(const std::string& name) {
    if (name == "forward") return cmd_forward;
    if (name == "reverse") return cmd_reverse;
    if (name == "verify-control") return cmd_verify_control;
    if (name == "entropy-report") return cmd_entropy_report;
    if (name == "iterate") return cmd_iterate;
    if (name == "ergodic") return cmd_ergodic;
    return nullptr;
}

void write_manifest(const fs::path& dir, const RunRequest& req, const ExperimentConfig& config,
                    const std::string& started, const CommandOutcome* outcome, const std::string& error) {
    Json m;
    m["command"] = req.command;
    m["version"] = version_string();
    m["config_path"] = req.config_path.string();
    m["config"] = config_to_json(config);
    m["seed"] = config.ensemble.seed;
    m["threads"] = thread_limit();
    m["started_at"] = started;
    m["finished_at"] = utc_now();
    if (!error.empty()) m["error"] = error;
    Json modules = Json::object();
    Json checks = Json::array();
    Json files = Json::array();
    if (outcome != nullptr) {
        for (const Check& c : outcome->checks) {
            checks.push_back(
                {{"module", c.module}, {"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"limit", c.limit}});
            modules[c.module] = modules.value(c.module, true) && c.pass;
        }
        for (const auto& f : outcome->files) {
            files.push_back({{"path", f}, {"bytes", fs::file_size(dir / f)}, {"sha256", io::sha256_file(dir / f)}});
        }
        m["notes"] = outcome->notes;
        m["pass"] = outcome->pass();
    } else {
        m["pass"] = false;
    }
    m["modules"] = std::move(modules);
    m["checks"] = std::move(checks);
    m["files"] = std::move(files);
    io::write_text(dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace

int run_subcommand(const RunRequest& req, std::ostream& log, std::ostream& err) {
    const CommandFn fn = lookup(req.command);
    if (fn == nullptr) {
        err << "error: unknown subcommand '" << req.command << "'\n";
        return static_cast<int>(ExitCode::config_error);
    }
    const std::string started = utc_now();
    ExperimentConfig config;
    try {
        if (!req.config_path.empty()) config = load_config(req.config_path);
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::config_error);
    }
    if (req.seed) config.ensemble.seed = *req.seed;
    if (req.threads > 0) set_thread_limit(req.threads);
    const fs::path dir = resolve_output(req, config);
    try {
        fs::create_directories(dir);
    } catch (const fs::filesystem_error& e) {
        err << "error: cannot create output directory: " << e.what() << '\n';
        return static_cast<int>(ExitCode::config_error);
    }

    CommandOutcome outcome;
    try {
        outcome = fn(config, dir);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        write_manifest(dir, req, config, started, nullptr, e.what());
        return static_cast<int>(ExitCode::config_error);
    } catch (const Error& e) {
        err << "numeric error: " << e.what() << '\n';
        write_manifest(dir, req, config, started, nullptr, e.what());
        return static_cast<int>(ExitCode::numeric_error);
    }
    write_manifest(dir, req, config, started, &outcome, "");

    for (const auto& line : outcome.summary) log << line << '\n';
    for (const Check& c : outcome.checks) {
        log << (c.pass ? "PASS " : "FAIL ") << c.module << '.' << c.name << " value=" << io::format_double(c.value)
            << " limit=" << io::format_double(c.limit) << '\n';
    }
    log << "wrote " << outcome.files.size() + 1 << " files to " << dir.string() << '\n';
    return static_cast<int>(outcome.pass() ? ExitCode::success : ExitCode::check_failed);
}

}  // namespace entroflow
