#include "entroflow/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "entroflow/error.hpp"
#include "entroflow/parallel.hpp"
#include "entroflow/sde.hpp"

namespace entroflow {

namespace {

void require_finite(const GibbsMeasure& gibbs) {
    if (!gibbs.finite()) {
        throw ConfigError("relative entropy needs a finite Gibbs measure; use differential_entropy instead");
    }
}

double trapezoid_in_time(std::span<const double> t, std::span<const double> f) {
    double s = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) s += 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
    return s;
}

void finish_residuals(EntropyReport& report) {
    const std::size_t n = report.times.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    report.residual.assign(n, nan);
    report.relative_residual.assign(n, nan);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double dh = (report.entropy[i + 1] - report.entropy[i - 1]) / (report.times[i + 1] - report.times[i - 1]);
        const double half_i = 0.5 * report.fisher[i];
        report.residual[i] = std::abs(dh + half_i);
        report.relative_residual[i] = half_i > 0.0 ? report.residual[i] / half_i : (report.residual[i] == 0.0 ? 0.0 : nan);
    }
    report.integral_lhs = report.entropy.front() - report.entropy.back();
    report.integral_rhs = 0.5 * trapezoid_in_time(report.times, report.fisher);
}

}  // namespace

EntropyValue relative_entropy_detailed(std::span<const double> slice, const GibbsMeasure& gibbs, double floor) {
    require_finite(gibbs);
    const Grid& grid = gibbs.grid();
    if (slice.size() != grid.size()) throw ShapeError("slice does not match the Gibbs grid");
    const auto log_q = gibbs.log_density_nodes();
    const double log_floor = std::log(floor);
    std::vector<double> integrand(slice.size(), 0.0);
    std::vector<double> floored(slice.size(), 0.0);
    for (std::size_t i = 0; i < slice.size(); ++i) {
        const double p = slice[i];
        if (!(p > 0.0)) continue;
        const double log_p = std::log(p);
        const double floor_level = log_floor + log_q[i];
        integrand[i] = p * (std::max(log_p, floor_level) - log_q[i]);
        if (log_p < floor_level) floored[i] = integrand[i];
    }
    return {grid.integrate(integrand), grid.integrate(floored)};
}

double relative_entropy(std::span<const double> slice, const GibbsMeasure& gibbs, double floor) {
    return relative_entropy_detailed(slice, gibbs, floor).value;
}

double differential_entropy(std::span<const double> slice, const Grid& grid) {
    if (slice.size() != grid.size()) throw ShapeError("slice does not match grid");
    std::vector<double> integrand(slice.size(), 0.0);
    for (std::size_t i = 0; i < slice.size(); ++i) {
        if (slice[i] > 0.0) integrand[i] = -slice[i] * std::log(slice[i]);
    }
    return grid.integrate(integrand);
}

double fisher_information(const ScoreField& score, const DensityField& field, double t) {
    require_same_grid(score.grid(), field.grid, "score field vs density field");
    const auto grad = score.score(score.index_of(t));
    const auto p = field.at(t);
    std::vector<double> integrand(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) integrand[i] = grad[i] * grad[i] * p[i];
    return field.grid.integrate(integrand);
}

double total_variation(std::span<const double> a, std::span<const double> b, const Grid& grid) {
    if (a.size() != grid.size() || b.size() != grid.size()) throw ShapeError("slices do not match grid");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = std::abs(a[i] - b[i]);
    return 0.5 * grid.integrate(d);
}

double EntropyReport::max_relative_residual() const {
    double m = 0.0;
    for (double r : relative_residual) {
        if (std::isfinite(r)) m = std::max(m, r);
    }
    return m;
}

double EntropyReport::integral_relative_error() const {
    const double scale = std::max(std::abs(integral_lhs), std::abs(integral_rhs));
    if (scale == 0.0) return 0.0;
    return std::abs(integral_lhs - integral_rhs) / scale;
}

double EntropyReport::min_pinsker_margin() const {
    double m = std::numeric_limits<double>::quiet_NaN();
    for (double v : pinsker_margin) {
        if (std::isfinite(v) && !(v >= m)) m = v;
    }
    return m;
}

double EntropyReport::max_entropy_increase() const {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < entropy.size(); ++i) m = std::max(m, entropy[i] - entropy[i - 1]);
    return entropy.size() < 2 ? 0.0 : m;
}

EntropyReport dissipation_check(const DensityField& field, const ScoreField& score, const GibbsMeasure& gibbs,
                                double t_min) {
    require_finite(gibbs);
    require_same_grid(field.grid, gibbs.grid(), "density field vs Gibbs measure");
    EntropyReport report;
    const auto q = gibbs.density_nodes();
    for (std::size_t k = 0; k < field.times.size(); ++k) {
        const double t = field.times[k];
        if (t < t_min - 1e-12) continue;
        const auto p = std::span<const double>(field.slices[k]);
        const EntropyValue h = relative_entropy_detailed(p, gibbs, score.floor());
        const double tv = total_variation(p, q, field.grid);
        report.times.push_back(t);
        report.entropy.push_back(h.value);
        report.fisher.push_back(fisher_information(score, field, t));
        report.tv.push_back(tv);
        report.pinsker_margin.push_back(h.value - 2.0 * tv * tv);
        if (h.value != 0.0) {
            report.max_floored_fraction =
                std::max(report.max_floored_fraction, std::abs(h.floored_contribution) / std::abs(h.value));
        }
    }
    const std::size_t n = report.times.size();
    if (n < 3) throw ConfigError("dissipation check needs at least three stored times >= t_min");

    finish_residuals(report);
    return report;
}

EntropyReport lebesgue_dissipation_check(const DensityField& field, double t_min, double floor) {
    const Grid& grid = field.grid;
    const double h = grid.spacing();
    const std::size_t m = grid.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    EntropyReport report;
    for (std::size_t k = 0; k < field.times.size(); ++k) {
        const double t = field.times[k];
        if (t < t_min - 1e-12) continue;
        const auto& p = field.slices[k];
        const double peak = *std::max_element(p.begin(), p.end());
        std::vector<double> log_p(m);
        for (std::size_t i = 0; i < m; ++i) log_p[i] = std::log(std::max(p[i], floor * peak));
        std::vector<double> fisher(m);
        for (std::size_t i = 0; i < m; ++i) {
            double g = 0.0;
            if (i == 0) {
                g = (log_p[1] - log_p[0]) / h;
            } else if (i + 1 == m) {
                g = (log_p[m - 1] - log_p[m - 2]) / h;
            } else {
                g = (log_p[i + 1] - log_p[i - 1]) / (2.0 * h);
            }
            fisher[i] = g * g * p[i];
        }
        report.times.push_back(t);
        report.entropy.push_back(-differential_entropy(p, grid));
        report.fisher.push_back(grid.integrate(fisher));
        report.tv.push_back(nan);
        report.pinsker_margin.push_back(nan);
    }
    if (report.times.size() < 3) throw ConfigError("dissipation check needs at least three stored times >= t_min");
    finish_residuals(report);
    return report;
}

HorizonIdentity infinite_horizon_identity(const DensityField& field, const ScoreField& score,
                                          const GibbsMeasure& gibbs) {
    require_finite(gibbs);
    std::vector<double> fisher(field.times.size());
    for (std::size_t k = 0; k < field.times.size(); ++k) fisher[k] = fisher_information(score, field, field.times[k]);
    HorizonIdentity id;
    id.lhs = relative_entropy(field.front(), gibbs, score.floor());
    id.rhs = 0.5 * trapezoid_in_time(field.times, fisher);
    id.truncation = relative_entropy(field.back(), gibbs, score.floor());
    id.horizon_sufficient = id.truncation <= 1e-4 * std::abs(id.lhs);
    return id;
}

MartingaleExpectation backwards_martingale_expectation(const Potential& potential, const GibbsMeasure& gibbs,
                                                       const DensityField& field, double probe_time,
                                                       std::size_t particles, std::uint64_t seed, double dt) {
    require_finite(gibbs);
    require_same_grid(field.grid, gibbs.grid(), "density field vs Gibbs measure");
    const auto p = field.at(probe_time);
    const auto q = gibbs.density_nodes();
    std::vector<double> ratio(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) ratio[i] = q[i] > 0.0 ? p[i] / q[i] : 0.0;

    std::vector<double> x = sample_from_slice(gibbs.grid(), q, particles, seed);
    if (probe_time > 0.0) {
        SimulationOptions opts;
        opts.horizon = probe_time;
        opts.dt = std::min(dt, probe_time);
        opts.record_stride = std::numeric_limits<std::size_t>::max();
        opts.seed = seed;
        opts.domain = gibbs.grid().domain();
        const PathEnsemble ens = simulate_forward(potential, x, opts);
        const auto end = ens.final_states();
        x.assign(end.begin(), end.end());
    }
    std::vector<double> samples(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) samples[j] = gibbs.grid().interpolate(ratio, x[j]);
    const MeanEstimate est = estimate_mean(samples);
    return {est.mean, est.std_error, probe_time};
}

}  // namespace entroflow
