#include "entroflow/score.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "entroflow/error.hpp"

namespace entroflow {

namespace {

bool close_time(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

std::vector<double> central_gradient(const Grid& grid, std::span<const double> f) {
    const std::size_t n = f.size();
    const double h = grid.spacing();
    std::vector<double> g(n);
    g[0] = (f[1] - f[0]) / h;
    g[n - 1] = (f[n - 1] - f[n - 2]) / h;
    for (std::size_t i = 1; i + 1 < n; ++i) g[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    return g;
}

}  // namespace

ScoreField::ScoreField(Grid grid, std::vector<double> times, std::vector<std::vector<double>> log_ratio,
                       std::vector<std::vector<double>> score, double floor, double clip_max)
    : grid_(grid),
      times_(std::move(times)),
      log_ratio_(std::move(log_ratio)),
      score_(std::move(score)),
      floor_(floor),
      clip_max_(clip_max) {
    if (times_.empty() || times_.size() != log_ratio_.size() || times_.size() != score_.size()) {
        throw ShapeError("score field needs one L slice and one score slice per time");
    }
}

std::size_t ScoreField::index_of(double t) const {
    const auto it = std::lower_bound(times_.begin(), times_.end(), t - 1e-9 * std::max(1.0, std::abs(t)));
    if (it == times_.end() || !close_time(*it, t)) {
        throw RangeError("time " + std::to_string(t) + " is not stored in the score field");
    }
    return static_cast<std::size_t>(it - times_.begin());
}

ScoreField::TimeBracket ScoreField::bracket(double t) const {
    if (t <= times_.front()) return {0, 0, 0.0};
    if (t >= times_.back()) return {times_.size() - 1, times_.size() - 1, 0.0};
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const auto hi = static_cast<std::size_t>(it - times_.begin());
    const std::size_t lo = hi - 1;
    return {lo, hi, (t - times_[lo]) / (times_[hi] - times_[lo])};
}

ScoreField::Sample ScoreField::score_at(const TimeBracket& tb, double x) const {
    double frac = 0.0;
    const std::size_t i = grid_.locate(x, frac);
    const auto& a = score_[tb.lo];
    const auto& b = score_[tb.hi];
    const double va = a[i] + frac * (a[i + 1] - a[i]);
    const double vb = b[i] + frac * (b[i + 1] - b[i]);
    const double v = va + tb.weight * (vb - va);
    if (std::abs(v) > clip_max_) return {std::copysign(clip_max_, v), true};
    return {v, false};
}

double ScoreField::log_ratio_at(const TimeBracket& tb, double x) const {
    double frac = 0.0;
    const std::size_t i = grid_.locate(x, frac);
    const auto& a = log_ratio_[tb.lo];
    const auto& b = log_ratio_[tb.hi];
    const double va = a[i] + frac * (a[i + 1] - a[i]);
    const double vb = b[i] + frac * (b[i + 1] - b[i]);
    return va + tb.weight * (vb - va);
}

ScoreField ScoreField::window(double t0, double t1, double offset) const {
    std::vector<double> times;
    std::vector<std::vector<double>> lr, sc;
    for (std::size_t k = 0; k < times_.size(); ++k) {
        const double t = times_[k];
        const bool inside = (t >= t0 || close_time(t, t0)) && (t <= t1 || close_time(t, t1));
        if (!inside) continue;
        times.push_back(t - offset);
        lr.push_back(log_ratio_[k]);
        sc.push_back(score_[k]);
    }
    if (times.empty()) throw RangeError("score field has no stored times in the requested window");
    return ScoreField(grid_, std::move(times), std::move(lr), std::move(sc), floor_, clip_max_);
}

ScoreField build_score(const DensityField& field, const GibbsMeasure& gibbs, double floor, double clip_max) {
    if (!gibbs.finite()) throw ConfigError("score field requires a finite Gibbs measure");
    if (!(floor >= 1e-300 && floor <= 1e-8)) throw ConfigError("score floor must lie in [1e-300, 1e-8]");
    if (!(clip_max > 0.0)) throw ConfigError("score clip must be positive");
    require_same_grid(field.grid, gibbs.grid(), "density field vs Gibbs measure");

    const auto log_q = gibbs.log_density_nodes();
    const double log_floor = std::log(floor);
    const std::size_t n = field.grid.size();
    std::vector<std::vector<double>> lr, sc;
    lr.reserve(field.times.size());
    sc.reserve(field.times.size());
    for (const auto& p : field.slices) {
        std::vector<double> l(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double log_p = p[i] > 0.0 ? std::log(p[i]) : -std::numeric_limits<double>::infinity();
            l[i] = std::max(log_p, log_floor + log_q[i]) - log_q[i];
        }
        sc.push_back(central_gradient(field.grid, l));
        lr.push_back(std::move(l));
    }
    return ScoreField(field.grid, field.times, std::move(lr), std::move(sc), floor, clip_max);
}

LambdaField build_lambda(const DensityField& second_leg, const GibbsMeasure& gibbs, double horizon, double floor,
                         double clip_max) {
    if (!(horizon > 0.0)) throw ConfigError("stage horizon must be positive");
    const double t0 = second_leg.start_time();
    const double t1 = second_leg.end_time();
    if (!(t0 <= horizon || close_time(t0, horizon)) || !(t1 >= 2.0 * horizon || close_time(t1, 2.0 * horizon))) {
        throw RangeError("density field does not cover [T, 2T] for the second stage");
    }
    const ScoreField full = build_score(second_leg, gibbs, floor, clip_max);
    return LambdaField{full.window(horizon, 2.0 * horizon, horizon), horizon};
}

ScoreField::Sample eval_score(const ScoreField& sf, double t, double x) { return sf.score_at(t, x); }

}  // namespace entroflow
