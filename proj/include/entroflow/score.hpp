#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "entroflow/fokker_planck.hpp"
#include "entroflow/grid.hpp"
#include "entroflow/potential.hpp"

namespace entroflow {

/// Log likelihood ratio L = log(p/q) and its gradient on a space-time lattice.
///
/// Immutable after construction; every query is const and reentrant.
class ScoreField {
public:
    static constexpr double kDefaultFloor = 1e-14;
    static constexpr double kDefaultClip = 1e3;

    ScoreField() = default;
    ScoreField(Grid grid, std::vector<double> times, std::vector<std::vector<double>> log_ratio,
               std::vector<std::vector<double>> score, double floor, double clip_max);

    const Grid& grid() const { return grid_; }
    std::span<const double> times() const { return times_; }
    double floor() const { return floor_; }
    double clip_max() const { return clip_max_; }
    double start_time() const { return times_.front(); }
    double end_time() const { return times_.back(); }

    std::span<const double> log_ratio(std::size_t time_index) const { return log_ratio_[time_index]; }
    std::span<const double> score(std::size_t time_index) const { return score_[time_index]; }
    std::size_t index_of(double t) const;

    /// Neighbouring stored times and the linear weight of the later one.
    /// Queries outside the covered range clamp to the end slices.
    struct TimeBracket {
        std::size_t lo = 0;
        std::size_t hi = 0;
        double weight = 0.0;
    };
    TimeBracket bracket(double t) const;

    struct Sample {
        double value = 0.0;
        bool clipped = false;
    };
    /// Bilinear interpolation of the score, clipped to |value| <= clip_max.
    Sample score_at(const TimeBracket& tb, double x) const;
    Sample score_at(double t, double x) const { return score_at(bracket(t), x); }
    /// Bilinear interpolation of L.
    double log_ratio_at(const TimeBracket& tb, double x) const;
    double log_ratio_at(double t, double x) const { return log_ratio_at(bracket(t), x); }

    /// Copy restricted to stored times in [t0, t1], with times relabelled as t - offset.
    ScoreField window(double t0, double t1, double offset) const;

private:
    Grid grid_;
    std::vector<double> times_;
    std::vector<std::vector<double>> log_ratio_;
    std::vector<std::vector<double>> score_;
    double floor_ = kDefaultFloor;
    double clip_max_ = kDefaultClip;
};

/// L = log(max(p, eps*q)/q) nodewise; score by central differences (one-sided at the ends).
/// Throws ConfigError for an infinite Gibbs measure or eps outside [1e-300, 1e-8],
/// ShapeError when the grids differ.
ScoreField build_score(const DensityField& field, const GibbsMeasure& gibbs,
                       double floor = ScoreField::kDefaultFloor, double clip_max = ScoreField::kDefaultClip);

/// Second-stage field Lambda(s, x) = L(T + s, x) for s in [0, T].
struct LambdaField {
    ScoreField field;   ///< indexed by s
    double offset = 0;  ///< T: stored slice s corresponds to L(T + s)
};

/// Builds Lambda from a density field covering [T, 2T]; throws RangeError on a gap.
LambdaField build_lambda(const DensityField& second_leg, const GibbsMeasure& gibbs, double horizon,
                         double floor = ScoreField::kDefaultFloor, double clip_max = ScoreField::kDefaultClip);

/// Reentrant convenience wrapper around ScoreField::score_at.
ScoreField::Sample eval_score(const ScoreField& sf, double t, double x);

}  // namespace entroflow
