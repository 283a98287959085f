#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace entroflow {

struct Interval {
    double lower = -8.0;
    double upper = 8.0;

    double width() const { return upper - lower; }
    bool contains(double x) const { return x >= lower && x <= upper; }
};

/// Uniform 1D node grid. Node i sits at lower + i*h with h = (upper-lower)/(points-1).
class Grid {
public:
    static constexpr std::size_t kMinPoints = 16;

    Grid() = default;
    /// Throws ConfigError when points < 16 or the interval is empty or non-finite.
    Grid(Interval domain, std::size_t points);

    double lower() const { return domain_.lower; }
    double upper() const { return domain_.upper; }
    const Interval& domain() const { return domain_; }
    std::size_t size() const { return points_; }
    double spacing() const { return h_; }
    double node(std::size_t i) const { return domain_.lower + static_cast<double>(i) * h_; }
    std::vector<double> nodes() const;

    /// Index of the cell [x_i, x_{i+1}] containing x (clamped into range) and the
    /// fractional offset within it.
    std::size_t locate(double x, double& frac) const;

    /// Piecewise-linear interpolation of node values at x (clamped to the domain).
    double interpolate(std::span<const double> values, double x) const;

    /// Composite trapezoid rule over the whole grid.
    double integrate(std::span<const double> values) const;

    /// Trapezoid weights (h/2 at the two ends, h elsewhere).
    std::vector<double> weights() const;

    /// Integral over [a, b] of the piecewise-linear interpolant (exact for that interpolant).
    double integrate_range(std::span<const double> values, double a, double b) const;

    bool operator==(const Grid& other) const;

private:
    double cumulative(std::span<const double> values, double x) const;

    Interval domain_{};
    std::size_t points_ = 0;
    double h_ = 0.0;
};

/// Throws ShapeError unless both grids are identical.
void require_same_grid(const Grid& a, const Grid& b, const char* what);

}  // namespace entroflow
