#include "entroflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "entroflow/error.hpp"

namespace entroflow {

Grid::Grid(Interval domain, std::size_t points) : domain_(domain), points_(points) {
    if (points < kMinPoints) {
        throw ConfigError("grid needs at least " + std::to_string(kMinPoints) + " points, got " +
                          std::to_string(points));
    }
    if (!std::isfinite(domain.lower) || !std::isfinite(domain.upper) || !(domain.upper > domain.lower)) {
        throw ConfigError("grid domain must be a finite interval with upper > lower");
    }
    h_ = domain.width() / static_cast<double>(points - 1);
}

std::vector<double> Grid::nodes() const {
    std::vector<double> x(points_);
    for (std::size_t i = 0; i < points_; ++i) x[i] = node(i);
    return x;
}

std::size_t Grid::locate(double x, double& frac) const {
    const double pos = (x - domain_.lower) / h_;
    if (!(pos > 0.0)) {
        frac = 0.0;
        return 0;
    }
    const auto last = static_cast<double>(points_ - 1);
    if (pos >= last) {
        frac = 1.0;
        return points_ - 2;
    }
    const auto i = static_cast<std::size_t>(pos);
    frac = pos - static_cast<double>(i);
    return i;
}

double Grid::interpolate(std::span<const double> values, double x) const {
    double frac = 0.0;
    const std::size_t i = locate(x, frac);
    return values[i] + frac * (values[i + 1] - values[i]);
}

double Grid::integrate(std::span<const double> values) const {
    double sum = 0.5 * (values.front() + values.back());
    for (std::size_t i = 1; i + 1 < values.size(); ++i) sum += values[i];
    return sum * h_;
}

std::vector<double> Grid::weights() const {
    std::vector<double> w(points_, h_);
    w.front() = w.back() = 0.5 * h_;
    return w;
}

// Integral from the lower bound to x of the linear interpolant.
double Grid::cumulative(std::span<const double> values, double x) const {
    x = std::clamp(x, domain_.lower, domain_.upper);
    double frac = 0.0;
    const std::size_t cell = locate(x, frac);
    double sum = 0.0;
    for (std::size_t i = 0; i < cell; ++i) sum += 0.5 * (values[i] + values[i + 1]);
    const double a = values[cell];
    const double b = values[cell + 1];
    sum += frac * a + 0.5 * frac * frac * (b - a);
    return sum * h_;
}

double Grid::integrate_range(std::span<const double> values, double a, double b) const {
    if (b <= a) return 0.0;
    return cumulative(values, b) - cumulative(values, a);
}

bool Grid::operator==(const Grid& other) const {
    return points_ == other.points_ && domain_.lower == other.domain_.lower &&
           domain_.upper == other.domain_.upper;
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
    if (!(a == b)) throw ShapeError(std::string("grid mismatch: ") + what);
}

}  // namespace entroflow
