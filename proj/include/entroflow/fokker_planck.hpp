#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "entroflow/grid.hpp"
#include "entroflow/potential.hpp"

namespace entroflow {

/// Marginal densities p(t_i, .) on a fixed grid at strictly increasing times.
struct DensityField {
    Grid grid;
    std::vector<double> times;
    std::vector<std::vector<double>> slices;

    /// Index of the stored time equal to t (relative tolerance 1e-9); throws RangeError.
    std::size_t index_of(double t) const;
    std::span<const double> at(double t) const { return slices[index_of(t)]; }
    std::span<const double> front() const { return slices.front(); }
    std::span<const double> back() const { return slices.back(); }
    double start_time() const { return times.front(); }
    double end_time() const { return times.back(); }
};

/// Gaussian N(mean, variance) sampled at the nodes and renormalized by the trapezoid rule.
std::vector<double> gaussian_slice(const Grid& grid, double mean, double variance);

struct MixtureComponent {
    double weight = 1.0;
    double mean = 0.0;
    double variance = 1.0;
};
std::vector<double> mixture_slice(const Grid& grid, std::span<const MixtureComponent> components);

/// Raw node values: negatives clipped to zero, then normalized to unit mass.
std::vector<double> normalized_slice(const Grid& grid, std::span<const double> raw);

struct FokkerPlanckOptions {
    double horizon = 1.0;
    /// Output step. Internally sub-stepped so that every implicit step has dt <= h^2.
    double dt = 1e-3;
    /// Store every k-th output step; t = 0 and t = horizon are always stored.
    std::size_t store_stride = 1;
    /// 0.5 is Crank-Nicolson, 1.0 backward Euler.
    double theta = 0.5;
    /// Time label of the initial slice (for continuing a solution leg by leg).
    double start_time = 0.0;
};

/// Solves dp/dt = (1/2) p'' + (Psi' p)' with zero-flux boundaries.
///
/// Fluxes use Scharfetter-Gummel exponential fitting, so exp(-2 Psi) sampled at
/// the nodes is an exact steady state of the discrete operator and trapezoid
/// mass is conserved step by step. Throws NumericError naming the step if a
/// value drops below -1e-12 or the maximum grows more than 1e6-fold.
DensityField solve_fokker_planck(const Potential& potential, std::span<const double> p0, const Grid& grid,
                                 const FokkerPlanckOptions& options);

/// L1 norm (trapezoid) of the discrete operator (1/2) p'' + (Psi' p)' applied to `slice`.
double stationary_residual(const Potential& potential, std::span<const double> slice, const Grid& grid);

/// Applies the discrete Fokker-Planck operator nodewise.
std::vector<double> apply_fokker_planck_operator(const Potential& potential, std::span<const double> slice,
                                                 const Grid& grid);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
    double second_moment = 0.0;
};

Moments slice_moments(const Grid& grid, std::span<const double> slice);
/// Moments of the slice stored at time t; throws RangeError if t is not stored.
Moments moments(const DensityField& field, double t);

}  // namespace entroflow
