#pragma once

// Non-concentration constants, density, two-ends constants and gamma.
//
// Suprema run over dyadic radii only. Balls B(x, r) in the Katz-Tao and
// Frostman scans are replaced by tripled dyadic cells 3Q (every r-ball lies in
// some 3Q, and 3Q lies in a ball of radius 3r/sqrt(2)). Along a line, B(x, r)
// is the window of chart positions within r of x measured along the line.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "flab/geometry.h"
#include "flab/grid.h"

namespace flab {

struct NonConcentrationReport {
    double exponent = 0.0;
    double constant = 0.0;
    double witness_r = 0.0;
    std::array<double, 2> witness_x{};  // centre of the witnessing cell Q
};

struct GammaReport {
    double exponent = 0.0;
    double value = 0.0;
    double witness_r = 0.0;
    std::array<double, 2> witness_x{};  // point on the line
};

/// Finite set of distinct points on the delta-lattice (x_q * delta, y_q * delta).
/// Coordinates may leave the unit square, as dual points of lines do.
class PointSet {
public:
    PointSet(int k, std::vector<std::array<std::int64_t, 2>> points);
    static PointSet from_cells(const CellSet& e);
    /// Dual points of lines in one chart.
    static PointSet from_lines(std::span<const Line> lines, Chart chart);

    int k() const { return k_; }
    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    std::span<const std::array<std::int64_t, 2>> points() const { return points_; }

private:
    int k_;
    std::vector<std::array<std::int64_t, 2>> points_;
};

/// max over dyadic r in [delta, 1] and r-cells Q of #(E cap 3Q) / (r/delta)^s.
/// Ties go to the smallest r, then the lexicographically smallest cell.
NonConcentrationReport katz_tao_constant(const PointSet& e, double s);
NonConcentrationReport katz_tao_constant(const CellSet& e, double s);

/// max over dyadic r in [Delta, 1] and r-cells Q of #(E cap 3Q) / (r^s #E).
NonConcentrationReport frostman_constant(const CellSet& e, double s, double Delta);
NonConcentrationReport frostman_constant(const PointSet& e, double s, double Delta);

/// One-dimensional version on positions 0..2^k-1 with tripled dyadic intervals.
/// witness_x[0] holds the interval centre.
NonConcentrationReport frostman_constant_1d(std::span<const std::uint32_t> positions, int k, double s,
                                            double Delta);

/// #Y / #tube_cells(line, delta).
double density(const Shading& y);

/// Length in chart positions of a delta x delta^eps1 window at scale k.
std::uint32_t two_ends_window(int k, double eps1);

/// max over windows J of delta^eps1 consecutive chart positions of
/// #(Y cap J) / (delta^eps2 #Y).
double two_ends_constant(const Shading& y, double eps1, double eps2);
/// Same on a per-position count profile at scale 2^-k.
double two_ends_constant(std::span<const std::uint32_t> counts, int k, double eps1, double eps2);

/// gamma on a line profile: counts[p] is the number of balls of side
/// 2^-level at chart position p along the line. The value is sup over dyadic
/// rho and window centres p of (2^-level/rho)^t times the count in the window
/// of half-width floor(rho 2^level / sqrt(1+a^2)).
GammaReport gamma_profile(std::span<const std::uint32_t> counts, int level, const Line& line, double t);

GammaReport gamma(const Shading& y, double t);
/// gamma of the r-coarsening of Y: the occupied r-blocks along the line at
/// resolution r.
GammaReport gamma_coarse(const Shading& y, double r, double t);

struct GammaSup {
    GammaReport report;
    std::size_t line_index = 0;
};
GammaSup gamma_sup(const LineFamily& family, double t);

/// t* = min(t, 2 - t).
double t_star(double t);

}  // namespace flab
