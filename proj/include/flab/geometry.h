#pragma once

// Lines, tubes and shadings on the dyadic grid.
//
// Lines are stored in one of two charts with quantized coefficients at the
// family scale delta = 2^-k:
//   shallow:  y = a x + b,   |a| <= 1
//   steep:    x = a y + b,   |a| <  1
// with a = a_q * delta and b = b_q * delta, b in [-1, 2]. The chart coordinate
// of a cell is its column (shallow) or row (steep); arclength positions along a
// line are measured in that coordinate.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "flab/grid.h"

namespace flab {

enum class Chart : std::uint8_t { shallow, steep };

class Line {
public:
    Line(Chart chart, std::int64_t a_q, std::int64_t b_q, int k);

    Chart chart() const { return chart_; }
    std::int64_t a_q() const { return a_q_; }
    std::int64_t b_q() const { return b_q_; }
    int k() const { return k_; }
    double slope() const;
    double intercept() const;

    /// Unit direction vector in the plane.
    std::array<double, 2> direction() const;
    /// Endpoints of the chord inside [0,1]^2, if the line meets the square.
    std::optional<std::array<std::array<double, 2>, 2>> chord() const;
    bool meets_unit_square() const { return chord().has_value(); }
    /// Euclidean distance from a plane point.
    double distance(std::array<double, 2> p) const;

    friend bool operator==(const Line&, const Line&) = default;
    friend auto operator<=>(const Line&, const Line&) = default;

private:
    Chart chart_;
    std::int64_t a_q_;
    std::int64_t b_q_;
    int k_;
};

/// Acute angle between two lines, in [0, pi/2].
double angle_between(const Line& l1, const Line& l2);

/// Chart coordinate (column or row) of a cell relative to a line.
inline std::uint32_t chart_position(const Line& line, Cell c) { return line.chart() == Chart::shallow ? c.i : c.j; }

/// Contiguous run of tube cells at one chart position: cross coordinates lo..hi.
struct TubeColumn {
    std::uint32_t position;
    std::uint32_t lo;
    std::uint32_t hi;
};

/// Cells (at level line.k()) whose centre lies within distance w of the line,
/// grouped by chart position in increasing order.
std::vector<TubeColumn> tube_columns(const Line& line, double w);
CellSet tube_cells(const Line& line, double w);

/// A shading Y(l): a nonempty subset of tube_cells(line, delta).
class Shading {
public:
    Shading(Line line, CellSet cells);

    /// Builds the shading from the delta-tube cells accepted by `keep`;
    /// cells are inside the tube by construction. May return nullopt if empty.
    template <typename Pred>
    static std::optional<Shading> from_tube(const Line& line, Pred keep);

    const Line& line() const { return line_; }
    const CellSet& cells() const { return cells_; }
    double mass() const { return cells_.mass(); }

private:
    struct Trusted {};
    Shading(Line line, CellSet cells, Trusted);
    static CellSet assemble(const Line& line, std::vector<std::uint64_t> keys);

    Line line_;
    CellSet cells_;
};

/// Per chart position cell counts of a shading, over positions 0..side-1.
std::vector<std::uint32_t> position_counts(const Shading& y);

/// A shading as runs of cells at each chart position, in increasing position
/// order; a position may carry several runs. Used where families are too large
/// to hold as cell sets.
struct ShadingRuns {
    Line line;
    std::vector<TubeColumn> runs;

    std::size_t cell_count() const;
    std::vector<std::uint32_t> counts() const;
    template <typename Fn>
    void for_each_cell(Fn fn) const;
};

ShadingRuns to_runs(const Shading& y);
/// Throws std::invalid_argument if the runs leave the tube or are empty.
Shading from_runs(const ShadingRuns& runs);

/// A delta-separated family of lines with shadings, the (L, Y)_delta object.
class LineFamily {
public:
    LineFamily(Scale scale, std::vector<Shading> entries);

    Scale scale() const { return scale_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const Shading& operator[](std::size_t idx) const { return entries_[idx]; }
    std::span<const Shading> entries() const { return entries_; }
    std::vector<Line> lines() const;

private:
    Scale scale_;
    std::vector<Shading> entries_;
};

// --- point-line duality ---------------------------------------------------

/// Quantized point (x_q * delta, y_q * delta).
struct PlanePoint {
    std::int64_t x_q = 0;
    std::int64_t y_q = 0;
    int k = 2;

    friend bool operator==(const PlanePoint&, const PlanePoint&) = default;
};

/// Dual coordinates (a, b) of a line, tagged with its chart.
struct DualPoint {
    Chart chart = Chart::shallow;
    std::int64_t a_q = 0;
    std::int64_t b_q = 0;
    int k = 2;

    friend bool operator==(const DualPoint&, const DualPoint&) = default;
};

DualPoint dual_point(const Line& line);
/// Inverse of dual_point.
Line line_from_dual(const DualPoint& p);
/// The line {v = -p_x u + p_y} of dual points whose lines pass through p.
Line dual_line(const PlanePoint& p);
/// Exact incidence test in integer arithmetic.
bool incident(const PlanePoint& p, const Line& line);

// --- incidence structures -------------------------------------------------

/// E_{L,Y}: union of all shadings.
CellSet union_shadings(const LineFamily& family);

/// Sorted (cell, line index) incidences for repeated L_Y(x) queries.
class IncidenceIndex {
public:
    explicit IncidenceIndex(const LineFamily& family);

    /// L_Y(x); throws std::invalid_argument if x is not in E_{L,Y}.
    std::vector<std::size_t> lines_at(Cell x) const;
    std::size_t multiplicity(Cell x) const;
    /// Each distinct cell of E_{L,Y} with its multiplicity, in key order.
    std::vector<std::pair<std::uint64_t, std::uint32_t>> multiplicities() const;
    std::size_t incidence_count() const { return pairs_.size(); }

private:
    std::vector<std::pair<std::uint64_t, std::uint32_t>> pairs_;
};

std::vector<std::size_t> multiplicity(const LineFamily& family, Cell x);

// --- segments ---------------------------------------------------------------

/// A delta x r piece of the tube covering chart positions first..last.
struct TubeSegment {
    Line line;
    std::uint32_t first;
    std::uint32_t last;
    double center;  // chart coordinate of the midpoint, in [0, 1]
    double length;
    double width;
};

/// Greedy left-to-right cover of Y by delta x r segments (optimal in 1-D).
std::vector<TubeSegment> segment_cover(const Shading& y, double r);
/// Number of chart positions spanned by a length-r segment at the line's scale.
std::uint32_t segment_span(const Line& line, double r);
/// (Y)_r: the delta-tube cells of the covering segments.
Shading cover_shading(const Shading& y, double r);

/// A tube of radius `width` around the chord of `core` in the unit square.
struct Tube {
    Line core;
    double width;
};

/// L[T]: lines meeting T at angle <= T.width to its coreline.
std::vector<Line> lines_in_tube(std::span<const Line> lines, const Tube& tube);

// Template definitions.

template <typename Pred>
std::optional<Shading> Shading::from_tube(const Line& line, Pred keep) {
    std::vector<std::uint64_t> keys;
    const double delta = std::ldexp(1.0, -line.k());
    for (const TubeColumn& col : tube_columns(line, delta)) {
        for (std::uint32_t q = col.lo; q <= col.hi; ++q) {
            const Cell c = line.chart() == Chart::shallow ? Cell{col.position, q} : Cell{q, col.position};
            if (keep(c)) keys.push_back(cell_key(c));
        }
    }
    if (keys.empty()) return std::nullopt;
    return Shading(line, assemble(line, std::move(keys)), Trusted{});
}

template <typename Fn>
void ShadingRuns::for_each_cell(Fn fn) const {
    for (const TubeColumn& r : runs)
        for (std::uint32_t q = r.lo; q <= r.hi; ++q)
            fn(line.chart() == Chart::shallow ? Cell{r.position, q} : Cell{q, r.position});
}

}  // namespace flab
