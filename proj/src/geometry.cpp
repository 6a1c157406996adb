#include "flab/geometry.h"

#include <algorithm>
#include <bit>
#include <tuple>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace flab {

namespace {

std::int64_t unit_q(int k) { return std::int64_t{1} << k; }

}  // namespace

Line::Line(Chart chart, std::int64_t a_q, std::int64_t b_q, int k) : chart_(chart), a_q_(a_q), b_q_(b_q), k_(k) {
    if (k < 0 || k > kMaxLevel) throw std::out_of_range("line scale out of range");
    const std::int64_t one = unit_q(k);
    const bool slope_ok = chart == Chart::shallow ? (a_q >= -one && a_q <= one) : (a_q > -one && a_q < one);
    if (!slope_ok) throw std::out_of_range("slope outside the chart range");
    if (b_q < -one || b_q > 2 * one) throw std::out_of_range("intercept outside [-1, 2]");
}

double Line::slope() const { return std::ldexp(static_cast<double>(a_q_), -k_); }
double Line::intercept() const { return std::ldexp(static_cast<double>(b_q_), -k_); }

std::array<double, 2> Line::direction() const {
    const double a = slope();
    const double norm = std::sqrt(1.0 + a * a);
    if (chart_ == Chart::shallow) return {1.0 / norm, a / norm};
    return {a / norm, 1.0 / norm};
}

std::optional<std::array<std::array<double, 2>, 2>> Line::chord() const {
    // Work in chart coordinates (u along, v = a u + b across), then swap back.
    const double a = slope();
    const double b = intercept();
    double lo = 0.0;
    double hi = 1.0;
    if (a == 0.0) {
        if (b < 0.0 || b > 1.0) return std::nullopt;
    } else {
        const double u0 = (0.0 - b) / a;
        const double u1 = (1.0 - b) / a;
        lo = std::max(lo, std::min(u0, u1));
        hi = std::min(hi, std::max(u0, u1));
        if (lo > hi) return std::nullopt;
    }
    std::array<std::array<double, 2>, 2> out{};
    const double us[2] = {lo, hi};
    for (int e = 0; e < 2; ++e) {
        const double v = std::clamp(a * us[e] + b, 0.0, 1.0);
        out[e] = chart_ == Chart::shallow ? std::array<double, 2>{us[e], v} : std::array<double, 2>{v, us[e]};
    }
    return out;
}

double Line::distance(std::array<double, 2> p) const {
    const double a = slope();
    const double b = intercept();
    const double u = chart_ == Chart::shallow ? p[0] : p[1];
    const double v = chart_ == Chart::shallow ? p[1] : p[0];
    return std::abs(v - a * u - b) / std::sqrt(1.0 + a * a);
}

double angle_between(const Line& l1, const Line& l2) {
    const auto d1 = l1.direction();
    const auto d2 = l2.direction();
    const double dot = std::abs(d1[0] * d2[0] + d1[1] * d2[1]);
    const double cross = std::abs(d1[0] * d2[1] - d1[1] * d2[0]);
    return std::atan2(cross, dot);
}

std::vector<TubeColumn> tube_columns(const Line& line, double w) {
    const int k = line.k();
    const std::int64_t side = unit_q(k);
    const std::int64_t a = line.a_q();
    const std::int64_t b = line.b_q();
    const double scaled = w / std::ldexp(1.0, -k);  // w in cell units
    if (!(scaled >= 0.0)) throw std::out_of_range("tube width must be nonnegative");

    // A cell at (along p, across q) is in the tube iff |N| <= 2 W sqrt(4^k + a^2)
    // with N = 2^{k+1} q + c0(p). Integer widths are compared exactly.
    const bool integral = scaled == std::floor(scaled) && scaled < 1e6;
    const __int128 wi = static_cast<__int128>(scaled);
    const __int128 rhs_exact = 4 * wi * wi * (static_cast<__int128>(side) * side + static_cast<__int128>(a) * a);
    const long double bound =
        2.0L * scaled * std::sqrt(static_cast<long double>(side) * side + static_cast<long double>(a) * a);
    const std::int64_t step = 2 * side;

    auto inside = [&](std::int64_t q, std::int64_t c0) {
        const __int128 n = static_cast<__int128>(step) * q + c0;
        if (integral) return n * n <= rhs_exact;
        const long double nl = static_cast<long double>(n);
        return nl * nl <= bound * bound;
    };

    std::vector<TubeColumn> out;
    out.reserve(static_cast<std::size_t>(side));
    if (integral) {
        // |N| <= nmax with nmax = isqrt(rhs_exact), then exact floor divisions.
        auto nmax = static_cast<__int128>(std::sqrt(static_cast<long double>(rhs_exact)));
        while (nmax * nmax > rhs_exact) --nmax;
        while ((nmax + 1) * (nmax + 1) <= rhs_exact) ++nmax;
        const auto m = static_cast<std::int64_t>(nmax);
        // step = 2^(k+1), and >> on signed values floors.
        const int sh = k + 1;
        for (std::int64_t p = 0; p < side; ++p) {
            const std::int64_t c0 = side - a * (2 * p + 1) - 2 * side * b;
            const std::int64_t lo = std::max<std::int64_t>(-((m + c0) >> sh), 0);
            const std::int64_t hi = std::min<std::int64_t>((m - c0) >> sh, side - 1);
            if (lo > hi) continue;
            out.push_back(TubeColumn{static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(lo),
                                     static_cast<std::uint32_t>(hi)});
        }
        return out;
    }
    for (std::int64_t p = 0; p < side; ++p) {
        const std::int64_t c0 = side - a * (2 * p + 1) - 2 * side * b;
        std::int64_t lo = static_cast<std::int64_t>(std::ceil((-bound - c0) / step));
        std::int64_t hi = static_cast<std::int64_t>(std::floor((bound - c0) / step));
        while (inside(lo - 1, c0)) --lo;
        while (lo <= hi && !inside(lo, c0)) ++lo;
        while (inside(hi + 1, c0)) ++hi;
        while (hi >= lo && !inside(hi, c0)) --hi;
        lo = std::max<std::int64_t>(lo, 0);
        hi = std::min<std::int64_t>(hi, side - 1);
        if (lo > hi) continue;
        out.push_back(TubeColumn{static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(lo),
                                 static_cast<std::uint32_t>(hi)});
    }
    return out;
}

CellSet tube_cells(const Line& line, double w) {
    std::vector<std::uint64_t> keys;
    for (const TubeColumn& col : tube_columns(line, w)) {
        for (std::uint32_t q = col.lo; q <= col.hi; ++q) {
            keys.push_back(cell_key(line.chart() == Chart::shallow ? Cell{col.position, q} : Cell{q, col.position}));
        }
    }
    std::sort(keys.begin(), keys.end());
    return CellSet::from_sorted_keys(line.k(), std::move(keys));
}

Shading::Shading(Line line, CellSet cells) : line_(line), cells_(std::move(cells)) {
    if (cells_.empty()) throw std::invalid_argument("a shading must be nonempty");
    if (cells_.level() != line_.k()) throw std::invalid_argument("shading and line live at different scales");
    if (!is_subset(cells_, tube_cells(line_, std::ldexp(1.0, -line_.k())))) {
        throw std::invalid_argument("shading leaves the delta-tube of its line");
    }
}

Shading::Shading(Line line, CellSet cells, Trusted) : line_(line), cells_(std::move(cells)) {}

CellSet Shading::assemble(const Line& line, std::vector<std::uint64_t> keys) {
    if (!std::is_sorted(keys.begin(), keys.end())) std::sort(keys.begin(), keys.end());
    return CellSet::from_sorted_keys(line.k(), std::move(keys));
}

std::vector<std::uint32_t> position_counts(const Shading& y) {
    std::vector<std::uint32_t> counts(y.cells().cells_per_side(), 0);
    for (auto key : y.cells().keys()) ++counts[chart_position(y.line(), key_cell(key))];
    return counts;
}

std::size_t ShadingRuns::cell_count() const {
    std::size_t n = 0;
    for (const TubeColumn& r : runs) n += r.hi - r.lo + 1;
    return n;
}

std::vector<std::uint32_t> ShadingRuns::counts() const {
    std::vector<std::uint32_t> out(std::size_t{1} << line.k(), 0);
    for (const TubeColumn& r : runs) out[r.position] += r.hi - r.lo + 1;
    return out;
}

ShadingRuns to_runs(const Shading& y) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pc;  // (position, cross)
    pc.reserve(y.cells().size());
    for (auto key : y.cells().keys()) {
        const Cell c = key_cell(key);
        pc.emplace_back(chart_position(y.line(), c), y.line().chart() == Chart::shallow ? c.j : c.i);
    }
    std::sort(pc.begin(), pc.end());
    ShadingRuns out{y.line(), {}};
    for (const auto& [p, q] : pc) {
        if (!out.runs.empty() && out.runs.back().position == p && out.runs.back().hi + 1 == q) {
            out.runs.back().hi = q;
        } else {
            out.runs.push_back(TubeColumn{p, q, q});
        }
    }
    return out;
}

Shading from_runs(const ShadingRuns& runs) {
    std::vector<Cell> cells;
    cells.reserve(runs.cell_count());
    runs.for_each_cell([&](Cell c) { cells.push_back(c); });
    return Shading(runs.line, CellSet(runs.line.k(), std::move(cells)));
}

LineFamily::LineFamily(Scale scale, std::vector<Shading> entries) : scale_(scale), entries_(std::move(entries)) {
    std::vector<std::tuple<Chart, std::int64_t, std::int64_t>> ids;
    ids.reserve(entries_.size());
    for (const Shading& y : entries_) {
        if (y.line().k() != scale_.k()) throw std::invalid_argument("shading scale differs from the family scale");
        ids.emplace_back(y.line().chart(), y.line().a_q(), y.line().b_q());
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw std::invalid_argument("lines in a family must be distinct after quantization");
    }
}

std::vector<Line> LineFamily::lines() const {
    std::vector<Line> out;
    out.reserve(entries_.size());
    for (const Shading& y : entries_) out.push_back(y.line());
    return out;
}

DualPoint dual_point(const Line& line) { return DualPoint{line.chart(), line.a_q(), line.b_q(), line.k()}; }

Line line_from_dual(const DualPoint& p) { return Line(p.chart, p.a_q, p.b_q, p.k); }

Line dual_line(const PlanePoint& p) {
    try {
        return Line(Chart::shallow, -p.x_q, p.y_q, p.k);
    } catch (const std::out_of_range&) {
        throw std::out_of_range("point outside the dual chart range");
    }
}

bool incident(const PlanePoint& p, const Line& line) {
    if (p.k != line.k()) throw std::invalid_argument("point and line quantized at different scales");
    const __int128 one = static_cast<__int128>(unit_q(p.k));
    const __int128 u = line.chart() == Chart::shallow ? p.x_q : p.y_q;
    const __int128 v = line.chart() == Chart::shallow ? p.y_q : p.x_q;
    return v * one == static_cast<__int128>(line.a_q()) * u + static_cast<__int128>(line.b_q()) * one;
}

CellSet union_shadings(const LineFamily& family) {
    if (family.empty()) throw std::invalid_argument("union of an empty family");
    const int k = family.scale().k();
    if (k <= 13) {
        const std::uint64_t side = std::uint64_t{1} << k;
        std::vector<std::uint64_t> bits((side * side + 63) / 64, 0);
        for (const Shading& y : family.entries()) {
            for (auto key : y.cells().keys()) {
                const Cell c = key_cell(key);
                const std::uint64_t idx = std::uint64_t{c.j} * side + c.i;
                bits[idx >> 6] |= std::uint64_t{1} << (idx & 63);
            }
        }
        std::vector<std::uint64_t> keys;
        for (std::uint64_t w = 0; w < bits.size(); ++w) {
            std::uint64_t word = bits[w];
            while (word != 0) {
                const int bit = std::countr_zero(word);
                const std::uint64_t idx = w * 64 + static_cast<std::uint64_t>(bit);
                keys.push_back(cell_key(Cell{static_cast<std::uint32_t>(idx % side), static_cast<std::uint32_t>(idx / side)}));
                word &= word - 1;
            }
        }
        return CellSet::from_sorted_keys(k, std::move(keys));
    }
    std::vector<std::uint64_t> keys;
    for (const Shading& y : family.entries()) keys.insert(keys.end(), y.cells().keys().begin(), y.cells().keys().end());
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    return CellSet::from_sorted_keys(k, std::move(keys));
}

IncidenceIndex::IncidenceIndex(const LineFamily& family) {
    for (std::size_t idx = 0; idx < family.size(); ++idx) {
        for (auto key : family[idx].cells().keys()) pairs_.emplace_back(key, static_cast<std::uint32_t>(idx));
    }
    std::sort(pairs_.begin(), pairs_.end());
}

std::vector<std::size_t> IncidenceIndex::lines_at(Cell x) const {
    const auto key = cell_key(x);
    auto lo = std::lower_bound(pairs_.begin(), pairs_.end(), std::make_pair(key, std::uint32_t{0}));
    std::vector<std::size_t> out;
    for (auto it = lo; it != pairs_.end() && it->first == key; ++it) out.push_back(it->second);
    if (out.empty()) throw std::invalid_argument("cell is not in the union of the shadings");
    return out;
}

std::size_t IncidenceIndex::multiplicity(Cell x) const { return lines_at(x).size(); }

std::vector<std::pair<std::uint64_t, std::uint32_t>> IncidenceIndex::multiplicities() const {
    std::vector<std::pair<std::uint64_t, std::uint32_t>> out;
    for (const auto& [key, idx] : pairs_) {
        if (!out.empty() && out.back().first == key) {
            ++out.back().second;
        } else {
            out.emplace_back(key, 1);
        }
    }
    return out;
}

std::vector<std::size_t> multiplicity(const LineFamily& family, Cell x) {
    std::vector<std::size_t> out;
    for (std::size_t idx = 0; idx < family.size(); ++idx) {
        if (family[idx].cells().contains(x)) out.push_back(idx);
    }
    if (out.empty()) throw std::invalid_argument("cell is not in the union of the shadings");
    return out;
}

std::uint32_t segment_span(const Line& line, double r) {
    const double delta = std::ldexp(1.0, -line.k());
    if (!(r >= delta) || r > 1.0) throw std::out_of_range("segment length must satisfy delta <= r <= 1");
    return std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::floor(r / delta + 1e-9)));
}

std::vector<TubeSegment> segment_cover(const Shading& y, double r) {
    const std::uint32_t span = segment_span(y.line(), r);
    const double delta = std::ldexp(1.0, -y.line().k());
    const auto counts = position_counts(y);
    std::vector<TubeSegment> out;
    std::uint32_t next_free = 0;
    for (std::uint32_t p = 0; p < counts.size(); ++p) {
        if (counts[p] == 0 || (p < next_free)) continue;
        const std::uint32_t last = p + span - 1;
        out.push_back(TubeSegment{y.line(), p, last, (static_cast<double>(p) + 0.5 * span) * delta, r, delta});
        next_free = last + 1;
    }
    return out;
}

Shading cover_shading(const Shading& y, double r) {
    const auto segments = segment_cover(y, r);
    std::vector<char> covered(y.cells().cells_per_side(), 0);
    for (const TubeSegment& s : segments) {
        for (std::uint32_t p = s.first; p <= s.last && p < covered.size(); ++p) covered[p] = 1;
    }
    const Line line = y.line();
    auto out = Shading::from_tube(line, [&](Cell c) { return covered[chart_position(line, c)] != 0; });
    return std::move(*out);
}

std::vector<Line> lines_in_tube(std::span<const Line> lines, const Tube& tube) {
    if (!(tube.width > 0.0) || tube.width > 1.0) throw std::out_of_range("tube width must lie in (0, 1]");
    const auto chord = tube.core.chord();
    std::vector<Line> out;
    if (!chord) return out;
    const auto& [p, q] = *chord;
    for (const Line& l : lines) {
        if (angle_between(l, tube.core) > tube.width) continue;
        // Signed distances of the chord endpoints decide whether l crosses it.
        const double a = l.slope();
        const double b = l.intercept();
        const double norm = std::sqrt(1.0 + a * a);
        auto signed_dist = [&](const std::array<double, 2>& pt) {
            const double u = l.chart() == Chart::shallow ? pt[0] : pt[1];
            const double v = l.chart() == Chart::shallow ? pt[1] : pt[0];
            return (v - a * u - b) / norm;
        };
        const double sp = signed_dist(p);
        const double sq = signed_dist(q);
        const double dist = (sp <= 0.0) != (sq <= 0.0) ? 0.0 : std::min(std::abs(sp), std::abs(sq));
        if (dist <= tube.width) out.push_back(l);
    }
    return out;
}

}  // namespace flab
