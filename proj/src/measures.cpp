#include "flab/measures.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace flab {

namespace {

using Point = std::array<std::int64_t, 2>;

struct TripledMax {
    std::uint64_t count = 0;
    std::int64_t cx = 0;
    std::int64_t cy = 0;
};

// Largest #(E cap 3Q) over cells Q of side 2^shift lattice units, with the
// lexicographically smallest (cx, cy) among ties.
TripledMax max_tripled(std::span<const Point> pts, int shift) {
    using Entry = std::tuple<std::int64_t, std::int64_t, std::uint64_t>;  // (cy, cx, count)
    std::vector<Entry> cells;
    cells.reserve(pts.size());
    for (const Point& p : pts) cells.emplace_back(p[1] >> shift, p[0] >> shift, 1);

    auto merge = [](std::vector<Entry>& v) {
        std::sort(v.begin(), v.end());
        std::size_t out = 0;
        for (std::size_t n = 0; n < v.size(); ++n) {
            if (out > 0 && std::get<0>(v[out - 1]) == std::get<0>(v[n]) && std::get<1>(v[out - 1]) == std::get<1>(v[n])) {
                std::get<2>(v[out - 1]) += std::get<2>(v[n]);
            } else {
                v[out++] = v[n];
            }
        }
        v.resize(out);
    };
    merge(cells);

    std::vector<Entry> spread;
    spread.reserve(3 * cells.size());
    for (const auto& [cy, cx, c] : cells)
        for (int d = -1; d <= 1; ++d) spread.emplace_back(cy, cx + d, c);
    merge(spread);
    cells.clear();
    for (const auto& [cy, cx, c] : spread)
        for (int d = -1; d <= 1; ++d) cells.emplace_back(cy + d, cx, c);
    merge(cells);

    TripledMax best;
    for (const auto& [cy, cx, c] : cells) {
        if (c > best.count || (c == best.count && std::tie(cx, cy) < std::tie(best.cx, best.cy))) {
            best = TripledMax{c, cx, cy};
        }
    }
    return best;
}

struct Candidate {
    double ratio;
    int shift;
    TripledMax cell;
};

bool better(const Candidate& a, const Candidate& b) {
    if (a.ratio != b.ratio) return a.ratio > b.ratio;
    if (a.shift != b.shift) return a.shift < b.shift;
    return std::tie(a.cell.cx, a.cell.cy) < std::tie(b.cell.cx, b.cell.cy);
}

// Scans shifts lo..hi; value(count, shift) is the ratio, bound(shift) an upper
// bound for it used to skip levels.
template <typename Value, typename Bound>
Candidate scan_levels(std::span<const Point> pts, int lo, int hi, Value value, Bound bound) {
    std::vector<int> order;
    for (int sh = lo; sh <= hi; ++sh) order.push_back(sh);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return bound(x) > bound(y); });
    Candidate best{-1.0, 0, {}};
    for (int sh : order) {
        if (best.ratio >= 0.0 && bound(sh) < best.ratio) break;
        const TripledMax m = max_tripled(pts, sh);
        const Candidate c{value(m.count, sh), sh, m};
        if (best.ratio < 0.0 || better(c, best)) best = c;
    }
    return best;
}

NonConcentrationReport to_report(const Candidate& c, int k, double s) {
    const double side = std::ldexp(1.0, c.shift - k);
    return NonConcentrationReport{s, c.ratio, side,
                                  {(static_cast<double>(c.cell.cx) + 0.5) * side,
                                   (static_cast<double>(c.cell.cy) + 0.5) * side}};
}

void require_exponent(double s) {
    if (!(s > 0.0) || s > 2.0) throw std::out_of_range("exponent s must lie in (0, 2]");
}

}  // namespace

PointSet::PointSet(int k, std::vector<Point> points) : k_(k), points_(std::move(points)) {
    if (k < 0 || k > kMaxLevel) throw std::out_of_range("point lattice scale out of range");
    std::sort(points_.begin(), points_.end());
    points_.erase(std::unique(points_.begin(), points_.end()), points_.end());
}

PointSet PointSet::from_cells(const CellSet& e) {
    std::vector<Point> pts;
    pts.reserve(e.size());
    for (auto key : e.keys()) {
        const Cell c = key_cell(key);
        pts.push_back({c.i, c.j});
    }
    return PointSet(e.level(), std::move(pts));
}

PointSet PointSet::from_lines(std::span<const Line> lines, Chart chart) {
    std::vector<Point> pts;
    int k = -1;
    for (const Line& l : lines) {
        if (l.chart() != chart) continue;
        if (k >= 0 && l.k() != k) throw std::invalid_argument("lines quantized at different scales");
        k = l.k();
        pts.push_back({l.a_q(), l.b_q()});
    }
    if (k < 0) throw std::invalid_argument("no lines in the requested chart");
    return PointSet(k, std::move(pts));
}

NonConcentrationReport katz_tao_constant(const PointSet& e, double s) {
    if (e.empty()) throw std::invalid_argument("empty set has no non-concentration constant");
    require_exponent(s);
    const double n = static_cast<double>(e.size());
    auto value = [&](std::uint64_t count, int sh) { return static_cast<double>(count) / std::exp2(sh * s); };
    auto bound = [&](int sh) { return std::min(n, 9.0 * std::exp2(2.0 * sh)) / std::exp2(sh * s); };
    return to_report(scan_levels(e.points(), 0, e.k(), value, bound), e.k(), s);
}

NonConcentrationReport katz_tao_constant(const CellSet& e, double s) {
    return katz_tao_constant(PointSet::from_cells(e), s);
}

NonConcentrationReport frostman_constant(const PointSet& e, double s, double Delta) {
    if (e.empty()) throw std::invalid_argument("empty set has no non-concentration constant");
    require_exponent(s);
    const int k = e.k();
    const int dl = dyadic_level(Delta);
    if (dl > k) throw std::out_of_range("Delta must satisfy delta <= Delta <= 1");
    const double n = static_cast<double>(e.size());
    // r = 2^(sh - k), so r^s = 2^((sh - k) s).
    auto value = [&](std::uint64_t count, int sh) { return static_cast<double>(count) / (std::exp2((sh - k) * s) * n); };
    auto bound = [&](int sh) { return std::min(n, 9.0 * std::exp2(2.0 * sh)) / (std::exp2((sh - k) * s) * n); };
    return to_report(scan_levels(e.points(), k - dl, k, value, bound), k, s);
}

NonConcentrationReport frostman_constant(const CellSet& e, double s, double Delta) {
    return frostman_constant(PointSet::from_cells(e), s, Delta);
}

NonConcentrationReport frostman_constant_1d(std::span<const std::uint32_t> positions, int k, double s,
                                            double Delta) {
    if (positions.empty()) throw std::invalid_argument("empty set has no non-concentration constant");
    require_exponent(s);
    const int dl = dyadic_level(Delta);
    if (dl > k) throw std::out_of_range("Delta must satisfy delta <= Delta <= 1");
    std::vector<std::uint32_t> pos(positions.begin(), positions.end());
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    const double n = static_cast<double>(pos.size());

    double best = -1.0;
    int best_sh = 0;
    std::int64_t best_block = 0;
    for (int sh = k - dl; sh <= k; ++sh) {
        std::vector<std::pair<std::int64_t, std::uint64_t>> blocks;
        for (auto p : pos) {
            const std::int64_t b = p >> sh;
            if (!blocks.empty() && blocks.back().first == b) {
                ++blocks.back().second;
            } else {
                blocks.emplace_back(b, 1);
            }
        }
        const double scale = std::exp2((sh - k) * s) * n;
        for (std::size_t m = 0; m < blocks.size(); ++m) {
            // Tripled interval around each candidate block b-1, b, b+1.
            for (std::int64_t centre = blocks[m].first - 1; centre <= blocks[m].first + 1; ++centre) {
                std::uint64_t c = 0;
                for (std::size_t q = (m == 0 ? 0 : m - 1); q < blocks.size() && q <= m + 1; ++q) {
                    if (std::abs(blocks[q].first - centre) <= 1) c += blocks[q].second;
                }
                const double v = static_cast<double>(c) / scale;
                if (v > best || (v == best && sh == best_sh && centre < best_block)) {
                    best = v;
                    best_sh = sh;
                    best_block = centre;
                }
            }
        }
    }
    const double side = std::ldexp(1.0, best_sh - k);
    return NonConcentrationReport{s, best, side, {(static_cast<double>(best_block) + 0.5) * side, 0.0}};
}

double density(const Shading& y) {
    std::size_t tube = 0;
    for (const TubeColumn& col : tube_columns(y.line(), std::ldexp(1.0, -y.line().k()))) tube += col.hi - col.lo + 1;
    return static_cast<double>(y.cells().size()) / static_cast<double>(tube);
}

std::uint32_t two_ends_window(int k, double eps1) {
    return static_cast<std::uint32_t>(std::max<long>(1, std::lround(std::exp2(k * (1.0 - eps1)))));
}

double two_ends_constant(std::span<const std::uint32_t> counts, int k, double eps1, double eps2) {
    if (!(eps2 > 0.0 && eps2 < eps1 && eps1 < 1.0)) {
        throw std::out_of_range("two-ends exponents must satisfy 0 < eps2 < eps1 < 1");
    }
    const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    if (total == 0) throw std::invalid_argument("empty profile");
    const std::size_t len = std::min<std::size_t>(two_ends_window(k, eps1), counts.size());
    std::uint64_t window = std::accumulate(counts.begin(), counts.begin() + static_cast<long>(len), std::uint64_t{0});
    std::uint64_t most = window;
    for (std::size_t start = 1; start + len <= counts.size(); ++start) {
        window += counts[start + len - 1];
        window -= counts[start - 1];
        most = std::max(most, window);
    }
    const double delta = std::ldexp(1.0, -k);
    return static_cast<double>(most) / (std::pow(delta, eps2) * static_cast<double>(total));
}

double two_ends_constant(const Shading& y, double eps1, double eps2) {
    const auto counts = position_counts(y);
    return two_ends_constant(counts, y.line().k(), eps1, eps2);
}

GammaReport gamma_profile(std::span<const std::uint32_t> counts, int level, const Line& line, double t) {
    if (!(t >= 0.0) || t > 1.0) throw std::out_of_range("gamma exponent must lie in [0, 1]");
    const std::size_t n = counts.size();
    std::vector<std::uint64_t> prefix(n + 1, 0);
    std::uint32_t peak = 0;
    for (std::size_t p = 0; p < n; ++p) {
        prefix[p + 1] = prefix[p] + counts[p];
        peak = std::max(peak, counts[p]);
    }
    if (prefix[n] == 0) throw std::invalid_argument("gamma of an empty shading");
    const double stretch = std::sqrt(1.0 + line.slope() * line.slope());
    const double total = static_cast<double>(prefix[n]);

    auto weight = [&](int L) { return std::exp2(-(level - L) * t); };
    auto half = [&](int L) { return static_cast<std::size_t>(std::floor(std::exp2(level - L) / stretch + 1e-12)); };
    auto bound = [&](int L) {
        return weight(L) * std::min(total, static_cast<double>(peak) * static_cast<double>(2 * half(L) + 1));
    };
    // Levels by decreasing bound; a level is skipped only when its bound is strictly below the best.
    std::vector<int> order;
    for (int L = level; L >= 0; --L) order.push_back(L);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return bound(x) > bound(y); });

    double best = -1.0;
    int best_l = level;
    std::size_t best_p = 0;
    for (int L : order) {
        if (bound(L) < best) break;
        const double w = weight(L);
        const std::size_t h = half(L);
        double lbest = -1.0;
        std::size_t lp = 0;
        for (std::size_t p = 0; p < n; ++p) {
            const std::size_t lo = p >= h ? p - h : 0;
            const std::size_t hi = std::min(n, p + h + 1);
            const double v = w * static_cast<double>(prefix[hi] - prefix[lo]);
            if (v > lbest) {
                lbest = v;
                lp = p;
            }
        }
        // Ties go to the smallest radius.
        if (lbest > best || (lbest == best && L > best_l)) {
            best = lbest;
            best_l = L;
            best_p = lp;
        }
    }
    const double u = (static_cast<double>(best_p) + 0.5) * std::ldexp(1.0, -level);
    const double v = line.slope() * u + line.intercept();
    const std::array<double, 2> x = line.chart() == Chart::shallow ? std::array<double, 2>{u, v} : std::array<double, 2>{v, u};
    return GammaReport{t, best, std::ldexp(1.0, -best_l), x};
}

GammaReport gamma(const Shading& y, double t) {
    const auto counts = position_counts(y);
    return gamma_profile(counts, y.line().k(), y.line(), t);
}

GammaReport gamma_coarse(const Shading& y, double r, double t) {
    const int k = y.line().k();
    const int lr = dyadic_level(r);
    if (lr > k) throw std::out_of_range("coarsening scale below delta");
    const auto counts = position_counts(y);
    std::vector<std::uint32_t> blocks(std::size_t{1} << lr, 0);
    for (std::size_t p = 0; p < counts.size(); ++p) {
        if (counts[p] != 0) blocks[p >> (k - lr)] = 1;
    }
    return gamma_profile(blocks, lr, y.line(), t);
}

GammaSup gamma_sup(const LineFamily& family, double t) {
    if (family.empty()) throw std::invalid_argument("gamma of an empty family");
    GammaSup best{gamma(family[0], t), 0};
    for (std::size_t idx = 1; idx < family.size(); ++idx) {
        const GammaReport g = gamma(family[idx], t);
        if (g.value > best.report.value) best = GammaSup{g, idx};
    }
    return best;
}

double t_star(double t) {
    if (!(t >= 0.0) || t > 2.0) throw std::out_of_range("t must lie in [0, 2]");
    return std::min(t, 2.0 - t);
}

}  // namespace flab
