#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "flab/structure.h"

namespace flab {

TwoEndsScale two_ends_scale(const Shading& y, double v, double C) {
    if (!(v > 0.0) || v >= 1.0) throw std::out_of_range("v must lie in (0, 1)");
    if (!(C >= 1.0)) throw std::out_of_range("C must be at least 1");
    const int k = y.line().k();
    for (int L = k; L >= 0; --L) {
        const double r = std::ldexp(1.0, -L);
        const std::size_t count = segment_cover(y, r).size();
        if (static_cast<double>(count) < std::pow(r, -v) / C) return TwoEndsScale{r, count, true};
    }
    return TwoEndsScale{};
}

PointSet katz_tao_subsample(const PointSet& e, double rho, double s) {
    if (e.empty()) throw std::invalid_argument("cannot subsample an empty set");
    const int k = e.k();
    const int lr = dyadic_level(rho);
    if (lr >= k || lr <= 0) throw std::out_of_range("rho must lie strictly between delta and 1");
    const double slack = std::pow(k * std::log(2.0), 2.0);
    const double c = katz_tao_constant(e, s).constant;
    if (c > slack) {
        std::ostringstream m;
        m << "input is not a Katz-Tao set with poly-log constant (C = " << c << ")";
        throw std::invalid_argument(m.str());
    }
    // One representative per rho-cell, as a point on the rho-lattice.
    const int shift = k - lr;
    std::vector<std::array<std::int64_t, 2>> pts;
    for (const auto& p : e.points()) pts.push_back({p[0] >> shift, p[1] >> shift});
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    // Bottom-up caps: an r-cell keeps at most floor((r/rho)^s) points.
    for (int up = 1; up <= lr; ++up) {
        const auto cap = static_cast<std::size_t>(std::floor(std::exp2(up * s) + 1e-9));
        std::vector<std::pair<std::array<std::int64_t, 2>, std::size_t>> tagged;
        for (std::size_t n = 0; n < pts.size(); ++n) tagged.push_back({{pts[n][0] >> up, pts[n][1] >> up}, n});
        std::sort(tagged.begin(), tagged.end());
        std::vector<char> keep(pts.size(), 0);
        std::size_t run = 0;
        for (std::size_t n = 0; n < tagged.size(); ++n) {
            run = (n > 0 && tagged[n].first == tagged[n - 1].first) ? run + 1 : 0;
            if (run < cap) keep[tagged[n].second] = 1;
        }
        std::vector<std::array<std::int64_t, 2>> next;
        for (std::size_t n = 0; n < pts.size(); ++n)
            if (keep[n]) next.push_back(pts[n]);
        pts = std::move(next);
    }
    return PointSet(lr, std::move(pts));
}

RichPoints rich_point_refine(const LineFamily& family) {
    if (family.empty()) throw std::invalid_argument("rich point refinement of an empty family");
    std::vector<Shading> cur(family.entries().begin(), family.entries().end());
    std::vector<std::size_t> origin(cur.size());
    for (std::size_t n = 0; n < origin.size(); ++n) origin[n] = n;
    RefinementTrace trace;
    std::vector<std::uint64_t> rich;
    int level = 0;

    for (int pass = 0; pass < 2; ++pass) {
        const LineFamily f(family.scale(), cur);
        const IncidenceIndex idx(f);
        const auto mults = idx.multiplicities();
        std::vector<double> weights;
        std::vector<int> levels;
        for (const auto& [key, m] : mults) {
            weights.push_back(static_cast<double>(m));
            levels.push_back(dyadic_class(m));
        }
        const Pigeonhole ph = dyadic_pigeonhole(weights, levels);
        level = ph.level;
        rich.clear();
        for (auto n : ph.kept) rich.push_back(mults[n].first);

        std::vector<Shading> next;
        std::vector<std::size_t> next_origin;
        for (std::size_t n = 0; n < cur.size(); ++n) {
            std::vector<std::uint64_t> keys;
            std::set_intersection(cur[n].cells().keys().begin(), cur[n].cells().keys().end(), rich.begin(), rich.end(),
                                  std::back_inserter(keys));
            if (keys.empty()) continue;
            const CellSet cells = CellSet::from_sorted_keys(family.scale().k(), std::move(keys));
            const auto& line = cur[n].line();
            next.push_back(*Shading::from_tube(line, [&](Cell c) { return cells.contains(c); }));
            next_origin.push_back(origin[n]);
        }
        std::ostringstream label;
        label << "pass " << pass << " multiplicity class [" << (1u << level) << ", " << (2u << level) << ") of "
              << ph.occupied_levels;
        trace.add(label.str(), ph.kept_weight / ph.total_weight, static_cast<double>(ph.occupied_levels));
        const bool stable = next.size() == cur.size() && ph.occupied_levels == 1;
        cur = std::move(next);
        origin = std::move(next_origin);
        if (stable) break;
    }
    return RichPoints{LineFamily(family.scale(), std::move(cur)),
                      CellSet::from_sorted_keys(family.scale().k(), std::move(rich)), std::uint32_t{1} << level,
                      std::move(origin), std::move(trace)};
}

BroadNarrow broad_narrow(const LineFamily& family, Cell x) {
    const std::vector<std::size_t> through = multiplicity(family, x);
    if (through.size() < 2) throw std::invalid_argument("broad-narrow undefined: fewer than two lines at x");
    const double delta = family.scale().delta();
    const double pi = std::numbers::pi;

    std::vector<std::pair<double, std::size_t>> dirs;
    for (auto idx : through) {
        const auto d = family[idx].line().direction();
        double th = std::atan2(d[1], d[0]);
        if (th < 0.0) th += pi;
        if (th >= pi) th -= pi;
        dirs.emplace_back(th, idx);
    }
    std::sort(dirs.begin(), dirs.end());
    // Unwrap at the largest circular gap.
    std::size_t cut = 0;
    double gap = dirs.front().first + pi - dirs.back().first;
    for (std::size_t n = 1; n < dirs.size(); ++n) {
        if (dirs[n].first - dirs[n - 1].first > gap) {
            gap = dirs[n].first - dirs[n - 1].first;
            cut = n;
        }
    }
    std::rotate(dirs.begin(), dirs.begin() + static_cast<long>(cut), dirs.end());
    for (std::size_t n = 1; n < dirs.size(); ++n)
        if (dirs[n].first < dirs[n - 1].first) dirs[n].first += pi;

    std::size_t lo = 0, hi = dirs.size();  // S = dirs[lo, hi)
    if (dirs.back().first - dirs.front().first > 1.0) {
        // Densest arc of length pi/4.
        std::size_t best = 0, best_lo = 0, right = 0;
        for (std::size_t left = 0; left < dirs.size(); ++left) {
            while (right < dirs.size() && dirs[right].first - dirs[left].first <= pi / 4) ++right;
            if (right - left > best) {
                best = right - left;
                best_lo = left;
            }
        }
        lo = best_lo;
        hi = best_lo + best;
    }

    BroadNarrow out;
    while (true) {
        const std::size_t n = hi - lo;
        const std::size_t q = std::max<std::size_t>(1, n / 4);
        const double span = dirs[hi - 1].first - dirs[lo].first;
        const double g = dirs[hi - q].first - dirs[lo + q - 1].first;
        const double rho = std::min(1.0, std::max(span + delta, 10 * delta));
        if (n == 2 || g + delta >= rho / out.K) {
            out.rho = rho;
            for (std::size_t m = lo; m < hi; ++m) out.narrow.push_back(dirs[m].second);
            for (std::size_t m = lo; m < lo + q; ++m) out.first.push_back(dirs[m].second);
            for (std::size_t m = hi - q; m < hi; ++m) out.second.push_back(dirs[m].second);
            break;
        }
        const std::size_t new_lo = lo + q - 1, new_hi = hi - q + 1;
        lo = new_lo;
        hi = new_hi;
    }
    return out;
}

}  // namespace flab
