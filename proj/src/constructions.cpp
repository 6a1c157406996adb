#include "flab/constructions.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace flab {

namespace {

constexpr std::array<std::pair<ConfigKind, std::string_view>, 6> kKindNames{{
    {ConfigKind::base, "base"},
    {ConfigKind::case1, "case1"},
    {ConfigKind::case2, "case2"},
    {ConfigKind::random, "random"},
    {ConfigKind::bush, "bush"},
    {ConfigKind::grid, "grid"},
}};

void require_k(int k) {
    if (k < 2 || k > kMaxLevel) throw std::out_of_range("scale exponent k must lie in [2, 16]");
}

void require_t(double t) {
    if (!(t > 0.0) || t >= 2.0) throw std::out_of_range("t must lie in (0, 2)");
}

// Tube runs at scale k of the line, at chart positions accepted by keep.
template <typename Keep>
std::vector<TubeColumn> runs_on_positions(const Line& line, Keep keep) {
    std::vector<TubeColumn> out;
    for (const TubeColumn& col : tube_columns(line, std::ldexp(1.0, -line.k())))
        if (keep(col.position)) out.push_back(col);
    return out;
}

// Cantor positions for one line; the phase with most tube cells among 16 seeds wins.
std::vector<std::uint32_t> best_cantor(const Line& line, double s, std::uint64_t seed) {
    const auto cols = tube_columns(line, std::ldexp(1.0, -line.k()));
    std::vector<std::uint32_t> best;
    std::size_t best_cells = 0;
    for (std::uint64_t phase = 0; phase < 16; ++phase) {
        auto pos = cantor_positions(line.k(), s, mix_seed(seed, phase));
        std::size_t cells = 0;
        for (const auto& c : cols)
            if (std::binary_search(pos.begin(), pos.end(), c.position)) cells += c.hi - c.lo + 1;
        if (cells > best_cells) {
            best_cells = cells;
            best = std::move(pos);
        }
    }
    return best;
}

Shading shading_from_runs_trusted(const Line& line, const std::vector<TubeColumn>& runs) {
    std::vector<std::uint32_t> positions;
    for (const auto& r : runs) positions.push_back(r.position);
    // Whole tube columns at those positions, which from_tube rebuilds exactly.
    auto y = Shading::from_tube(line, [&](Cell c) {
        return std::binary_search(positions.begin(), positions.end(), chart_position(line, c));
    });
    if (!y) throw std::logic_error("empty shading");
    return *std::move(y);
}

std::vector<bool> shaded_positions(const Shading& y) {
    std::vector<bool> rows(y.cells().cells_per_side(), false);
    for (auto key : y.cells().keys()) rows[chart_position(y.line(), key_cell(key))] = true;
    return rows;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    const std::int64_t q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

// Tripled-cell counts for incremental Katz-Tao rejection on the dual lattice.
class KatzTaoGuard {
public:
    KatzTaoGuard(int k, double s, double limit) : k_(k), s_(s), limit_(limit), counts_(k + 1) {}

    bool admits(std::int64_t a, std::int64_t b) const {
        for (int sh = 0; sh <= k_; ++sh) {
            const std::int64_t cx = a >> sh, cy = b >> sh;
            const double cap = limit_ * std::exp2(sh * s_);
            for (int dx = -1; dx <= 1; ++dx)
                for (int dy = -1; dy <= 1; ++dy) {
                    std::uint64_t tripled = 1;
                    for (int ex = -1; ex <= 1; ++ex)
                        for (int ey = -1; ey <= 1; ++ey) tripled += count(sh, cx + dx + ex, cy + dy + ey);
                    if (static_cast<double>(tripled) > cap) return false;
                }
        }
        return true;
    }

    void add(std::int64_t a, std::int64_t b) {
        for (int sh = 0; sh <= k_; ++sh) ++counts_[sh][key(a >> sh, b >> sh)];
    }

private:
    static std::uint64_t key(std::int64_t x, std::int64_t y) {
        return (static_cast<std::uint64_t>(x + (std::int64_t{1} << 31)) << 32) |
               static_cast<std::uint64_t>(y + (std::int64_t{1} << 31));
    }
    std::uint32_t count(int sh, std::int64_t x, std::int64_t y) const {
        const auto it = counts_[sh].find(key(x, y));
        return it == counts_[sh].end() ? 0 : it->second;
    }

    int k_;
    double s_;
    double limit_;
    std::vector<std::unordered_map<std::uint64_t, std::uint32_t>> counts_;
};

double chord_length(const Line& l) {
    const auto c = l.chord();
    if (!c) return 0.0;
    return std::hypot((*c)[1][0] - (*c)[0][0], (*c)[1][1] - (*c)[0][1]);
}

}  // namespace

std::string_view to_string(ConfigKind kind) {
    for (const auto& [k, name] : kKindNames)
        if (k == kind) return name;
    throw std::logic_error("unknown config kind");
}

ConfigKind parse_kind(std::string_view name) {
    for (const auto& [k, n] : kKindNames)
        if (n == name) return k;
    throw std::invalid_argument("unknown config kind '" + std::string(name) + "'");
}

void ConfigSpec::validate() const {
    require_k(k);
    require_t(t);
    if (!(s >= 0.0) || s > 1.0) throw std::out_of_range("s must lie in [0, 1]");
    if (!(lambda > 0.0) || lambda > 1.0) throw std::out_of_range("lambda must lie in (0, 1]");
    if (!(eps2 > 0.0 && eps2 < eps1 && eps1 < 1.0)) throw std::out_of_range("need 0 < eps2 < eps1 < 1");
    const bool two_scale = kind == ConfigKind::case1 || kind == ConfigKind::case2;
    if (two_scale) {
        require_k(r_k);
        if (r_k >= k) throw std::out_of_range("need delta < r");
        if (kind == ConfigKind::case2 && t < 1.0) throw std::out_of_range("case2 needs t in [1, 2)");
        if (!(s > 0.0)) throw std::out_of_range("base shadings need s in (0, 1]");
    }
    if (kind == ConfigKind::base && !(s > 0.0)) throw std::out_of_range("base shadings need s in (0, 1]");
    // A sweep delta coarser than r is reported per point by the sweep, not here.
    for (int d : deltas) require_k(d);
}

ConfigSpec ConfigSpec::at_scale(int k_new) const {
    ConfigSpec out = *this;
    out.k = k_new;
    return out;
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("empty range");
    // Rejection keeps the draw exactly uniform.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return x % n;
}

double Rng::unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::vector<std::uint32_t> cantor_positions(int k, double s, std::uint64_t seed) {
    if (k < 0 || k > kMaxLevel) throw std::out_of_range("level out of range");
    if (!(s >= 0.0) || s > 1.0) throw std::out_of_range("s must lie in [0, 1]");
    Rng rng(seed);
    std::vector<std::uint32_t> cur{0};
    for (int j = 1; j <= k; ++j) {
        const bool split = std::floor(s * j + 1e-9) > std::floor(s * (j - 1) + 1e-9);
        std::vector<std::uint32_t> next;
        next.reserve(cur.size() * (split ? 2 : 1));
        for (auto p : cur) {
            if (split) {
                next.push_back(2 * p);
                next.push_back(2 * p + 1);
            } else {
                next.push_back(2 * p + static_cast<std::uint32_t>(rng.next() & 1));
            }
        }
        cur = std::move(next);
    }
    std::sort(cur.begin(), cur.end());
    return cur;
}

LineFamily build_base(int r_k, double t, double s, std::uint64_t seed) {
    require_k(r_k);
    if (!(t > 0.0) || t > 2.0) throw std::out_of_range("t must lie in (0, 2]");
    if (!(s > 0.0) || s > 1.0) throw std::out_of_range("s must lie in (0, 1]");
    const double n_target = std::exp2(r_k * t);
    if (n_target < 4.0 - 1e-9) throw std::invalid_argument("infeasible: r^-t < 4");
    const std::int64_t one = std::int64_t{1} << r_k;
    const long n_a = std::max(1L, std::lround(std::sqrt(2.0 * n_target)));
    const long n_b = std::max(1L, std::lround(n_target / static_cast<double>(n_a)));

    std::set<std::pair<std::int64_t, std::int64_t>> duals;
    for (long ib = 0; ib < n_b; ++ib)
        for (long ia = 0; ia < n_a; ++ia) {
            const double a = -0.5 + (static_cast<double>(ia) + 0.5) / static_cast<double>(n_a);
            const double b = 0.25 + (static_cast<double>(ib) + 0.5) / (2.0 * static_cast<double>(n_b));
            duals.emplace(static_cast<std::int64_t>(std::floor(a * one)), static_cast<std::int64_t>(std::floor(b * one)));
        }

    std::vector<Shading> ys;
    std::uint64_t idx = 0;
    for (const auto& [a_q, b_q] : duals) {
        const Line l(Chart::steep, a_q, b_q, r_k);
        const auto rows = best_cantor(l, s, mix_seed(seed, idx++));
        auto y = Shading::from_tube(l, [&](Cell c) { return std::binary_search(rows.begin(), rows.end(), c.j); });
        if (y) ys.push_back(*std::move(y));
    }
    return LineFamily(Scale(r_k), std::move(ys));
}

LineFamily rescale_case1(const LineFamily& base, int k) {
    require_k(k);
    const int r_k = base.scale().k();
    if (k <= r_k) throw std::invalid_argument("rescale needs delta < r");
    const int shift = k - r_k;
    std::vector<Shading> ys;
    for (const Shading& y : base.entries()) {
        if (y.line().chart() != Chart::steep) throw std::invalid_argument("rescale needs lines transverse to the horizontal axis");
        const auto rows = shaded_positions(y);
        const Line l(Chart::steep, y.line().a_q(), y.line().b_q(), k);
        auto out = Shading::from_tube(l, [&](Cell c) { return rows[c.j >> shift]; });
        if (out) ys.push_back(*std::move(out));
    }
    return LineFamily(Scale(k), std::move(ys));
}

LineFamily inverse_rescale_case1(const LineFamily& fine, int r_k) {
    require_k(r_k);
    const int k = fine.scale().k();
    if (r_k >= k) throw std::invalid_argument("inverse rescale needs r > delta");
    const int shift = k - r_k;
    std::vector<Shading> ys;
    for (const Shading& y : fine.entries()) {
        if (y.line().chart() != Chart::steep) throw std::invalid_argument("inverse rescale needs steep lines");
        const auto rows = shaded_positions(y);
        std::vector<bool> coarse(std::size_t{1} << r_k, false);
        for (std::size_t p = 0; p < rows.size(); ++p)
            if (rows[p]) coarse[p >> shift] = true;
        const Line l(Chart::steep, y.line().a_q(), y.line().b_q(), r_k);
        auto out = Shading::from_tube(l, [&](Cell c) { return static_cast<bool>(coarse[c.j]); });
        if (out) ys.push_back(*std::move(out));
    }
    return LineFamily(Scale(r_k), std::move(ys));
}

std::size_t case2_bundle_size(int r_k, int k, double t) {
    const std::int64_t R = std::int64_t{1} << (k - r_k);
    const long n_a = std::max(1L, std::lround(std::pow(static_cast<double>(R), t - 1.0)));
    return static_cast<std::size_t>(n_a * R);
}

void stream_case2(const LineFamily& base, int k, double t, const std::function<void(const ShadingRuns&)>& visit) {
    require_k(k);
    if (!(t >= 1.0) || t >= 2.0) throw std::out_of_range("case2 needs t in [1, 2)");
    const int r_k = base.scale().k();
    if (k <= r_k) throw std::invalid_argument("bundle needs delta < r");
    const int shift = k - r_k;
    const std::int64_t R = std::int64_t{1} << shift;
    const std::int64_t one = std::int64_t{1} << k;
    const std::int64_t n_a = std::max(1L, std::lround(std::pow(static_cast<double>(R), t - 1.0)));
    for (const Shading& y : base.entries()) {
        if (y.line().chart() != Chart::steep) throw std::invalid_argument("bundle needs steep parent lines");
        const auto rows = shaded_positions(y);
        for (std::int64_t n = 0; n < n_a; ++n) {
            const std::int64_t da = floor_div((n - n_a / 2) * R, n_a);
            const std::int64_t a = y.line().a_q() * R + da;
            if (a <= -one || a >= one) continue;
            for (std::int64_t db = -R / 2; db < R - R / 2; ++db) {
                const Line l(Chart::steep, a, y.line().b_q() * R + db, k);
                ShadingRuns child{l, runs_on_positions(l, [&](std::uint32_t p) { return static_cast<bool>(rows[p >> shift]); })};
                if (!child.runs.empty()) visit(child);
            }
        }
    }
}

LineFamily bundle_case2(const LineFamily& base, int k, double t) {
    std::vector<Shading> ys;
    stream_case2(base, k, t, [&](const ShadingRuns& r) { ys.push_back(shading_from_runs_trusted(r.line, r.runs)); });
    return LineFamily(Scale(k), std::move(ys));
}

LineFamily random_config(int k, double t, double s, double lambda, std::uint64_t seed) {
    require_k(k);
    require_t(t);
    if (!(s >= 0.0) || s > 1.0) throw std::out_of_range("s must lie in [0, 1]");
    if (!(lambda > 0.0) || lambda > 1.0) throw std::out_of_range("lambda must lie in (0, 1]");
    const std::int64_t one = std::int64_t{1} << k;
    const std::size_t target = static_cast<std::size_t>(std::max(1L, std::lround(std::exp2(k * t))));
    Rng rng(seed);
    KatzTaoGuard guard(k, t, 32.0);
    std::set<std::pair<std::int64_t, std::int64_t>> used;
    std::vector<Shading> ys;
    const std::size_t max_attempts = 50 * target + 1000;
    std::size_t attempts = 0;
    while (ys.size() < target) {
        if (++attempts > max_attempts) throw std::runtime_error("random_config: rejection sampling stalled");
        const std::int64_t a = static_cast<std::int64_t>(rng.below(2 * one + 1)) - one;
        const std::int64_t b = static_cast<std::int64_t>(rng.below(2 * one + 1)) - one / 2;
        if (used.count({a, b})) continue;
        const Line l(Chart::shallow, a, b, k);
        if (chord_length(l) < 0.5) continue;
        if (!guard.admits(a, b)) continue;
        const auto pos = best_cantor(l, s, mix_seed(seed, ys.size()));
        Rng cells(mix_seed(seed ^ 0x5A5A5A5A5A5A5A5Aull, ys.size()));
        auto y = Shading::from_tube(l, [&](Cell c) {
            return std::binary_search(pos.begin(), pos.end(), c.i) && cells.bernoulli(lambda);
        });
        if (!y) {
            // Keep one cell so the shading is nonempty.
            bool taken = false;
            y = Shading::from_tube(l, [&](Cell c) {
                if (taken || !std::binary_search(pos.begin(), pos.end(), c.i)) return false;
                return taken = true;
            });
        }
        if (!y) continue;
        guard.add(a, b);
        used.insert({a, b});
        ys.push_back(*std::move(y));
    }
    return LineFamily(Scale(k), std::move(ys));
}

LineFamily bush_config(int k, double t) {
    require_k(k);
    require_t(t);
    const std::int64_t one = std::int64_t{1} << k;
    const std::int64_t n = std::clamp<std::int64_t>(std::lround(std::exp2(k * t)), 1, one + 1);
    std::set<std::int64_t> slopes;
    for (std::int64_t m = 0; m < n; ++m) {
        // Even slopes keep b = 1/2 - a/2 on the lattice.
        const double a = n == 1 ? 0.0 : -static_cast<double>(one) + 2.0 * static_cast<double>(one) * m / (n - 1);
        slopes.insert(2 * static_cast<std::int64_t>(std::lround(a / 2.0)));
    }
    std::vector<Shading> ys;
    for (std::int64_t a : slopes) {
        if (a < -one || a > one) continue;
        const Line l(Chart::shallow, a, one / 2 - a / 2, k);
        ys.push_back(*Shading::from_tube(l, [](Cell) { return true; }));
    }
    return LineFamily(Scale(k), std::move(ys));
}

LineFamily grid_config(int k, double t) {
    require_k(k);
    require_t(t);
    const std::int64_t one = std::int64_t{1} << k;
    const std::int64_t half = std::clamp<std::int64_t>(std::lround(std::exp2(k * t) / 2.0), 1, one);
    std::vector<Shading> ys;
    for (Chart chart : {Chart::shallow, Chart::steep}) {
        std::set<std::int64_t> offsets;
        for (std::int64_t m = 0; m < half; ++m) offsets.insert((2 * m + 1) * one / (2 * half));
        for (std::int64_t b : offsets) ys.push_back(*Shading::from_tube(Line(chart, 0, b, k), [](Cell) { return true; }));
    }
    return LineFamily(Scale(k), std::move(ys));
}

LineFamily generate(const ConfigSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case ConfigKind::base: return build_base(spec.k, spec.t, spec.s, spec.seed);
        case ConfigKind::case1: return rescale_case1(build_base(spec.r_k, spec.t, spec.s, spec.seed), spec.k);
        case ConfigKind::case2: return bundle_case2(build_base(spec.r_k, spec.t, spec.s, spec.seed), spec.k, spec.t);
        case ConfigKind::random: return random_config(spec.k, spec.t, spec.s, spec.lambda, spec.seed);
        case ConfigKind::bush: return bush_config(spec.k, spec.t);
        case ConfigKind::grid: return grid_config(spec.k, spec.t);
    }
    throw std::logic_error("unknown config kind");
}

void stream_config(const ConfigSpec& spec, const std::function<void(const ShadingRuns&)>& visit) {
    spec.validate();
    if (spec.kind == ConfigKind::case2) {
        stream_case2(build_base(spec.r_k, spec.t, spec.s, spec.seed), spec.k, spec.t, visit);
        return;
    }
    const LineFamily f = generate(spec);
    for (const Shading& y : f.entries()) visit(to_runs(y));
}

}  // namespace flab
