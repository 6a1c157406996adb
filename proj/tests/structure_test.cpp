#include "flab/structure.h"

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "test_util.h"

namespace flab {
namespace {

CellSet full_grid(int level) {
    std::vector<Cell> cells;
    const std::uint32_t side = std::uint32_t{1} << level;
    for (std::uint32_t j = 0; j < side; ++j)
        for (std::uint32_t i = 0; i < side; ++i) cells.push_back({i, j});
    return CellSet(level, cells);
}

// Planar set keeping the first 2^c[j] of the M^2 children at ladder level j.
CellSet planar_cantor(const ScaleLadder& ladder, const std::vector<int>& c) {
    std::vector<Cell> cur{{0, 0}};
    const std::uint32_t M = ladder.base();
    for (int j = 0; j < ladder.levels(); ++j) {
        std::vector<Cell> next;
        for (const Cell& p : cur) {
            for (std::uint32_t n = 0; n < (1u << c[j]); ++n) {
                // Spread the kept children over the M x M block.
                const std::uint32_t slot = (n * M * M) >> c[j];
                next.push_back({p.i * M + slot % M, p.j * M + slot / M});
            }
        }
        cur = std::move(next);
    }
    return CellSet(ladder.finest_level(), cur);
}

// Chart positions keeping 2^c[j] of the M child blocks at level j, rotated by `phase`.
std::vector<std::uint32_t> line_cantor(const ScaleLadder& ladder, const std::vector<int>& c, std::uint32_t phase) {
    std::vector<std::uint32_t> cur{0};
    const std::uint32_t M = ladder.base();
    for (int j = 0; j < ladder.levels(); ++j) {
        std::vector<std::uint32_t> next;
        for (auto p : cur)
            for (std::uint32_t n = 0; n < (1u << c[j]); ++n) next.push_back(p * M + (((n * M) >> c[j]) + phase) % M);
        cur = std::move(next);
    }
    std::sort(cur.begin(), cur.end());
    return cur;
}

Shading shade_positions(const Line& l, const std::vector<std::uint32_t>& pos) {
    return *Shading::from_tube(l, [&](Cell c) { return std::binary_search(pos.begin(), pos.end(), chart_position(l, c)); });
}

TEST(Pigeonhole, Examples) {
    const std::vector<double> w{1, 2, 3};
    const std::vector<int> same{4, 4, 4};
    const auto all = dyadic_pigeonhole(w, same);
    EXPECT_EQ(all.kept.size(), 3u);
    EXPECT_EQ(all.level, 4);

    const std::vector<double> w2{90, 10};
    const std::vector<int> two{1, 2};
    const auto big = dyadic_pigeonhole(w2, two);
    EXPECT_EQ(big.level, 1);
    EXPECT_DOUBLE_EQ(big.kept_weight, 90);

    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> ws;
        std::vector<int> ls;
        const std::size_t n = 1 + rng() % 50;
        for (std::size_t m = 0; m < n; ++m) {
            ws.push_back(1.0 + static_cast<double>(rng() % 100));
            ls.push_back(static_cast<int>(rng() % 6));
        }
        const auto ph = dyadic_pigeonhole(ws, ls);
        EXPECT_GE(ph.kept_weight * static_cast<double>(ph.occupied_levels), ph.total_weight - 1e-9);
        for (auto idx : ph.kept) EXPECT_EQ(ls[idx], ph.level);
    }
    EXPECT_THROW(dyadic_pigeonhole(std::vector<double>{}, std::vector<int>{}), std::invalid_argument);
    EXPECT_EQ(dyadic_class(1.0), 0);
    EXPECT_EQ(dyadic_class(7.0), 2);
    EXPECT_EQ(dyadic_class(8.0), 3);
}

TEST(Uniformize, Examples) {
    const auto ladder = ScaleLadder::for_scale(Scale(8), 2);
    const CellSet full = full_grid(8);
    const auto u = uniformize(full, ladder);
    EXPECT_EQ(u.set, full);
    EXPECT_DOUBLE_EQ(u.constant, 1.0);
    EXPECT_TRUE(is_uniform(full, ladder, 1.0));

    const CellSet one(8, {{17, 200}});
    EXPECT_EQ(uniformize(one, ladder).set, one);
    EXPECT_THROW(uniformize(CellSet(8), ladder), std::invalid_argument);
    EXPECT_THROW(uniformize(one, ScaleLadder::for_scale(Scale(6), 2)), std::invalid_argument);
}

TEST(Uniformize, RandomSetsPassChecker) {
    const auto ladder = ScaleLadder::for_scale(Scale(8), 2);
    std::mt19937_64 rng(8);
    int non_uniform_inputs = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const CellSet e = trial % 2 ? testing::random_cells(rng, 8, 32768)
                                    : testing::random_clustered(rng, 8, 1 + rng() % 6, 1 + rng() % 3000);
        non_uniform_inputs += !is_uniform(e, ladder, 2.0);
        const auto u = uniformize(e, ladder);
        EXPECT_TRUE(is_uniform(u.set, ladder, 2.0));
        EXPECT_LE(u.constant, 2.0);
        EXPECT_TRUE(is_subset(u.set, e));
        const double kept = static_cast<double>(u.set.size()) / static_cast<double>(e.size());
        EXPECT_GE(kept, u.kept_lower_bound * (1 - 1e-12));
        EXPECT_GE(u.kept_lower_bound, std::pow(1.0 / 5.0, 4) * (1 - 1e-12));
        EXPECT_NEAR(u.trace.product(), kept, 1e-12);
    }
    EXPECT_GT(non_uniform_inputs, 25);
}

TEST(Branching, Examples) {
    const auto ladder = ScaleLadder::for_scale(Scale(8), 2);
    const auto full = branching(full_grid(8), ladder);
    for (int j = 0; j <= 4; ++j) EXPECT_NEAR(full.values[j], 2.0 * j * 2 / 8, 1e-12);
    EXPECT_TRUE(full.uniform);

    const auto one = branching(CellSet(8, {{3, 3}}), ladder);
    for (double v : one.values) EXPECT_DOUBLE_EQ(v, 0.0);

    for (int c = 0; c <= 4; ++c) {
        const CellSet e = planar_cantor(ladder, std::vector<int>(4, c));
        const auto b = branching(e, ladder);
        EXPECT_TRUE(b.uniform);
        // s = c / m with m = 2: beta(j) = s j log M / |log delta|.
        for (int j = 0; j <= 4; ++j) EXPECT_NEAR(b.values[j], c * j / 8.0, 1.0 / 4);
        EXPECT_NEAR(b.at(0.5), b.values[2], 1e-12);
        EXPECT_NEAR(b.at(0.625), 0.5 * (b.values[2] + b.values[3]), 1e-12);
    }
}

TEST(Branching, InvariantsOnRandomUniformSets) {
    const auto ladder = ScaleLadder::for_scale(Scale(12), 3);
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const CellSet e = uniformize(testing::random_clustered(rng, 12, 3, 2000), ladder).set;
        const auto b = branching(e, ladder);
        EXPECT_DOUBLE_EQ(b.values[0], 0.0);
        for (int j = 0; j < ladder.levels(); ++j) {
            EXPECT_GE(b.values[j + 1], b.values[j]);
            EXPECT_LE(b.values[j + 1] - b.values[j], 2 * 3.0 / 12 + 1e-12);
        }
    }
}

TEST(CommonBranching, Examples) {
    const auto ladder = ScaleLadder::for_scale(Scale(8), 2);
    const CellSet a = planar_cantor(ladder, {1, 1, 1, 1});
    const CellSet b = planar_cantor(ladder, {3, 3, 3, 3});
    const std::vector<CellSet> same(5, a);
    EXPECT_EQ(common_branching(same, ladder).kept.size(), 5u);

    std::vector<CellSet> mixed;
    for (int n = 0; n < 10; ++n) mixed.push_back(n % 10 < 7 ? a : b);
    const auto cb = common_branching(mixed, ladder);
    EXPECT_EQ(cb.kept.size(), 7u);
    for (auto idx : cb.kept) EXPECT_EQ(mixed[idx], a);

    std::mt19937_64 rng(9);
    std::vector<CellSet> rnd;
    for (int n = 0; n < 40; ++n) rnd.push_back(uniformize(testing::random_clustered(rng, 8, 2, 300), ladder).set);
    const auto r = common_branching(rnd, ladder);
    EXPECT_GE(static_cast<double>(r.kept.size()), std::pow(2 * std::log(4.0), -4) * 40);
    for (auto idx : r.kept) {
        const auto bi = branching(rnd[idx], ladder);
        for (std::size_t j = 0; j < bi.values.size(); ++j)
            EXPECT_LE(std::abs(bi.values[j] - r.beta.values[j]), 1.0 / (8 * std::log(2.0)) + 1e-12);
    }
}

std::vector<double> sample(int n, double (*f)(double)) {
    std::vector<double> out;
    for (int i = 0; i <= n; ++i) out.push_back(f(static_cast<double>(i) / n));
    return out;
}

TEST(Multiscale, Examples) {
    const auto id = sample(64, [](double x) { return x; });
    const auto p = multiscale_decompose(id, 0.1);
    ASSERT_EQ(p.blocks(), 1u);
    EXPECT_GE(p.s[0], 0.9);

    const auto zero = sample(64, [](double) { return 0.0; });
    const auto z = multiscale_decompose(zero, 0.1);
    ASSERT_EQ(z.blocks(), 1u);
    EXPECT_DOUBLE_EQ(z.s[0], 0.0);

    const auto hinge = sample(64, [](double x) { return std::max(0.0, x - 0.5); });
    const auto h = multiscale_decompose(hinge, 0.05);
    ASSERT_EQ(h.blocks(), 2u);
    EXPECT_NEAR(h.s[0], 0.0, 1e-12);
    EXPECT_NEAR(h.s[1], 1.0, 1e-12);
    EXPECT_NEAR(h.A[1], 0.5, 1e-12);
    EXPECT_TRUE(verify_decomposition(hinge, 0.05, h).ok);
}

TEST(Multiscale, Errors) {
    const std::vector<double> down{0.0, 0.2, 0.1};
    EXPECT_THROW(multiscale_decompose(down, 0.1), std::invalid_argument);
    const std::vector<double> steep{0.0, 0.9, 1.0};
    EXPECT_THROW(multiscale_decompose(steep, 0.1), std::invalid_argument);
    const std::vector<double> ok{0.0, 0.5, 1.0};
    EXPECT_THROW(multiscale_decompose(ok, 0.0), std::out_of_range);
    EXPECT_THROW(multiscale_decompose(ok, 0.3), std::out_of_range);
}

TEST(Multiscale, VerifierCatchesViolations) {
    const auto id = sample(16, [](double x) { return x; });
    MultiscalePartition short_block{0.25, {0.0, 0.5, 0.5 + 1e-7, 1.0}, {0.5, 0.6, 0.99}};
    EXPECT_EQ(verify_decomposition(id, 0.25, short_block).violated, 1);
    MultiscalePartition flat{0.1, {0.0, 0.5, 1.0}, {0.95, 0.9}};
    EXPECT_EQ(verify_decomposition(id, 0.1, flat).violated, 4);
    MultiscalePartition low{0.1, {0.0, 1.0}, {0.5}};
    EXPECT_EQ(verify_decomposition(id, 0.1, low).violated, 3);
    MultiscalePartition high{0.1, {0.0, 1.0}, {1.0}};
    const auto hinge = sample(16, [](double x) { return std::max(0.0, x - 0.5); });
    EXPECT_EQ(verify_decomposition(hinge, 0.1, high).violated, 2);
}

// Random non-decreasing 1-Lipschitz piecewise-linear profiles.
std::vector<double> random_profile(std::mt19937_64& rng, int n) {
    std::vector<double> f{0.0};
    const int pieces = 1 + static_cast<int>(rng() % 8);
    std::vector<double> slopes;
    for (int p = 0; p < pieces; ++p) slopes.push_back(static_cast<double>(rng() % 1001) / 1000.0);
    const double start = static_cast<double>(rng() % 200) / 1000.0;
    f[0] = start * (1.0 - 0.0);
    for (int i = 1; i <= n; ++i) {
        const int piece = (i - 1) * pieces / n;
        f.push_back(f.back() + slopes[piece] / n);
    }
    const double top = f.back();
    if (top > 1.0) for (double& v : f) v -= (top - 1.0);
    for (double& v : f) v = std::max(v, 0.0);
    return f;
}

TEST(Multiscale, RandomProfilesPassAllConstraints) {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 200; ++trial) {
        const auto f = random_profile(rng, 16 + static_cast<int>(rng() % 240));
        for (double eta : {0.05, 0.1, 0.2}) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto p = multiscale_decompose(f, eta);
            const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            const auto check = verify_decomposition(f, eta, p);
            EXPECT_TRUE(check.ok) << check.detail;
            EXPECT_LT(ms, 50.0);
        }
    }
}

TEST(TwoEndsScale, Examples) {
    const int k = 10;
    const Line l(Chart::shallow, 0, 512, k);
    const auto single = *Shading::from_tube(l, [](Cell c) { return c.i == 300 && c.j == 512; });
    const auto s = two_ends_scale(single, 0.1, 1.0);
    EXPECT_TRUE(s.found);
    EXPECT_DOUBLE_EQ(s.rho, std::ldexp(1.0, -k));

    const auto full = *Shading::from_tube(l, [](Cell) { return true; });
    const auto f = two_ends_scale(full, 0.1, 1.0);
    EXPECT_FALSE(f.found);
    EXPECT_DOUBLE_EQ(f.rho, 1.0);

    const auto ends = *Shading::from_tube(l, [](Cell c) { return (c.i == 0 || c.i == 1023) && c.j == 512; });
    const auto e = two_ends_scale(ends, 0.2, 1.0);
    // The first scale tried is delta, where 2 < delta^-0.2 = 4.
    EXPECT_TRUE(e.found);
    EXPECT_DOUBLE_EQ(e.rho, std::ldexp(1.0, -k));
    EXPECT_EQ(e.count, 2u);
    EXPECT_THROW(two_ends_scale(ends, 1.0, 1.0), std::out_of_range);
}

TEST(TwoEndsScale, AboveDeltaToTheEps1ForTwoEndsShadings) {
    std::mt19937_64 rng(71);
    int checked = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 8 + trial % 5;
        const std::int64_t one = std::int64_t{1} << k;
        const Line l(Chart::shallow, static_cast<std::int64_t>(rng() % one) - one / 2, one / 2, k);
        const double eps1 = 0.2 + 0.6 * static_cast<double>(rng() % 100) / 100.0;
        const double eps2 = eps1 * (0.2 + 0.7 * static_cast<double>(rng() % 100) / 100.0);
        const double v = eps2 * 0.9;
        const std::uint32_t clusters = 1 + static_cast<std::uint32_t>(rng() % 6);
        const std::uint32_t width = 1 + static_cast<std::uint32_t>(rng() % (one / 8));
        std::vector<std::uint32_t> starts;
        for (std::uint32_t c = 0; c < clusters; ++c) starts.push_back(static_cast<std::uint32_t>(rng() % one));
        auto y = Shading::from_tube(l, [&](Cell c) {
            for (auto s : starts)
                if (c.i >= s && c.i < s + width) return true;
            return false;
        });
        if (!y) continue;
        const double C = std::max(1.0, two_ends_constant(*y, eps1, eps2));
        const auto rho = two_ends_scale(*y, v, C);
        EXPECT_GE(rho.rho, std::pow(std::ldexp(1.0, -k), eps1)) << "trial " << trial;
        ++checked;
    }
    EXPECT_EQ(checked, 50);
}

TEST(KatzTaoSubsample, Examples) {
    const int k = 10;
    // Already rho-separated and Katz-Tao at rho: unchanged up to relabeling.
    std::vector<std::array<std::int64_t, 2>> sparse;
    for (std::int64_t n = 0; n < 4; ++n) sparse.push_back({n * 256, 512});
    const PointSet e(k, sparse);
    const auto out = katz_tao_subsample(e, 0.25, 1.0);
    EXPECT_EQ(out.size(), 4u);
    EXPECT_EQ(out.k(), 2);

    std::vector<std::array<std::int64_t, 2>> row;
    for (std::int64_t n = 0; n < 1024; ++n) row.push_back({n, 300});
    const PointSet line(k, row);
    const auto sub = katz_tao_subsample(line, 0.25, 1.0);
    EXPECT_EQ(sub.size(), 4u);
    const double delta = std::ldexp(1.0, -k);
    EXPECT_GE(0.25 * sub.size(), std::pow(k * std::log(2.0), -2) * delta * line.size());
    EXPECT_LE(katz_tao_constant(sub, 1.0).constant, 16.0);

    const PointSet single(k, {{{5, 7}}});
    EXPECT_EQ(katz_tao_subsample(single, 0.5, 1.0).size(), 1u);
    EXPECT_THROW(katz_tao_subsample(single, 1.0, 1.0), std::out_of_range);
}

TEST(KatzTaoSubsample, OutputIsKatzTaoAndLarge) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 40; ++trial) {
        const int k = 8 + trial % 3;
        const double s = 0.5 + static_cast<double>(trial % 4) * 0.4;
        // Random set thinned to a Katz-Tao (delta, s, C) set with small C.
        std::vector<std::array<std::int64_t, 2>> pts;
        for (int n = 0; n < 3000; ++n)
            pts.push_back({static_cast<std::int64_t>(rng() % (1u << k)), static_cast<std::int64_t>(rng() % (1u << k))});
        // Greedy thinning: keep points while the constant stays <= 4.
        std::vector<std::array<std::int64_t, 2>> kept;
        for (const auto& p : pts) {
            kept.push_back(p);
            if (kept.size() % 50 == 0 && katz_tao_constant(PointSet(k, kept), s).constant > 4.0) {
                kept.resize(kept.size() - 50);
                break;
            }
        }
        if (kept.empty()) kept.push_back(pts.front());
        const PointSet e(k, kept);
        const double C = katz_tao_constant(e, s).constant;
        const double delta = std::ldexp(1.0, -k);
        for (int lr = 1; lr < k; lr += 2) {
            const double rho = std::ldexp(1.0, -lr);
            const auto out = katz_tao_subsample(e, rho, s);
            EXPECT_LE(katz_tao_constant(out, s).constant, 16.0);
            const double kappa = std::pow(rho, s) * out.size() / (std::pow(delta, s) * e.size());
            EXPECT_GE(kappa, std::pow(k * std::log(2.0), -2)) << "C=" << C;
        }
    }
}

LineFamily bush(int k, int count, std::uint32_t cx, std::uint32_t cy) {
    // Lines through the centre of cell (cx, cy), slopes in [-1, 1].
    const std::int64_t one = std::int64_t{1} << k;
    std::vector<Shading> ys;
    for (int n = 0; n < count; ++n) {
        const std::int64_t a = -one + (2 * one * n) / (count - 1);
        // b = y - a x with x, y the cell centre; rounded to the lattice.
        const double b = (cy + 0.5) / one - static_cast<double>(a) / one * (cx + 0.5) / one;
        const Line l(Chart::shallow, a, std::llround(b * one), k);
        auto y = Shading::from_tube(l, [](Cell) { return true; });
        if (y) ys.push_back(*y);
    }
    return LineFamily(Scale(k), std::move(ys));
}

void check_rich_points(const LineFamily& f, const RichPoints& rp) {
    const double slack = std::pow(f.scale().k() * std::log(2.0), 2.0);
    ASSERT_FALSE(rp.family.empty());
    const IncidenceIndex idx(rp.family);
    double incidences = 0;
    for (std::size_t n = 0; n < rp.family.size(); ++n) {
        const Shading& y = rp.family[n];
        const Shading& orig = f[rp.kept_lines[n]];
        EXPECT_EQ(y.line(), orig.line());
        EXPECT_TRUE(is_subset(y.cells(), orig.cells()));                        // (1)
        EXPECT_EQ(y.cells(), set_intersection(orig.cells(), rp.rich));          // (3)
        incidences += static_cast<double>(y.cells().size());
    }
    for (const auto& [key, m] : idx.multiplicities()) {                          // (2)
        EXPECT_GE(m, rp.mu);
        EXPECT_LT(m, 2 * rp.mu);
    }
    const double union_size = static_cast<double>(union_shadings(rp.family).size());
    EXPECT_GE(rp.mu, incidences / (union_size * slack));                          // (4)
    double total = 0;
    for (const Shading& y : f.entries()) total += static_cast<double>(y.cells().size());
    EXPECT_GE(incidences / total, 1.0 / slack);
    EXPECT_NEAR(rp.trace.product(), incidences / total, 1e-12);
}

TEST(RichPoints, Examples) {
    const Line l(Chart::shallow, 3, 40, 7);
    const LineFamily single(Scale(7), {*Shading::from_tube(l, [](Cell c) { return c.i % 3 == 0; })});
    const auto rp = rich_point_refine(single);
    EXPECT_EQ(rp.mu, 1u);
    EXPECT_EQ(rp.rich, single[0].cells());
    check_rich_points(single, rp);

    const LineFamily b = bush(8, 16, 128, 128);
    const auto rb = rich_point_refine(b);
    check_rich_points(b, rb);
    EXPECT_TRUE(rb.mu == 1 || rb.mu >= 8);

    // Two disjoint pencils of different sizes: the heavier one's class wins.
    std::vector<Shading> two;
    const LineFamily p1 = bush(8, 12, 64, 64), p2 = bush(8, 3, 200, 200);
    for (const Shading& y : p1.entries()) two.push_back(y);
    for (const Shading& y : p2.entries()) two.push_back(y);
    std::sort(two.begin(), two.end(), [](const Shading& x, const Shading& y) { return x.line() < y.line(); });
    two.erase(std::unique(two.begin(), two.end(), [](const Shading& x, const Shading& y) { return x.line() == y.line(); }),
              two.end());
    const LineFamily pencils(Scale(8), two);
    check_rich_points(pencils, rich_point_refine(pencils));
    EXPECT_THROW(rich_point_refine(LineFamily(Scale(4), {})), std::invalid_argument);
}

TEST(RichPoints, RandomFamilies) {
    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 6 + trial % 3;
        const std::int64_t one = std::int64_t{1} << k;
        std::vector<Shading> ys;
        std::set<std::pair<std::int64_t, std::int64_t>> seen;
        const int lines = 5 + static_cast<int>(rng() % 40);
        for (int n = 0; n < lines; ++n) {
            const std::int64_t a = static_cast<std::int64_t>(rng() % (2 * one + 1)) - one;
            const std::int64_t b = static_cast<std::int64_t>(rng() % one);
            if (!seen.emplace(a, b).second) continue;
            const Line l(rng() % 2 ? Chart::shallow : Chart::steep, std::clamp<std::int64_t>(a, -one + 1, one - 1), b, k);
            const std::uint64_t salt = rng();
            auto y = Shading::from_tube(l, [&](Cell c) { return ((cell_key(c) ^ salt) * 0x9E3779B97F4A7C15ull) >> 62 != 0; });
            if (y) ys.push_back(*y);
        }
        std::sort(ys.begin(), ys.end(), [](const Shading& x, const Shading& y) { return x.line() < y.line(); });
        ys.erase(std::unique(ys.begin(), ys.end(), [](const Shading& x, const Shading& y) { return x.line() == y.line(); }),
                 ys.end());
        const LineFamily f(Scale(k), ys);
        check_rich_points(f, rich_point_refine(f));
    }
}

TEST(RichPoints, LiteralTubeFormOnFullTubes) {
    // With full tubes, Y(l) cap E^mu equals E^mu cap N_delta(l).
    const LineFamily b = bush(8, 16, 128, 128);
    const auto rp = rich_point_refine(b);
    for (std::size_t n = 0; n < rp.family.size(); ++n) {
        const Line& l = rp.family[n].line();
        EXPECT_EQ(rp.family[n].cells(), set_intersection(rp.rich, tube_cells(l, std::ldexp(1.0, -8))));
    }
}

void check_broad_narrow(const LineFamily& f, Cell x, const BroadNarrow& bn) {
    const double delta = f.scale().delta();
    const double slack = std::pow(f.scale().k() * std::log(2.0), 2.0);
    const auto through = multiplicity(f, x);
    EXPECT_GE(bn.rho, 10 * delta - 1e-15);
    EXPECT_LE(bn.rho, 1.0);
    EXPECT_LE(bn.K, 32.0);
    EXPECT_GE(bn.narrow.size() * slack, static_cast<double>(through.size()));
    for (auto a : bn.narrow)
        for (auto b : bn.narrow) EXPECT_LE(angle_between(f[a].line(), f[b].line()) + delta, 2 * bn.rho + 1e-12);
    EXPECT_GE(bn.first.size() * slack, static_cast<double>(bn.narrow.size()));
    EXPECT_GE(bn.second.size() * slack, static_cast<double>(bn.narrow.size()));
    for (auto a : bn.first)
        for (auto b : bn.second) {
            const double ang = angle_between(f[a].line(), f[b].line());
            EXPECT_GE(ang + delta, bn.rho / bn.K - 1e-12);
            EXPECT_LE(ang, bn.rho + 1e-12);
        }
}

TEST(BroadNarrow, TwoLines) {
    const int k = 9;
    const Line a(Chart::shallow, 0, 256, k), b(Chart::shallow, 64, 256 - 32, k);
    const LineFamily f(Scale(k), {*Shading::from_tube(a, [](Cell) { return true; }),
                                  *Shading::from_tube(b, [](Cell) { return true; })});
    const Cell x{256, 255};
    const auto bn = broad_narrow(f, x);
    EXPECT_NEAR(bn.rho, std::atan(0.125) + std::ldexp(1.0, -k), 1e-12);
    EXPECT_EQ(bn.first.size(), 1u);
    EXPECT_EQ(bn.second.size(), 1u);
    check_broad_narrow(f, x, bn);
    EXPECT_THROW(broad_narrow(f, Cell{0, 255}), std::invalid_argument);
}

TEST(BroadNarrow, SpreadAndNarrowPencils) {
    const int k = 9;
    const LineFamily spread = bush(k, 32, 256, 256);
    const auto bs = broad_narrow(spread, {256, 256});
    EXPECT_GE(bs.rho, 0.25);
    check_broad_narrow(spread, {256, 256}, bs);

    // Pencil with slopes within theta0 of 1/4.
    const std::int64_t one = 1 << k;
    std::vector<Shading> ys;
    for (int n = 0; n < 20; ++n) {
        const std::int64_t a = one / 4 + n;
        const double b = 0.5 - static_cast<double>(a) / one * 0.5;
        ys.push_back(*Shading::from_tube(Line(Chart::shallow, a, std::llround(b * one), k), [](Cell) { return true; }));
    }
    const LineFamily narrow(Scale(k), ys);
    const Cell x{256, 256};
    const auto bn = broad_narrow(narrow, x);
    double theta0 = 0;
    for (const auto& y : narrow.entries()) theta0 = std::max(theta0, angle_between(y.line(), narrow[0].line()));
    EXPECT_LE(bn.rho, 2 * theta0 + 10 * std::ldexp(1.0, -k));
    check_broad_narrow(narrow, x, bn);
}

LineFamily cantor_family(int k, const ScaleLadder& ladder, const std::vector<int>& c, int lines) {
    const std::int64_t one = std::int64_t{1} << k;
    std::vector<Shading> ys;
    for (int n = 0; n < lines; ++n) {
        // Slopes in [-1/8, 1/8) through the centre, so every chord spans all columns.
        const std::int64_t a = -one / 8 + n * (one / 4) / lines;
        const Line l(Chart::shallow, a, one / 2 - a / 2, k);
        ys.push_back(shade_positions(l, line_cantor(ladder, c, static_cast<std::uint32_t>(n))));
    }
    return LineFamily(Scale(k), ys);
}

TEST(ShadingMultiscale, FullShadings) {
    const int k = 10;
    const auto ladder = ScaleLadder::for_scale(Scale(k), 2);
    const auto f = cantor_family(k, ladder, {2, 2, 2, 2, 2}, 6);
    const auto res = shading_multiscale(f, 0.5, 0.1, ladder);
    EXPECT_TRUE(res.high_branch);
    EXPECT_NEAR(res.s, 1.0, 1e-9);
    const auto check = check_shading_multiscale(f, 0.5, 0.1, res);
    EXPECT_TRUE(check.gamma_ok);
    EXPECT_TRUE(check.frostman_ok);
    EXPECT_TRUE(check.counting_ok);
}

TEST(ShadingMultiscale, CantorHighBranch) {
    const int k = 12;
    const auto ladder = ScaleLadder::for_scale(Scale(k), 2);
    // Sparse at coarse scales, full at fine ones: s_H = 1 > t + eta.
    const auto f = cantor_family(k, ladder, {0, 1, 0, 1, 2, 2}, 8);
    for (double t : {0.25, 0.5}) {
        const auto res = shading_multiscale(f, t, 0.1, ladder);
        EXPECT_TRUE(res.high_branch);
        EXPECT_GE(res.s, t + 0.1);
        EXPECT_EQ(res.coarsened.size(), f.size());
        const auto check = check_shading_multiscale(f, t, 0.1, res);
        EXPECT_TRUE(check.gamma_ok) << check.worst_gamma_ratio;
        EXPECT_TRUE(check.frostman_ok) << check.worst_frostman;
        EXPECT_TRUE(check.counting_ok);
    }
}

TEST(ShadingMultiscale, ConcentratedLowBranch) {
    const int k = 12;
    const auto ladder = ScaleLadder::for_scale(Scale(k), 2);
    // Full at coarse scales, one child per block at fine scales.
    const auto f = cantor_family(k, ladder, {2, 2, 2, 0, 0, 0}, 8);
    const double t = 0.5, eta = 0.1;
    const auto res = shading_multiscale(f, t, eta, ladder);
    EXPECT_FALSE(res.high_branch);
    const auto check = check_shading_multiscale(f, t, eta, res);
    EXPECT_TRUE(check.gamma_ok) << check.worst_gamma_ratio;
    EXPECT_TRUE(check.frostman_ok) << check.worst_frostman;
    EXPECT_TRUE(check.counting_ok);
    for (const Shading& y : res.coarsened) EXPECT_LE(gamma_coarse(y, res.r, t).value, 64.0);
}

TEST(ShadingMultiscale, RequiresCommonBranching) {
    const int k = 10;
    const auto ladder = ScaleLadder::for_scale(Scale(k), 2);
    std::vector<Shading> ys;
    ys.push_back(cantor_family(k, ladder, {2, 2, 2, 2, 2}, 1)[0]);
    ys.push_back(shade_positions(Line(Chart::shallow, 5, 300, k), line_cantor(ladder, {0, 0, 0, 0, 0}, 0)));
    EXPECT_THROW(shading_multiscale(LineFamily(Scale(k), ys), 0.5, 0.1, ladder), std::invalid_argument);
}

TEST(Trace, TextAndProduct) {
    RefinementTrace t;
    t.add("a", 0.5);
    t.add("b", 0.25, 3.0);
    EXPECT_DOUBLE_EQ(t.product(), 0.125);
    EXPECT_NE(t.to_text().find("overall kept=0.125"), std::string::npos);
    EXPECT_THROW(t.add("c", 0.0), std::logic_error);
}

}  // namespace
}  // namespace flab
