#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "flab/structure.h"

namespace flab {

namespace {

constexpr double kTol = 1e-12;

double interp(std::span<const double> f, double x) {
    const std::size_t n = f.size() - 1;
    const double pos = x * static_cast<double>(n);
    const auto j = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(pos))), n - 1);
    const double w = pos - static_cast<double>(j);
    return f[j] + w * (f[j + 1] - f[j]);
}

void require_profile(std::span<const double> f) {
    if (f.size() < 2) throw std::invalid_argument("profile needs at least two samples");
    const double step = 1.0 / static_cast<double>(f.size() - 1);
    if (f.front() < -kTol || f.back() > 1.0 + kTol) throw std::invalid_argument("profile must satisfy f(0) >= 0, f(1) <= 1");
    for (std::size_t i = 1; i < f.size(); ++i) {
        const double inc = f[i] - f[i - 1];
        if (inc < -kTol) throw std::invalid_argument("profile is not monotone");
        if (inc > step + 1e-9) throw std::invalid_argument("profile violates the Lipschitz bound");
    }
}

void require_eta(double eta) {
    if (!(eta > 0.0) || eta > 0.25) throw std::out_of_range("eta must lie in (0, 1/4]");
}

}  // namespace

double eta_zero(double eta) {
    require_eta(eta);
    return std::pow(eta, 2.0 / eta);
}

DecompositionCheck verify_decomposition(std::span<const double> f, double eta, const MultiscalePartition& p) {
    auto fail = [](int which, std::string what) { return DecompositionCheck{false, which, std::move(what)}; };
    if (f.size() < 2) return fail(5, "profile needs at least two samples");
    const std::size_t H = p.s.size();
    if (H == 0 || p.A.size() != H + 1) return fail(5, "breakpoint and slope counts disagree");
    if (p.A.front() != 0.0 || p.A.back() != 1.0) return fail(5, "breakpoints must run from 0 to 1");
    const double n = static_cast<double>(f.size() - 1);
    const double min_len = std::pow(eta, 2.0 / eta) / eta;

    for (std::size_t h = 0; h < H; ++h) {
        if (!(p.A[h + 1] - p.A[h] >= min_len - kTol) || !(p.A[h + 1] > p.A[h])) {
            std::ostringstream m;
            m << "block " << h << " shorter than eta0/eta";
            return fail(1, m.str());
        }
    }
    for (std::size_t h = 0; h < H; ++h) {
        const double a = p.A[h], b = p.A[h + 1];
        const double fa = interp(f, a);
        auto below = [&](double x) { return interp(f, x) < fa + p.s[h] * (x - a) - eta * (b - a) - kTol; };
        bool bad = below(b);
        for (std::size_t i = static_cast<std::size_t>(std::ceil(a * n - 1e-9)); !bad && i < f.size(); ++i) {
            const double x = static_cast<double>(i) / n;
            if (x > b + 1e-15) break;
            bad = below(x);
        }
        if (bad) {
            std::ostringstream m;
            m << "lower bound fails on block " << h;
            return fail(2, m.str());
        }
    }
    for (std::size_t h = 0; h < H; ++h) {
        const double a = p.A[h], b = p.A[h + 1];
        if (interp(f, b) > interp(f, a) + (p.s[h] + 3 * eta) * (b - a) + kTol) {
            std::ostringstream m;
            m << "upper bound fails on block " << h;
            return fail(3, m.str());
        }
    }
    for (std::size_t h = 0; h < H; ++h) {
        if (p.s[h] < -kTol || p.s[h] > 1.0 + kTol) return fail(4, "slope outside [0, 1]");
        if (h > 0 && !(p.s[h] > p.s[h - 1])) return fail(4, "slopes not strictly increasing");
    }
    if (p.s.back() < interp(f, 1.0) - interp(f, 0.0) - eta - kTol) return fail(4, "last slope below f(1) - f(0) - eta");
    return {};
}

MultiscalePartition multiscale_decompose(std::span<const double> f, double eta) {
    require_eta(eta);
    require_profile(f);
    const std::size_t n = f.size() - 1;
    const double step = 1.0 / static_cast<double>(n);

    // Lower convex hull, monotone chain.
    std::vector<std::size_t> hull;
    for (std::size_t i = 0; i <= n; ++i) {
        while (hull.size() >= 2) {
            const std::size_t a = hull[hull.size() - 2], b = hull.back();
            // Drop b if it lies on or above the segment a -> i.
            const double cross = (f[b] - f[a]) * static_cast<double>(i - a) - (f[i] - f[a]) * static_cast<double>(b - a);
            if (cross >= 0.0) {
                hull.pop_back();
            } else {
                break;
            }
        }
        hull.push_back(i);
    }
    std::vector<double> slope;
    for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
        slope.push_back((f[hull[h + 1]] - f[hull[h]]) / (static_cast<double>(hull[h + 1] - hull[h]) * step));
    }

    // Right to left: extend a block leftwards while the spread stays within eta.
    std::vector<std::size_t> cuts{hull.back()};
    std::vector<double> mins;
    std::size_t piece = slope.size();
    while (piece > 0) {
        const double top = slope[piece - 1];
        std::size_t left = piece - 1;
        while (left > 0 && top - slope[left - 1] <= eta) --left;
        mins.push_back(std::clamp(slope[left], 0.0, 1.0));
        cuts.push_back(hull[left]);
        piece = left;
    }
    std::reverse(cuts.begin(), cuts.end());
    std::reverse(mins.begin(), mins.end());

    MultiscalePartition out;
    out.eta = eta;
    for (auto c : cuts) out.A.push_back(c == n ? 1.0 : static_cast<double>(c) * step);
    out.s = std::move(mins);
    const DecompositionCheck check = verify_decomposition(f, eta, out);
    if (!check.ok) {
        std::ostringstream m;
        m << "multiscale decomposition failed constraint " << check.violated << ": " << check.detail << " (H=" << out.blocks()
          << ", eta=" << eta << ")";
        throw std::logic_error(m.str());
    }
    return out;
}

// --- shading selection --------------------------------------------------------

namespace {

std::vector<std::uint32_t> occupied_positions(const Shading& y) {
    std::vector<std::uint32_t> out;
    const auto counts = position_counts(y);
    for (std::uint32_t p = 0; p < counts.size(); ++p)
        if (counts[p] != 0) out.push_back(p);
    return out;
}

std::size_t block_count(std::span<const std::uint32_t> occupied, int shift) {
    std::size_t n = 0;
    std::uint32_t last = UINT32_MAX;
    for (auto p : occupied) {
        if ((p >> shift) != last) {
            ++n;
            last = p >> shift;
        }
    }
    return n;
}

// Every occupied block at `shift` holds at least `need` occupied blocks at `fine_shift`.
bool blocks_rich(std::span<const std::uint32_t> occupied, int shift, int fine_shift, double need) {
    std::size_t run = 0;
    std::uint32_t parent = UINT32_MAX, child = UINT32_MAX;
    for (auto p : occupied) {
        if ((p >> shift) != parent) {
            if (parent != UINT32_MAX && static_cast<double>(run) < need - 1e-9) return false;
            parent = p >> shift;
            run = 0;
            child = UINT32_MAX;
        }
        if ((p >> fine_shift) != child) {
            ++run;
            child = p >> fine_shift;
        }
    }
    return static_cast<double>(run) >= need - 1e-9;
}

}  // namespace

ShadingMultiscale shading_multiscale(const LineFamily& family, double t, double eta, const ScaleLadder& ladder) {
    if (family.empty()) throw std::invalid_argument("empty family");
    if (!(t >= 0.0) || t > 1.0) throw std::out_of_range("t must lie in [0, 1]");
    const int k = family.scale().k();
    std::vector<BranchingFunction> members;
    for (const Shading& y : family.entries()) members.push_back(shading_branching(y, ladder));
    const CommonBranching cb = common_branching(members);
    if (cb.kept.size() != family.size()) throw std::invalid_argument("family lacks a common branching function");

    ShadingMultiscale out;
    out.beta = cb.beta;
    out.partition = multiscale_decompose(cb.beta.values, eta);
    const std::size_t H = out.partition.blocks();
    const double sH = out.partition.s[H - 1];
    const int jH = static_cast<int>(std::lround(out.partition.A[H - 1] * ladder.levels()));
    const int lH = ladder.level_of(jH);

    int lr = lH;
    if (sH >= t + eta) {
        out.high_branch = true;
        out.s = sH;
    } else {
        out.high_branch = false;
        // Largest dyadic r >= delta^{A_H} whose occupied r-blocks each hold at
        // least (r / delta^{A_H})^t occupied delta^{A_H}-blocks, on every line.
        lr = 0;
        for (const Shading& y : family.entries()) {
            const auto occ = occupied_positions(y);
            int best = lH;
            for (int L = 0; L <= lH; ++L) {
                if (blocks_rich(occ, k - L, k - lH, std::exp2((lH - L) * t))) {
                    best = L;
                    break;
                }
            }
            lr = std::max(lr, best);
        }
        double acc = 0.0;
        for (const Shading& y : family.entries()) {
            const auto occ = occupied_positions(y);
            const double ratio = static_cast<double>(occ.size()) / static_cast<double>(block_count(occ, k - lr));
            acc += lr == k ? sH : std::log(ratio) / ((k - lr) * std::log(2.0));
        }
        out.s = std::clamp(acc / static_cast<double>(family.size()), 0.0, 1.0);
    }
    out.r = std::ldexp(1.0, -lr);
    for (const Shading& y : family.entries()) {
        const auto counts = position_counts(y);
        std::vector<char> block(std::size_t{1} << lr, 0);
        for (std::size_t p = 0; p < counts.size(); ++p)
            if (counts[p]) block[p >> (k - lr)] = 1;
        const Line line = y.line();
        out.coarsened.push_back(
            *Shading::from_tube(line, [&](Cell c) { return block[chart_position(line, c) >> (k - lr)] != 0; }));
    }
    return out;
}

ShadingMultiscaleCheck check_shading_multiscale(const LineFamily& family, double t, double eta,
                                                const ShadingMultiscale& result) {
    ShadingMultiscaleCheck out;
    const int k = family.scale().k();
    const int lr = dyadic_level(result.r);
    const int kd = k - lr;  // the dilate lives at scale delta / r = 2^-kd
    const double allowance = std::exp2(9.0 * eta * kd);
    for (const Shading& y : family.entries()) {
        const double g = gamma(y, t).value;
        const double gc = gamma_coarse(y, result.r, t).value;
        out.worst_gamma_ratio = std::max(out.worst_gamma_ratio, gc / g);
        if (gc > 64.0 * g) out.gamma_ok = false;

        const auto occ = occupied_positions(y);
        if (kd > 0 && result.s > 0.0) {
            std::size_t start = 0;
            while (start < occ.size()) {
                const std::uint32_t block = occ[start] >> kd;
                std::vector<std::uint32_t> local;
                std::size_t end = start;
                for (; end < occ.size() && (occ[end] >> kd) == block; ++end) local.push_back(occ[end] - (block << kd));
                const double c = frostman_constant_1d(local, kd, result.s, std::ldexp(1.0, -kd)).constant;
                out.worst_frostman = std::max(out.worst_frostman, c);
                if (c > allowance * (1.0 + 1e-9)) out.frostman_ok = false;
                start = end;
            }
        }
        const double lhs = std::log(static_cast<double>(occ.size()) / static_cast<double>(block_count(occ, kd)));
        const double rhs = (result.s + 9.0 * eta) * kd * std::log(2.0);
        if (lhs > rhs + 1e-9) out.counting_ok = false;
    }
    return out;
}

}  // namespace flab
