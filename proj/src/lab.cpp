#include "flab/lab.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "flab/measures.h"

namespace flab {

namespace {

void require_params(double t, double eps1, double eps2) {
    if (!(t > 0.0) || t >= 2.0) throw std::out_of_range("t must lie in (0, 2)");
    if (!(eps2 > 0.0 && eps2 < eps1 && eps1 < 1.0)) throw std::out_of_range("need 0 < eps2 < eps1 < 1");
}

constexpr int kBitmapMaxLevel = 13;

}  // namespace

double rhs_core(double delta, double t, double eps1, double lambda, double gamma, double sum_shading,
                bool include_gamma) {
    double v = std::pow(delta, t * eps1 / 2.0) * std::sqrt(lambda) * std::pow(delta, (t - 1.0) / 2.0);
    if (include_gamma) v /= std::sqrt(gamma);
    return v * sum_shading;
}

TheoremAccumulator::TheoremAccumulator(Scale scale, double t, double eps1, double eps2, bool corollary)
    : scale_(scale), t_(t), eps1_(eps1), eps2_(eps2), corollary_(corollary) {
    require_params(t, eps1, eps2);
    if (scale.k() <= kBitmapMaxLevel) bitmap_.assign((std::size_t{1} << (2 * scale.k())) / 64 + 1, 0);
}

void TheoremAccumulator::add(const ShadingRuns& y) {
    const int k = scale_.k();
    if (y.line.k() != k) throw std::invalid_argument("shading scale differs from the family scale");
    const std::size_t cells = y.cell_count();
    if (cells == 0) throw std::invalid_argument("a shading must be nonempty");

    std::size_t tube = 0;
    for (const TubeColumn& col : tube_columns(y.line, scale_.delta())) tube += col.hi - col.lo + 1;
    lambda_ = std::min(lambda_, static_cast<double>(cells) / static_cast<double>(tube));

    const auto counts = y.counts();
    gamma_ = std::max(gamma_, gamma_profile(counts, k, y.line, t_star(t_)).value);
    te_ = std::max(te_, two_ends_constant(counts, k, eps1_, eps2_));
    duals_[y.line.chart() == Chart::shallow ? 0 : 1].push_back({y.line.a_q(), y.line.b_q()});

    if (!bitmap_.empty()) {
        y.for_each_cell([&](Cell c) {
            const std::uint64_t idx = (std::uint64_t{c.j} << k) | c.i;
            bitmap_[idx >> 6] |= std::uint64_t{1} << (idx & 63);
        });
    } else {
        y.for_each_cell([&](Cell c) { keys_.push_back(cell_key(c)); });
    }

    if (corollary_) {
        std::vector<std::array<std::int64_t, 2>> pts;
        pts.reserve(cells);
        y.for_each_cell([&](Cell c) { pts.push_back({c.i, c.j}); });
        shading_kt_ = std::max(shading_kt_, katz_tao_constant(PointSet(k, std::move(pts)), t_star(t_)).constant);
    }
    cells_ += cells;
    ++lines_;
}

TheoremReport TheoremAccumulator::finish() const {
    if (lines_ == 0) throw std::invalid_argument("empty family");
    const double delta = scale_.delta();
    const double cell_area = delta * delta;

    std::uint64_t union_count = 0;
    if (!bitmap_.empty()) {
        for (auto w : bitmap_) union_count += static_cast<std::uint64_t>(std::popcount(w));
    } else {
        std::vector<std::uint64_t> keys = keys_;
        std::sort(keys.begin(), keys.end());
        union_count = static_cast<std::uint64_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
    }

    TheoremReport r;
    r.k = scale_.k();
    r.delta = delta;
    r.t = t_;
    r.t_star = t_star(t_);
    r.eps1 = eps1_;
    r.eps2 = eps2_;
    r.lines = lines_;
    r.lhs = static_cast<double>(union_count) * cell_area;
    r.sum_shading = static_cast<double>(cells_) * cell_area;
    r.lambda = lambda_;
    r.gamma_star = gamma_;
    r.corollary = corollary_;
    r.shading_kt = shading_kt_;
    r.rhs_core = rhs_core(delta, t_, eps1_, lambda_, gamma_, r.sum_shading, !corollary_);
    r.ratio = r.lhs / r.rhs_core;
    for (const auto& d : duals_)
        if (!d.empty()) r.kt_const = std::max(r.kt_const, katz_tao_constant(PointSet(scale_.k(), d), t_).constant);
    r.te_const = te_;
    return r;
}

namespace {

TheoremReport verify_family(const LineFamily& family, double t, double eps1, double eps2, bool corollary) {
    require_params(t, eps1, eps2);
    if (family.empty()) throw std::invalid_argument("empty family");
    TheoremAccumulator acc(family.scale(), t, eps1, eps2, corollary);
    for (const Shading& y : family.entries()) acc.add(to_runs(y));
    return acc.finish();
}

}  // namespace

TheoremReport verify_theorem(const LineFamily& family, double t, double eps1, double eps2) {
    return verify_family(family, t, eps1, eps2, false);
}

TheoremReport verify_corollary(const LineFamily& family, double t, double eps1, double eps2) {
    return verify_family(family, t, eps1, eps2, true);
}

TheoremReport verify_config(const ConfigSpec& spec, bool corollary) {
    spec.validate();
    TheoremAccumulator acc(Scale(spec.k), spec.t, spec.eps1, spec.eps2, corollary);
    stream_config(spec, [&](const ShadingRuns& y) { acc.add(y); });
    return acc.finish();
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("least squares needs matching samples, at least two");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("least squares needs two distinct x values");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (fit.slope * x[i] + fit.intercept);
        ss += e * e;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

std::optional<LinearFit> fit_ratios(std::span<const SweepPoint> points) {
    std::vector<std::pair<int, double>> ok;
    for (const auto& p : points)
        if (p.report) ok.emplace_back(p.k, std::log2(p.report->ratio));
    std::sort(ok.begin(), ok.end());
    if (ok.size() < 2) return std::nullopt;
    std::vector<double> x, y;
    for (const auto& [k, lr] : ok) {
        x.push_back(-static_cast<double>(k));
        y.push_back(lr);
    }
    return least_squares(x, y);
}

SweepResult sweep(const ConfigSpec& spec, std::span<const int> ks, bool corollary) {
    std::vector<int> sorted(ks.begin(), ks.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (sorted.size() < 3) throw std::invalid_argument("a sweep needs at least three distinct scales");
    SweepResult out;
    for (int k : sorted) {
        SweepPoint p;
        p.k = k;
        try {
            p.report = verify_config(spec.at_scale(k), corollary);
            out.flagged = out.flagged || p.report->flagged();
        } catch (const std::exception& e) {
            p.error = e.what();
            out.partial = true;
        }
        out.points.push_back(std::move(p));
    }
    out.fit = fit_ratios(out.points);
    return out;
}

}  // namespace flab
