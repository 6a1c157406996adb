#pragma once

// Theorem verification, delta sweeps with exponent fits, and the CLI driver.
//
// For a family at delta = 2^-k the lower bound compared against |E_L| is
//   rhs_core = delta^(t eps1 / 2) * lambda^(1/2) * delta^((t-1)/2) * gamma^(-1/2) * sum |Y|
// with gamma = gamma_sup at t* = min(t, 2 - t). The corollary form drops the
// gamma factor and instead checks each shading's Katz-Tao(t*) constant.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flab/constructions.h"
#include "flab/geometry.h"

namespace flab {

inline constexpr double kHypothesisThreshold = 32.0;

struct TheoremReport {
    int k = 0;
    double delta = 0.0;
    double t = 0.0;
    double t_star = 0.0;
    double eps1 = 0.0;
    double eps2 = 0.0;
    std::size_t lines = 0;
    double lhs = 0.0;          // |E_L|
    double sum_shading = 0.0;  // sum of |Y(l)|
    double lambda = 0.0;       // min density over lines
    double gamma_star = 0.0;   // gamma_sup at t*
    double rhs_core = 0.0;
    double ratio = 0.0;
    double kt_const = 0.0;  // dual Katz-Tao(t), max over charts
    double te_const = 0.0;  // two-ends constant, max over lines
    bool corollary = false;
    double shading_kt = 0.0;  // corollary only: max Katz-Tao(t*) constant of a shading

    bool kt_ok() const { return kt_const <= kHypothesisThreshold; }
    bool te_ok() const { return te_const <= kHypothesisThreshold; }
    bool shading_ok() const { return !corollary || shading_kt <= kHypothesisThreshold; }
    bool flagged() const { return !(kt_ok() && te_ok() && shading_ok()); }
};

/// The theorem's right-hand side without the c_eps delta^eps factor; the
/// corollary form passes include_gamma = false.
double rhs_core(double delta, double t, double eps1, double lambda, double gamma, double sum_shading,
                bool include_gamma = true);

/// Streaming accumulator; add() each shading once, then finish().
class TheoremAccumulator {
public:
    TheoremAccumulator(Scale scale, double t, double eps1, double eps2, bool corollary = false);
    void add(const ShadingRuns& y);
    /// Throws std::invalid_argument if nothing was added.
    TheoremReport finish() const;

private:
    Scale scale_;
    double t_;
    double eps1_;
    double eps2_;
    bool corollary_;
    std::size_t lines_ = 0;
    std::uint64_t cells_ = 0;
    double lambda_ = 1.0;
    double gamma_ = 0.0;
    double te_ = 0.0;
    double shading_kt_ = 0.0;
    std::vector<std::array<std::int64_t, 2>> duals_[2];
    std::vector<std::uint64_t> bitmap_;  // union for k <= 13
    std::vector<std::uint64_t> keys_;    // union for k > 13
};

TheoremReport verify_theorem(const LineFamily& family, double t, double eps1, double eps2);
TheoremReport verify_corollary(const LineFamily& family, double t, double eps1, double eps2);
/// Generates the configured family (streaming case2) and verifies it.
TheoremReport verify_config(const ConfigSpec& spec, bool corollary = false);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // root mean square
};
/// Least squares y = slope x + intercept; needs two distinct x values.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

struct SweepPoint {
    int k = 0;
    std::optional<TheoremReport> report;
    std::string error;  // set when generation or verification failed
};

struct SweepResult {
    std::vector<SweepPoint> points;  // ascending k
    std::optional<LinearFit> fit;    // log2(ratio) against log2(delta)
    bool partial = false;
    bool flagged = false;
};

/// Fits log2(ratio) against log2(delta) over the successful points.
std::optional<LinearFit> fit_ratios(std::span<const SweepPoint> points);
/// Runs verify_config at each k in ks (at least three distinct values).
SweepResult sweep(const ConfigSpec& spec, std::span<const int> ks, bool corollary = false);

/// CLI entry point: generate | measure | decompose | verify | sweep.
/// Returns 0 on success, 1 on hypothesis flags or partial sweeps, 2 on errors.
int run_cli(int argc, const char* const* argv);

}  // namespace flab
