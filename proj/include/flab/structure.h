#pragma once

// Uniformization, branching functions, the multiscale decomposition of a
// Lipschitz profile, and the refinement procedures on line families.
//
// Every "up to poly-log" conclusion is instantiated with an explicit
// (ln 1/delta)^2 slack so that outputs can be checked mechanically.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flab/geometry.h"
#include "flab/grid.h"
#include "flab/measures.h"

namespace flab {

// --- refinement audit trail -------------------------------------------------

struct TraceStep {
    std::string step;
    double kept_fraction = 1.0;
    double constant = 1.0;
};

class RefinementTrace {
public:
    void add(std::string step, double kept_fraction, double constant = 1.0);
    std::span<const TraceStep> steps() const { return steps_; }
    /// Product of the kept fractions.
    double product() const;
    std::string to_text() const;

private:
    std::vector<TraceStep> steps_;
};

// --- dyadic pigeonhole ------------------------------------------------------

/// floor(log2(value)) for value >= 1, the dyadic class used for counts.
int dyadic_class(double value);

struct Pigeonhole {
    int level = 0;
    std::vector<std::size_t> kept;  // indices, increasing
    double kept_weight = 0.0;
    double total_weight = 0.0;
    std::size_t occupied_levels = 0;
};

/// Groups items by level and keeps the level of largest total weight
/// (smallest level on ties).
Pigeonhole dyadic_pigeonhole(std::span<const double> weights, std::span<const int> levels);

// --- uniform sets -------------------------------------------------------------

struct Uniformized {
    CellSet set;
    /// max over levels of (largest child count) / (smallest child count).
    double constant = 1.0;
    /// Guaranteed lower bound on #set / #E from the per-level class counts.
    double kept_lower_bound = 1.0;
    RefinementTrace trace;
};

/// Bottom-up uniformization: at each ladder level the parents are sorted into
/// dyadic classes of occupied-child count, the class holding the most cells is
/// kept, and the other parents are removed with their subtrees.
Uniformized uniformize(const CellSet& e, const ScaleLadder& ladder);

/// Per level, max child count <= C * min child count over occupied parents.
bool is_uniform(const CellSet& e, const ScaleLadder& ladder, double C);

struct BranchingFunction {
    ScaleLadder ladder{1, 1};
    double log_inv_delta = 1.0;
    std::vector<double> values;  // beta(j), j = 0..N
    bool uniform = true;         // whether the source passed the C = 2 checker

    /// Piecewise-linear interpolation at x in [0, 1], x = j / N.
    double at(double x) const;
};

/// beta(j) = ln |E|_{rho_j} / ln(1/delta).
BranchingFunction branching(const CellSet& e, const ScaleLadder& ladder);

/// One-dimensional branching of a shading along its line: ln of the number of
/// occupied rho_j-blocks of chart positions over ln(1/delta).
BranchingFunction shading_branching(const Shading& y, const ScaleLadder& ladder);

struct CommonBranching {
    std::vector<std::size_t> kept;
    BranchingFunction beta;
};

/// Buckets each member by floor(beta(j) ln(1/delta)) for every j and keeps the
/// largest bucket; the returned beta is the mean over the bucket.
CommonBranching common_branching(std::span<const BranchingFunction> members);
CommonBranching common_branching(std::span<const CellSet> family, const ScaleLadder& ladder);

// --- multiscale decomposition ---------------------------------------------------

struct MultiscalePartition {
    double eta = 0.0;
    std::vector<double> A;  // 0 = A_1 < ... < A_{H+1} = 1
    std::vector<double> s;  // s_1 < ... < s_H

    std::size_t blocks() const { return s.size(); }
};

/// eta_0 = eta^(2 / eta).
double eta_zero(double eta);

struct DecompositionCheck {
    bool ok = true;
    int violated = 0;  // 1..4, or 5 for a malformed partition
    std::string detail;
};

/// Samples f(i / n), i = 0..n, of a non-decreasing 1-Lipschitz profile.
DecompositionCheck verify_decomposition(std::span<const double> f, double eta, const MultiscalePartition& p);

/// Greatest convex minorant of the samples, then right-to-left merging of hull
/// pieces while the slope spread stays within eta; s_h is the smallest slope
/// in block h. The result is validated before it is returned.
MultiscalePartition multiscale_decompose(std::span<const double> f, double eta);

// --- two-ends reduction ---------------------------------------------------------

struct TwoEndsScale {
    double rho = 1.0;
    std::size_t count = 0;  // |Y|_rho, or 0 when no scale qualifies
    bool found = false;
};

/// Smallest dyadic r in [delta, 1] with |Y|_r < r^-v / C, |Y|_r the segment
/// cover count; rho = 1 when none qualifies.
TwoEndsScale two_ends_scale(const Shading& y, double v, double C);

// --- Katz-Tao subsampling ---------------------------------------------------------

/// Keeps one point per rho-cell, then trims every dyadic r-cell (r >= rho) to
/// at most (r/rho)^s surviving points, bottom-up.
PointSet katz_tao_subsample(const PointSet& e, double rho, double s);

// --- rich points ------------------------------------------------------------------

struct RichPoints {
    LineFamily family;
    CellSet rich;  // E^mu
    std::uint32_t mu = 1;
    std::vector<std::size_t> kept_lines;  // indices into the input family
    RefinementTrace trace;
};

/// Pigeonholes the cells of E_{L,Y} on the dyadic class of their multiplicity,
/// weighting by incidences, sets Y'(l) = Y(l) cap E^mu and drops emptied
/// lines; repeated up to twice.
RichPoints rich_point_refine(const LineFamily& family);

// --- broad / narrow ---------------------------------------------------------------

struct BroadNarrow {
    double rho = 1.0;
    std::vector<std::size_t> narrow;  // L'(x), indices into the family
    std::vector<std::size_t> first;   // L1
    std::vector<std::size_t> second;  // L2
    double K = 32.0;
};

/// Selects a scale rho_x and two direction clusters at x whose cross angles
/// lie in [rho_x / K, rho_x].
BroadNarrow broad_narrow(const LineFamily& family, Cell x);

// --- shading multiscale selection -------------------------------------------------

struct ShadingMultiscale {
    double r = 1.0;
    double s = 0.0;
    bool high_branch = true;  // s_H >= t + eta
    MultiscalePartition partition;
    BranchingFunction beta;
    std::vector<Shading> coarsened;  // (Y(l))_r
};

ShadingMultiscale shading_multiscale(const LineFamily& family, double t, double eta, const ScaleLadder& ladder);

struct ShadingMultiscaleCheck {
    bool gamma_ok = true;     // gamma of the r-coarsening <= 64 gamma(Y)
    bool frostman_ok = true;  // dilates are (delta/r, s, (delta/r)^(-9 eta))-sets
    bool counting_ok = true;  // log_{1/delta}(|Y|_delta / |Y|_r) <= (s + 9 eta) log_{1/delta}(r / delta)
    double worst_gamma_ratio = 0.0;
    double worst_frostman = 0.0;
};

ShadingMultiscaleCheck check_shading_multiscale(const LineFamily& family, double t, double eta,
                                                const ShadingMultiscale& result);

}  // namespace flab
