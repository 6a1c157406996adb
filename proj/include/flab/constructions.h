#pragma once

// Generators: the two sharpness constructions built from a base family at an
// intermediate scale r, plus random, bush and grid test configurations.
//
// The base family uses steep-chart lines x = a y + b, so "transverse to the
// horizontal axis" holds by construction and rows are the chart positions.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "flab/geometry.h"

namespace flab {

enum class ConfigKind { base, case1, case2, random, bush, grid };

std::string_view to_string(ConfigKind kind);
/// Throws std::invalid_argument on an unknown name.
ConfigKind parse_kind(std::string_view name);

struct ConfigSpec {
    ConfigKind kind = ConfigKind::base;
    int k = 8;          // delta = 2^-k
    int r_k = 4;        // r = 2^-r_k, used by case1 / case2
    double t = 1.0;     // line-family exponent, (0, 2)
    double s = 1.0;     // shading exponent, [0, 1]
    double lambda = 1.0;
    std::uint64_t seed = 1;
    double eps1 = 0.1;
    double eps2 = 0.05;
    std::vector<int> deltas;  // sweep exponents k

    /// Throws std::out_of_range / std::invalid_argument on bad parameters.
    void validate() const;
    /// Copy with k replaced.
    ConfigSpec at_scale(int k_new) const;
};

// Seeded helpers on std::mt19937_64; std distributions are avoided so output
// does not depend on the standard library build.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    std::uint64_t next() { return gen_(); }
    /// Uniform in [0, n), n > 0.
    std::uint64_t below(std::uint64_t n);
    /// Uniform in [0, 1) with 53 random bits.
    double unit();
    bool bernoulli(double p) { return unit() < p; }

private:
    std::mt19937_64 gen_;
};

/// Independent stream seed from a base seed and a stream index (splitmix64).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Positions in 0..2^k-1 of a binary Cantor set: level j splits both children
/// when floor(s j) > floor(s (j-1)) and keeps one seeded child otherwise, so
/// there are 2^floor(s k) positions.
std::vector<std::uint32_t> cantor_positions(int k, double s, std::uint64_t seed);

/// Base family at scale r = 2^-r_k: about r^-t steep lines on a spread grid of
/// dual points, each shaded on the tube cells of a Cantor(s) set of rows.
/// Accepts t in (0, 2]; near t = 2 the dual box saturates and duplicates merge.
LineFamily build_base(int r_k, double t, double s, std::uint64_t seed);

/// Case 1: horizontal delta/r compression. Each line keeps its quantized
/// coefficients at the finer scale 2^-k; the shading keeps the delta-tube
/// cells whose row lies under a shaded row of the parent.
LineFamily rescale_case1(const LineFamily& base, int k);
/// The inverse map back to scale 2^-r_k.
LineFamily inverse_rescale_case1(const LineFamily& fine, int r_k);

/// Case 2: each parent r-tube is replaced by a bundle of about (r/delta)^t
/// delta-lines, offsets db in [-r/2, r/2) at spacing delta times
/// round((r/delta)^(t-1)) offsets da in [-r/2, r/2). Children are shaded on the
/// rows under the parent's shaded rows. Children are visited parent by parent.
void stream_case2(const LineFamily& base, int k, double t, const std::function<void(const ShadingRuns&)>& visit);
LineFamily bundle_case2(const LineFamily& base, int k, double t);
/// Number of children stream_case2 would generate per parent, before dropping empty shadings.
std::size_t case2_bundle_size(int r_k, int k, double t);

/// Random configuration: max(1, round(delta^-t)) shallow lines with chord at
/// least 1/2, rejection-sampled to a dual Katz-Tao(t) constant <= 32, each
/// shaded by Bernoulli(lambda) cells at the columns of a Cantor(s) set.
/// Throws std::runtime_error when sampling stalls.
LineFamily random_config(int k, double t, double s, double lambda, std::uint64_t seed);

/// Lines through the centre of the square at about delta^-t evenly spread
/// slopes (capped at one per lattice slope), fully shaded.
LineFamily bush_config(int k, double t);
/// Horizontal and vertical lines, about delta^-t in total, fully shaded.
LineFamily grid_config(int k, double t);

/// The family described by a spec at its scale spec.k.
LineFamily generate(const ConfigSpec& spec);
/// Visits the same shadings as generate(spec) without materializing case2.
void stream_config(const ConfigSpec& spec, const std::function<void(const ShadingRuns&)>& visit);

}  // namespace flab
