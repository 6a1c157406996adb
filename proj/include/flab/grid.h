#pragma once

// Dyadic grid primitives on the unit square.
//
// A delta-ball is modelled as an axis-aligned dyadic cell of side delta = 2^-k.
// Cell (i, j) is [i*delta, (i+1)*delta) x [j*delta, (j+1)*delta). Covering
// numbers |E|_rho count the dyadic rho-cells meeting E; every rho-ball meets at
// most 9 rho-cells and every rho-cell sits inside a rho-ball, so the count is
// within a factor 9 of the minimal ball covering.
//
// The scale ladder uses a branching base M = 2^m with delta = M^-N. This is a
// power-of-two stand-in for M = |log delta| so that the M-adic cells nest
// exactly inside the dyadic grid.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flab {

inline constexpr int kMaxLevel = 16;

/// Working resolution delta = 2^-k, 2 <= k <= kMaxLevel.
class Scale {
public:
    explicit Scale(int k);

    int k() const { return k_; }
    double delta() const;
    std::uint32_t cells_per_side() const { return std::uint32_t{1} << k_; }

    friend bool operator==(Scale, Scale) = default;

private:
    int k_;
};

/// Returns L for rho = 2^-L, throwing std::out_of_range if rho is not dyadic.
int dyadic_level(double rho);

struct Cell {
    std::uint32_t i = 0;  // column (x)
    std::uint32_t j = 0;  // row (y)

    friend bool operator==(const Cell&, const Cell&) = default;
};

inline std::uint64_t cell_key(Cell c) { return (std::uint64_t{c.j} << 32) | c.i; }
inline Cell key_cell(std::uint64_t key) {
    return Cell{static_cast<std::uint32_t>(key & 0xffffffffu), static_cast<std::uint32_t>(key >> 32)};
}

/// A set of cells at dyadic level `level` (cell side 2^-level), stored as
/// sorted row-major keys. Levels below 2 appear only as coarsening results.
class CellSet {
public:
    CellSet() = default;
    explicit CellSet(int level);
    CellSet(int level, std::vector<Cell> cells);

    /// Adopts keys that are already sorted, unique and in bounds.
    static CellSet from_sorted_keys(int level, std::vector<std::uint64_t> keys);

    int level() const { return level_; }
    double side() const;
    std::uint32_t cells_per_side() const { return std::uint32_t{1} << level_; }

    std::size_t size() const { return keys_.size(); }
    bool empty() const { return keys_.empty(); }
    /// Area #cells * side^2.
    double mass() const;

    bool contains(Cell c) const;
    Cell cell(std::size_t idx) const { return key_cell(keys_[idx]); }
    std::span<const std::uint64_t> keys() const { return keys_; }
    std::vector<Cell> cells() const;

    friend bool operator==(const CellSet&, const CellSet&) = default;

private:
    int level_ = 0;
    std::vector<std::uint64_t> keys_;
};

CellSet set_union(const CellSet& a, const CellSet& b);
CellSet set_intersection(const CellSet& a, const CellSet& b);
bool is_subset(const CellSet& sub, const CellSet& super);

/// |E|_rho with rho = 2^-rho_level: number of dyadic rho-cells meeting E.
std::size_t covering_count(const CellSet& e, int rho_level);
std::size_t covering_count(const CellSet& e, double rho);

/// (E)_rho: the rho-cells counted by covering_count, as a set at level rho_level.
CellSet coarsen(const CellSet& e, int rho_level);
CellSet coarsen(const CellSet& e, double rho);

/// The delta-cells (at E's level) covered by the cells of a coarser set.
CellSet refine_to(const CellSet& coarse, int level);

/// True iff sub is contained in super and #sub >= c * #super.
bool is_refinement(const CellSet& sub, const CellSet& super, double c);

/// M-adic ladder rho_j = M^-j, j = 0..N, with M = 2^m and delta = M^-N.
class ScaleLadder {
public:
    ScaleLadder(int log2_base, int levels);
    /// Ladder ending at `scale`; requires m to divide k.
    static ScaleLadder for_scale(Scale scale, int log2_base);

    int log2_base() const { return m_; }
    std::uint32_t base() const { return std::uint32_t{1} << m_; }
    int levels() const { return n_; }
    /// Dyadic level of rho_j.
    int level_of(int j) const { return j * m_; }
    double rho(int j) const;
    int finest_level() const { return m_ * n_; }

private:
    int m_;
    int n_;
};

// Serialization. The binary form is a 16-byte little-endian header
// ("FLAB", u16 version, u16 level, u64 cell count) followed by alternating
// u32 gap/run lengths over the row-major linear index j * side + i,
// starting with a gap.
std::vector<std::uint8_t> encode_binary(const CellSet& e);
CellSet decode_binary(std::span<const std::uint8_t> bytes);

}  // namespace flab
