#include "flab/grid.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iterator>

namespace flab {

Scale::Scale(int k) : k_(k) {
    if (k < 2 || k > kMaxLevel) {
        throw std::out_of_range("scale exponent k must lie in [2, " + std::to_string(kMaxLevel) + "], got " +
                                std::to_string(k));
    }
}

double Scale::delta() const { return std::ldexp(1.0, -k_); }

int dyadic_level(double rho) {
    if (!(rho > 0.0) || rho > 1.0) throw std::out_of_range("scale must lie in (0, 1]");
    int exp = 0;
    const double mant = std::frexp(rho, &exp);
    if (mant != 0.5) throw std::out_of_range("scale is not dyadic");
    const int level = 1 - exp;
    if (level > kMaxLevel) throw std::out_of_range("scale finer than the maximum grid level");
    return level;
}

CellSet::CellSet(int level) : level_(level) {
    if (level < 0 || level > kMaxLevel) throw std::out_of_range("cell level out of range");
}

CellSet::CellSet(int level, std::vector<Cell> cells) : CellSet(level) {
    const std::uint32_t n = cells_per_side();
    keys_.reserve(cells.size());
    for (const Cell& c : cells) {
        if (c.i >= n || c.j >= n) throw std::out_of_range("cell outside the unit square");
        keys_.push_back(cell_key(c));
    }
    std::sort(keys_.begin(), keys_.end());
    keys_.erase(std::unique(keys_.begin(), keys_.end()), keys_.end());
}

CellSet CellSet::from_sorted_keys(int level, std::vector<std::uint64_t> keys) {
    CellSet out(level);
    out.keys_ = std::move(keys);
    return out;
}

double CellSet::side() const { return std::ldexp(1.0, -level_); }

double CellSet::mass() const { return static_cast<double>(keys_.size()) * std::ldexp(1.0, -2 * level_); }

bool CellSet::contains(Cell c) const { return std::binary_search(keys_.begin(), keys_.end(), cell_key(c)); }

std::vector<Cell> CellSet::cells() const {
    std::vector<Cell> out;
    out.reserve(keys_.size());
    for (auto k : keys_) out.push_back(key_cell(k));
    return out;
}

namespace {

void require_same_level(const CellSet& a, const CellSet& b) {
    if (a.level() != b.level()) throw std::invalid_argument("cell sets live at different scales");
}

void require_range(const CellSet& e, int rho_level) {
    if (rho_level < 0 || rho_level > e.level()) {
        throw std::out_of_range("covering scale must satisfy delta <= rho <= 1");
    }
}

std::vector<std::uint64_t> coarse_keys(const CellSet& e, int rho_level) {
    const int shift = e.level() - rho_level;
    std::vector<std::uint64_t> out;
    out.reserve(e.size());
    for (auto key : e.keys()) {
        const Cell c = key_cell(key);
        out.push_back(cell_key(Cell{c.i >> shift, c.j >> shift}));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

CellSet set_union(const CellSet& a, const CellSet& b) {
    require_same_level(a, b);
    std::vector<std::uint64_t> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.keys().begin(), a.keys().end(), b.keys().begin(), b.keys().end(), std::back_inserter(out));
    return CellSet::from_sorted_keys(a.level(), std::move(out));
}

CellSet set_intersection(const CellSet& a, const CellSet& b) {
    require_same_level(a, b);
    std::vector<std::uint64_t> out;
    std::set_intersection(a.keys().begin(), a.keys().end(), b.keys().begin(), b.keys().end(),
                          std::back_inserter(out));
    return CellSet::from_sorted_keys(a.level(), std::move(out));
}

bool is_subset(const CellSet& sub, const CellSet& super) {
    require_same_level(sub, super);
    return std::includes(super.keys().begin(), super.keys().end(), sub.keys().begin(), sub.keys().end());
}

std::size_t covering_count(const CellSet& e, int rho_level) {
    if (e.empty()) throw std::invalid_argument("empty set has no covering number");
    require_range(e, rho_level);
    if (rho_level == e.level()) return e.size();
    return coarse_keys(e, rho_level).size();
}

std::size_t covering_count(const CellSet& e, double rho) { return covering_count(e, dyadic_level(rho)); }

CellSet coarsen(const CellSet& e, int rho_level) {
    require_range(e, rho_level);
    return CellSet::from_sorted_keys(rho_level, coarse_keys(e, rho_level));
}

CellSet coarsen(const CellSet& e, double rho) { return coarsen(e, dyadic_level(rho)); }

CellSet refine_to(const CellSet& coarse, int level) {
    if (level < coarse.level() || level > kMaxLevel) throw std::out_of_range("refinement level out of range");
    const int shift = level - coarse.level();
    const std::uint32_t per = std::uint32_t{1} << shift;
    std::vector<std::uint64_t> out;
    out.reserve(coarse.size() * per * per);
    for (auto key : coarse.keys()) {
        const Cell c = key_cell(key);
        for (std::uint32_t dj = 0; dj < per; ++dj) {
            for (std::uint32_t di = 0; di < per; ++di) {
                out.push_back(cell_key(Cell{(c.i << shift) + di, (c.j << shift) + dj}));
            }
        }
    }
    std::sort(out.begin(), out.end());
    return CellSet::from_sorted_keys(level, std::move(out));
}

bool is_refinement(const CellSet& sub, const CellSet& super, double c) {
    require_same_level(sub, super);
    if (!(c > 0.0) || c > 1.0) throw std::out_of_range("refinement fraction must lie in (0, 1]");
    return is_subset(sub, super) && static_cast<double>(sub.size()) >= c * static_cast<double>(super.size());
}

ScaleLadder::ScaleLadder(int log2_base, int levels) : m_(log2_base), n_(levels) {
    if (m_ < 1) throw std::out_of_range("ladder base must be at least 2");
    if (n_ < 1 || m_ * n_ > kMaxLevel) throw std::out_of_range("ladder depth out of range");
}

ScaleLadder ScaleLadder::for_scale(Scale scale, int log2_base) {
    if (log2_base < 1 || scale.k() % log2_base != 0) {
        throw std::invalid_argument("ladder base 2^m must satisfy M^N = 2^k");
    }
    return ScaleLadder(log2_base, scale.k() / log2_base);
}

double ScaleLadder::rho(int j) const {
    if (j < 0 || j > n_) throw std::out_of_range("ladder index out of range");
    return std::ldexp(1.0, -j * m_);
}

// --- binary form ---------------------------------------------------------

namespace {

constexpr std::uint16_t kBinaryVersion = 1;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
    for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw std::runtime_error("truncated cell set stream");
    T v = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) v |= static_cast<T>(static_cast<T>(in[pos + b]) << (8 * b));
    pos += sizeof(T);
    return v;
}

std::uint64_t linear_index(std::uint64_t key, std::uint32_t side) {
    const Cell c = key_cell(key);
    return std::uint64_t{c.j} * side + c.i;
}

}  // namespace

std::vector<std::uint8_t> encode_binary(const CellSet& e) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'F', 'L', 'A', 'B'});
    put_le<std::uint16_t>(out, kBinaryVersion);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(e.level()));
    put_le<std::uint64_t>(out, e.size());

    const std::uint32_t side = e.cells_per_side();
    std::uint64_t cursor = 0;
    std::size_t idx = 0;
    const auto keys = e.keys();
    while (idx < keys.size()) {
        const std::uint64_t start = linear_index(keys[idx], side);
        std::uint64_t len = 1;
        while (idx + len < keys.size() && linear_index(keys[idx + len], side) == start + len) ++len;
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(start - cursor));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(len));
        cursor = start + len;
        idx += len;
    }
    return out;
}

CellSet decode_binary(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), "FLAB", 4) != 0) {
        throw std::runtime_error("not a FLAB cell set stream");
    }
    std::size_t pos = 4;
    const auto version = get_le<std::uint16_t>(bytes, pos);
    if (version != kBinaryVersion) throw std::runtime_error("unsupported FLAB version");
    const auto level = get_le<std::uint16_t>(bytes, pos);
    const auto count = get_le<std::uint64_t>(bytes, pos);
    CellSet probe(level);
    const std::uint32_t side = probe.cells_per_side();
    const std::uint64_t total = std::uint64_t{side} * side;

    std::vector<std::uint64_t> keys;
    keys.reserve(count);
    std::uint64_t cursor = 0;
    while (keys.size() < count) {
        const std::uint64_t gap = get_le<std::uint32_t>(bytes, pos);
        const std::uint64_t run = get_le<std::uint32_t>(bytes, pos);
        if (run == 0 || (gap == 0 && cursor != 0)) throw std::runtime_error("non-canonical run encoding");
        cursor += gap;
        if (cursor + run > total || keys.size() + run > count) throw std::runtime_error("run exceeds grid");
        for (std::uint64_t r = 0; r < run; ++r, ++cursor) {
            keys.push_back(cell_key(Cell{static_cast<std::uint32_t>(cursor % side),
                                         static_cast<std::uint32_t>(cursor / side)}));
        }
    }
    if (pos != bytes.size()) throw std::runtime_error("trailing bytes after cell set stream");
    return CellSet::from_sorted_keys(level, std::move(keys));
}

}  // namespace flab
