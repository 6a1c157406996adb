#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "flab/structure.h"

namespace flab {

void RefinementTrace::add(std::string step, double kept_fraction, double constant) {
    if (!(kept_fraction > 0.0) || kept_fraction > 1.0) throw std::logic_error("kept fraction outside (0, 1]");
    steps_.push_back(TraceStep{std::move(step), kept_fraction, constant});
}

double RefinementTrace::product() const {
    double p = 1.0;
    for (const TraceStep& s : steps_) p *= s.kept_fraction;
    return p;
}

std::string RefinementTrace::to_text() const {
    std::ostringstream out;
    for (std::size_t n = 0; n < steps_.size(); ++n) {
        out << n << "  " << steps_[n].step << "  kept=" << steps_[n].kept_fraction << "  C=" << steps_[n].constant
            << "\n";
    }
    out << "overall kept=" << product() << "\n";
    return out.str();
}

int dyadic_class(double value) {
    if (!(value >= 1.0)) throw std::out_of_range("dyadic class needs a value >= 1");
    int exp = 0;
    std::frexp(value, &exp);
    return exp - 1;
}

Pigeonhole dyadic_pigeonhole(std::span<const double> weights, std::span<const int> levels) {
    if (weights.empty()) throw std::invalid_argument("pigeonhole over no items");
    if (weights.size() != levels.size()) throw std::invalid_argument("weights and levels differ in length");
    std::map<int, double> mass;
    Pigeonhole out;
    for (std::size_t n = 0; n < weights.size(); ++n) {
        if (!(weights[n] > 0.0)) throw std::invalid_argument("pigeonhole weights must be positive");
        mass[levels[n]] += weights[n];
        out.total_weight += weights[n];
    }
    out.occupied_levels = mass.size();
    double best = -1.0;
    for (const auto& [level, m] : mass) {
        if (m > best) {
            best = m;
            out.level = level;
        }
    }
    for (std::size_t n = 0; n < weights.size(); ++n) {
        if (levels[n] == out.level) {
            out.kept.push_back(n);
            out.kept_weight += weights[n];
        }
    }
    return out;
}

namespace {

void require_ladder(const CellSet& e, const ScaleLadder& ladder) {
    if (ladder.finest_level() != e.level()) throw std::invalid_argument("ladder does not end at the set's scale");
}

std::uint64_t shift_key(std::uint64_t key, int shift) {
    const Cell c = key_cell(key);
    return cell_key(Cell{c.i >> shift, c.j >> shift});
}

// (parent key, number of occupied children) for cells of `keys` (at level
// `fine`), with parents at level lp and children at level lc.
std::vector<std::pair<std::uint64_t, std::uint32_t>> child_counts(std::span<const std::uint64_t> keys, int fine, int lp,
                                                                   int lc) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> pc;
    pc.reserve(keys.size());
    for (auto key : keys) pc.emplace_back(shift_key(key, fine - lp), shift_key(key, fine - lc));
    std::sort(pc.begin(), pc.end());
    pc.erase(std::unique(pc.begin(), pc.end()), pc.end());
    std::vector<std::pair<std::uint64_t, std::uint32_t>> out;
    for (const auto& [p, c] : pc) {
        if (!out.empty() && out.back().first == p) {
            ++out.back().second;
        } else {
            out.emplace_back(p, 1);
        }
    }
    return out;
}

}  // namespace

Uniformized uniformize(const CellSet& e, const ScaleLadder& ladder) {
    if (e.empty()) throw std::invalid_argument("cannot uniformize an empty set");
    require_ladder(e, ladder);
    const int k = e.level();
    std::vector<std::uint64_t> cur(e.keys().begin(), e.keys().end());
    Uniformized out;
    for (int j = ladder.levels() - 1; j >= 0; --j) {
        const int lp = ladder.level_of(j);
        const int lc = ladder.level_of(j + 1);
        const auto counts = child_counts(cur, k, lp, lc);

        std::vector<std::pair<std::uint64_t, double>> mass;  // parent -> fine cells
        for (auto key : cur) {
            const auto p = shift_key(key, k - lp);
            if (!mass.empty() && mass.back().first == p) {
                mass.back().second += 1.0;
            } else {
                mass.emplace_back(p, 1.0);
            }
        }
        std::sort(mass.begin(), mass.end());
        // Merge parents split across rows.
        std::vector<std::pair<std::uint64_t, double>> merged;
        for (const auto& [p, m] : mass) {
            if (!merged.empty() && merged.back().first == p) {
                merged.back().second += m;
            } else {
                merged.emplace_back(p, m);
            }
        }

        std::vector<double> weights;
        std::vector<int> classes;
        for (std::size_t n = 0; n < counts.size(); ++n) {
            weights.push_back(merged[n].second);
            classes.push_back(dyadic_class(counts[n].second));
        }
        const Pigeonhole ph = dyadic_pigeonhole(weights, classes);
        std::vector<std::uint64_t> keep_parents;
        std::uint32_t lo = UINT32_MAX, hi = 0;
        for (auto n : ph.kept) {
            keep_parents.push_back(counts[n].first);
            lo = std::min(lo, counts[n].second);
            hi = std::max(hi, counts[n].second);
        }
        std::vector<std::uint64_t> next;
        for (auto key : cur) {
            if (std::binary_search(keep_parents.begin(), keep_parents.end(), shift_key(key, k - lp))) next.push_back(key);
        }
        const double c = static_cast<double>(hi) / static_cast<double>(lo);
        out.constant = std::max(out.constant, c);
        out.kept_lower_bound /= static_cast<double>(ph.occupied_levels);
        std::ostringstream label;
        label << "level " << j << " class " << ph.level << " of " << ph.occupied_levels;
        out.trace.add(label.str(), static_cast<double>(next.size()) / static_cast<double>(cur.size()), c);
        cur = std::move(next);
    }
    out.set = CellSet::from_sorted_keys(k, std::move(cur));
    return out;
}

bool is_uniform(const CellSet& e, const ScaleLadder& ladder, double C) {
    require_ladder(e, ladder);
    if (e.empty()) return true;
    for (int j = 0; j < ladder.levels(); ++j) {
        const auto counts = child_counts(e.keys(), e.level(), ladder.level_of(j), ladder.level_of(j + 1));
        std::uint32_t lo = UINT32_MAX, hi = 0;
        for (const auto& [p, c] : counts) {
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        if (static_cast<double>(hi) > C * static_cast<double>(lo)) return false;
    }
    return true;
}

double BranchingFunction::at(double x) const {
    if (!(x >= 0.0) || x > 1.0) throw std::out_of_range("branching argument outside [0, 1]");
    const double pos = x * static_cast<double>(values.size() - 1);
    const auto j = std::min(static_cast<std::size_t>(pos), values.size() - 2);
    const double f = pos - static_cast<double>(j);
    return values[j] + f * (values[j + 1] - values[j]);
}

BranchingFunction branching(const CellSet& e, const ScaleLadder& ladder) {
    if (e.empty()) throw std::invalid_argument("branching of an empty set");
    require_ladder(e, ladder);
    BranchingFunction b{ladder, e.level() * std::log(2.0), {}, is_uniform(e, ladder, 2.0)};
    for (int j = 0; j <= ladder.levels(); ++j) {
        b.values.push_back(std::log(static_cast<double>(covering_count(e, ladder.level_of(j)))) / b.log_inv_delta);
    }
    return b;
}

BranchingFunction shading_branching(const Shading& y, const ScaleLadder& ladder) {
    const int k = y.line().k();
    if (ladder.finest_level() != k) throw std::invalid_argument("ladder does not end at the shading's scale");
    std::vector<std::uint32_t> occupied;
    const auto counts = position_counts(y);
    for (std::uint32_t p = 0; p < counts.size(); ++p)
        if (counts[p] != 0) occupied.push_back(p);

    BranchingFunction b{ladder, k * std::log(2.0), {}, true};
    std::vector<std::size_t> blocks_per_level;
    for (int j = 0; j <= ladder.levels(); ++j) {
        const int shift = k - ladder.level_of(j);
        std::size_t n = 0;
        std::uint32_t last = UINT32_MAX;
        for (auto p : occupied) {
            if ((p >> shift) != last) {
                ++n;
                last = p >> shift;
            }
        }
        b.values.push_back(std::log(static_cast<double>(n)) / b.log_inv_delta);
    }
    // One-dimensional uniformity check with C = 2.
    for (int j = 0; j < ladder.levels() && b.uniform; ++j) {
        const int ps = k - ladder.level_of(j);
        const int cs = k - ladder.level_of(j + 1);
        std::map<std::uint32_t, std::uint32_t> per;
        std::uint32_t last = UINT32_MAX;
        for (auto p : occupied) {
            if ((p >> cs) != last) {
                ++per[p >> ps];
                last = p >> cs;
            }
        }
        std::uint32_t lo = UINT32_MAX, hi = 0;
        for (const auto& [parent, c] : per) {
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        b.uniform = hi <= 2 * lo;
    }
    return b;
}

CommonBranching common_branching(std::span<const BranchingFunction> members) {
    if (members.empty()) throw std::invalid_argument("common branching of an empty family");
    const std::size_t len = members[0].values.size();
    std::map<std::vector<long>, std::vector<std::size_t>> buckets;
    for (std::size_t n = 0; n < members.size(); ++n) {
        const BranchingFunction& b = members[n];
        if (b.values.size() != len || b.log_inv_delta != members[0].log_inv_delta) {
            throw std::invalid_argument("branching functions on different ladders");
        }
        std::vector<long> key;
        for (double v : b.values) key.push_back(static_cast<long>(std::floor(v * b.log_inv_delta + 1e-9)));
        buckets[key].push_back(n);
    }
    const std::vector<std::size_t>* best = nullptr;
    for (const auto& [key, idx] : buckets) {
        if (best == nullptr || idx.size() > best->size()) best = &idx;
    }
    CommonBranching out{*best, members[0]};
    out.beta.values.assign(len, 0.0);
    out.beta.uniform = true;
    for (auto n : out.kept) {
        for (std::size_t j = 0; j < len; ++j) out.beta.values[j] += members[n].values[j];
        out.beta.uniform = out.beta.uniform && members[n].uniform;
    }
    for (double& v : out.beta.values) v /= static_cast<double>(out.kept.size());
    return out;
}

CommonBranching common_branching(std::span<const CellSet> family, const ScaleLadder& ladder) {
    std::vector<BranchingFunction> members;
    for (const CellSet& e : family) members.push_back(branching(e, ladder));
    return common_branching(members);
}

}  // namespace flab
