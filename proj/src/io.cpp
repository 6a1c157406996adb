#include "flab/io.h"

#include <charconv>
#include <cmath>
#include <set>
#include <stdexcept>

namespace flab {

namespace {

[[noreturn]] void malformed(const std::string& what) { throw std::invalid_argument("malformed JSON: " + what); }

const json& field(const json& j, const char* key) {
    if (!j.is_object()) malformed("expected an object");
    auto it = j.find(key);
    if (it == j.end()) malformed(std::string("missing \"") + key + "\"");
    return *it;
}

template <typename T>
T integer(const json& j, const char* what) {
    if (!j.is_number_integer()) malformed(std::string(what) + " must be an integer");
    return j.get<T>();
}

double number(const json& j, const char* what) {
    if (!j.is_number()) malformed(std::string(what) + " must be a number");
    return j.get<double>();
}

int level_field(const json& j) {
    const int k = integer<int>(field(j, "k"), "k");
    if (k < 0 || k > kMaxLevel) malformed("k out of range");
    return k;
}

json cells_json(const CellSet& e) {
    json out = json::array();
    for (std::uint64_t key : e.keys()) {
        const Cell c = key_cell(key);
        out.push_back({c.i, c.j});
    }
    return out;
}

std::vector<Cell> cells_from(const json& arr, int k) {
    if (!arr.is_array()) malformed("cells must be an array");
    const std::int64_t side = std::int64_t{1} << k;
    std::vector<Cell> cells;
    cells.reserve(arr.size());
    for (const json& c : arr) {
        if (!c.is_array() || c.size() != 2) malformed("a cell is a pair [i, j]");
        const auto i = integer<std::int64_t>(c[0], "cell index");
        const auto jj = integer<std::int64_t>(c[1], "cell index");
        if (i < 0 || jj < 0 || i >= side || jj >= side) malformed("cell outside the grid");
        cells.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(jj)});
    }
    return cells;
}

json witness(std::array<double, 2> x) { return json::array({x[0], x[1]}); }

}  // namespace

json to_json(const CellSet& e) { return {{"k", e.level()}, {"cells", cells_json(e)}}; }

CellSet cellset_from_json(const json& j) {
    const int k = level_field(j);
    return CellSet(k, cells_from(field(j, "cells"), k));
}

json to_json(const LineFamily& family) {
    json lines = json::array();
    for (const Shading& y : family.entries()) {
        const Line& l = y.line();
        lines.push_back({{"chart", l.chart() == Chart::shallow ? "s" : "t"},
                         {"a_q", l.a_q()},
                         {"b_q", l.b_q()},
                         {"cells", cells_json(y.cells())}});
    }
    return {{"k", family.scale().k()}, {"lines", std::move(lines)}};
}

LineFamily family_from_json(const json& j) {
    const int k = level_field(j);
    const json& lines = field(j, "lines");
    if (!lines.is_array()) malformed("lines must be an array");
    std::vector<Shading> entries;
    entries.reserve(lines.size());
    for (const json& lj : lines) {
        const json& chart = field(lj, "chart");
        if (chart != "s" && chart != "t") malformed("chart must be \"s\" or \"t\"");
        const Line l(chart == "s" ? Chart::shallow : Chart::steep, integer<std::int64_t>(field(lj, "a_q"), "a_q"),
                     integer<std::int64_t>(field(lj, "b_q"), "b_q"), k);
        entries.emplace_back(l, CellSet(k, cells_from(field(lj, "cells"), k)));
    }
    return LineFamily(Scale(k), std::move(entries));
}

json to_json(const NonConcentrationReport& r) {
    return {{"exponent", r.exponent}, {"constant", r.constant}, {"witness_r", r.witness_r}, {"witness_x", witness(r.witness_x)}};
}

json to_json(const GammaReport& r) {
    return {{"exponent", r.exponent}, {"constant", r.value}, {"witness_r", r.witness_r}, {"witness_x", witness(r.witness_x)}};
}

json to_json(const MultiscalePartition& p) { return {{"eta", p.eta}, {"A", p.A}, {"s", p.s}}; }

MultiscalePartition partition_from_json(const json& j) {
    MultiscalePartition p;
    p.eta = number(field(j, "eta"), "eta");
    for (const char* key : {"A", "s"}) {
        const json& arr = field(j, key);
        if (!arr.is_array()) malformed(std::string(key) + " must be an array");
        auto& dst = key[0] == 'A' ? p.A : p.s;
        for (const json& v : arr) dst.push_back(number(v, key));
    }
    if (p.A.size() != p.s.size() + 1) malformed("need #A = #s + 1");
    return p;
}

json to_json(const BranchingFunction& b) {
    return {{"log2_base", b.ladder.log2_base()},
            {"levels", b.ladder.levels()},
            {"log_inv_delta", b.log_inv_delta},
            {"values", b.values},
            {"uniform", b.uniform}};
}

json to_json(const RefinementTrace& trace) {
    json steps = json::array();
    for (const TraceStep& s : trace.steps()) {
        steps.push_back({{"step", s.step}, {"kept_fraction", s.kept_fraction}, {"constant", s.constant}});
    }
    return {{"steps", std::move(steps)}, {"product", trace.product()}};
}

json to_json(const ConfigSpec& spec) {
    return {{"kind", std::string(to_string(spec.kind))},
            {"k", spec.k},
            {"r_k", spec.r_k},
            {"t", spec.t},
            {"s", spec.s},
            {"lambda", spec.lambda},
            {"seed", spec.seed},
            {"eps1", spec.eps1},
            {"eps2", spec.eps2},
            {"deltas", spec.deltas}};
}

ConfigSpec config_from_json(const json& j) {
    if (!j.is_object()) malformed("config must be an object");
    static const std::set<std::string> known{"kind", "k", "r_k", "t", "s", "lambda", "seed", "eps1", "eps2", "deltas"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) malformed("unknown config key \"" + key + "\"");
    }
    ConfigSpec spec;
    if (j.contains("kind")) {
        if (!j["kind"].is_string()) malformed("kind must be a string");
        spec.kind = parse_kind(j["kind"].get<std::string>());
    }
    if (j.contains("k")) spec.k = integer<int>(j["k"], "k");
    if (j.contains("r_k")) spec.r_k = integer<int>(j["r_k"], "r_k");
    if (j.contains("t")) spec.t = number(j["t"], "t");
    if (j.contains("s")) spec.s = number(j["s"], "s");
    if (j.contains("lambda")) spec.lambda = number(j["lambda"], "lambda");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) malformed("seed must be a non-negative integer");
        spec.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("eps1")) spec.eps1 = number(j["eps1"], "eps1");
    if (j.contains("eps2")) spec.eps2 = number(j["eps2"], "eps2");
    if (j.contains("deltas")) {
        if (!j["deltas"].is_array()) malformed("deltas must be an array of exponents k");
        for (const json& d : j["deltas"]) spec.deltas.push_back(integer<int>(d, "deltas entry"));
    }
    spec.validate();
    return spec;
}

json to_json(const TheoremReport& r) {
    json out = {{"k", r.k},
                {"delta", r.delta},
                {"t", r.t},
                {"t_star", r.t_star},
                {"eps1", r.eps1},
                {"eps2", r.eps2},
                {"lines", r.lines},
                {"lhs", r.lhs},
                {"sum_shading", r.sum_shading},
                {"lambda", r.lambda},
                {"gamma_star", r.gamma_star},
                {"rhs_core", r.rhs_core},
                {"ratio", r.ratio},
                {"kt_const", r.kt_const},
                {"te_const", r.te_const},
                {"corollary", r.corollary},
                {"flags", {{"katz_tao", !r.kt_ok()}, {"two_ends", !r.te_ok()}, {"shading", !r.shading_ok()}}},
                {"flagged", r.flagged()}};
    if (r.corollary) out["shading_kt"] = r.shading_kt;
    return out;
}

json to_json(const SweepResult& s) {
    json points = json::array();
    for (const SweepPoint& p : s.points) {
        json pj = {{"k", p.k}, {"delta", std::ldexp(1.0, -p.k)}};
        if (p.report) pj["report"] = to_json(*p.report);
        else pj["error"] = p.error;
        points.push_back(std::move(pj));
    }
    json out = {{"points", std::move(points)}, {"partial", s.partial}, {"flagged", s.flagged}};
    if (s.fit) {
        out["fit"] = {{"exponent", s.fit->slope}, {"intercept", s.fit->intercept}, {"residual", s.fit->residual}};
    } else {
        out["fit"] = nullptr;
    }
    return out;
}

std::string format_double(double x) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) throw std::logic_error("to_chars failed");
    return std::string(buf, end);
}

std::string csv_header() { return "delta,k,t,t_star,eps1,lambda,gamma_star,lhs,sum_shading,rhs_core,ratio,kt_const,te_const"; }

std::string csv_row(const TheoremReport& r) {
    std::string out = format_double(r.delta) + "," + std::to_string(r.k);
    for (double v : {r.t, r.t_star, r.eps1, r.lambda, r.gamma_star, r.lhs, r.sum_shading, r.rhs_core, r.ratio, r.kt_const,
                     r.te_const}) {
        out += ",";
        out += format_double(v);
    }
    return out;
}

}  // namespace flab
