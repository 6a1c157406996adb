#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "flab/io.h"
#include "flab/lab.h"
#include "flab/structure.h"

namespace flab {

namespace {

namespace fs = std::filesystem;

struct Options {
    std::string config;
    std::string family;
    std::string out = ".";
    std::string deltas;
    std::string kind;
    std::uint64_t seed = 0;
    double t = 0, s = 0, eps1 = 0, eps2 = 0, lambda = 0, eta = 0.1;
    int k = 0, r_k = 0;
    bool corollary = false;
};

struct Flags {
    CLI::Option* seed = nullptr;
    CLI::Option* t = nullptr;
    CLI::Option* s = nullptr;
    CLI::Option* eps1 = nullptr;
    CLI::Option* eps2 = nullptr;
    CLI::Option* lambda = nullptr;
    CLI::Option* k = nullptr;
    CLI::Option* r_k = nullptr;
};

void log(const std::string& msg) { std::cerr << "flab: " << msg << "\n"; }

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

// "2^-6,2^-8,0.00390625" -> {6, 8, 8}
std::vector<int> parse_deltas(const std::string& list) {
    std::vector<int> ks;
    std::stringstream in(list);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        tok = trim(tok);
        if (tok.rfind("2^-", 0) == 0) {
            std::size_t used = 0;
            int k = 0;
            try {
                k = std::stoi(tok.substr(3), &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != tok.size() - 3) throw std::invalid_argument("bad delta \"" + tok + "\"");
            ks.push_back(k);
        } else {
            std::size_t used = 0;
            double v = 0;
            try {
                v = std::stod(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != tok.size()) throw std::invalid_argument("bad delta \"" + tok + "\"");
            ks.push_back(dyadic_level(v));
        }
    }
    if (ks.empty()) throw std::invalid_argument("empty --deltas list");
    return ks;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

ConfigSpec build_spec(const Options& o, const Flags& f) {
    ConfigSpec spec;
    if (!o.config.empty()) spec = config_from_json(read_json(o.config));
    if (!o.kind.empty()) spec.kind = parse_kind(o.kind);
    if (f.seed->count()) spec.seed = o.seed;
    if (f.t->count()) spec.t = o.t;
    if (f.s->count()) spec.s = o.s;
    if (f.eps1->count()) spec.eps1 = o.eps1;
    if (f.eps2->count()) spec.eps2 = o.eps2;
    if (f.lambda->count()) spec.lambda = o.lambda;
    if (f.k->count()) spec.k = o.k;
    if (f.r_k->count()) spec.r_k = o.r_k;
    if (!o.deltas.empty()) spec.deltas = parse_deltas(o.deltas);
    spec.validate();
    return spec;
}

json header(const std::string& command, const ConfigSpec& spec) {
    return {{"command", command}, {"seed", spec.seed}, {"config", to_json(spec)}};
}

LineFamily load_family(const Options& o, const ConfigSpec& spec) {
    if (!o.family.empty()) return family_from_json(read_json(o.family));
    return generate(spec);
}

void write_table(const fs::path& dir, const std::vector<const TheoremReport*>& rows) {
    std::string csv = csv_header() + "\n";
    for (const TheoremReport* r : rows) csv += csv_row(*r) + "\n";
    write_file(dir / "table.csv", csv);
}

int cmd_generate(const Options& o, const ConfigSpec& spec, const fs::path& dir) {
    const LineFamily family = generate(spec);
    log("generated " + std::to_string(family.size()) + " lines at k = " + std::to_string(spec.k));
    write_file(dir / "family.json", to_json(family).dump() + "\n");
    json report = header("generate", spec);
    std::size_t cells = 0;
    for (const Shading& y : family.entries()) cells += y.cells().size();
    report["lines"] = family.size();
    report["cells"] = cells;
    write_file(dir / "report.json", report.dump(2) + "\n");
    (void)o;
    return 0;
}

int cmd_measure(const Options& o, const ConfigSpec& spec, const fs::path& dir) {
    const LineFamily family = load_family(o, spec);
    if (family.empty()) throw std::invalid_argument("empty family");
    const int k = family.scale().k();
    json report = header("measure", spec);
    report["k"] = k;
    report["lines"] = family.size();

    CellSet all(k);
    double lambda = 1.0, te = 0.0;
    for (const Shading& y : family.entries()) {
        all = set_union(all, y.cells());
        lambda = std::min(lambda, density(y));
        te = std::max(te, two_ends_constant(y, spec.eps1, spec.eps2));
    }
    report["union_mass"] = all.mass();
    report["lambda"] = lambda;
    report["two_ends_constant"] = te;
    json covering = json::array();
    for (int level = 0; level <= k; ++level) covering.push_back(covering_count(all, level));
    report["covering_counts"] = covering;

    const std::vector<Line> lines = family.lines();
    json kt = json::object();
    for (Chart chart : {Chart::shallow, Chart::steep}) {
        std::vector<Line> in_chart;
        for (const Line& l : lines) {
            if (l.chart() == chart) in_chart.push_back(l);
        }
        if (in_chart.empty()) continue;
        kt[chart == Chart::shallow ? "s" : "t"] = to_json(katz_tao_constant(PointSet::from_lines(in_chart, chart), spec.t));
    }
    report["dual_katz_tao"] = kt;
    const GammaSup g = gamma_sup(family, t_star(spec.t));
    report["gamma_star"] = to_json(g.report);
    report["gamma_line"] = g.line_index;
    report["union_frostman"] = to_json(frostman_constant(all, std::min(2.0, spec.t), std::ldexp(1.0, -k)));
    write_file(dir / "report.json", report.dump(2) + "\n");
    return 0;
}

int cmd_decompose(const Options& o, const ConfigSpec& spec, const fs::path& dir) {
    const LineFamily family = load_family(o, spec);
    if (family.empty()) throw std::invalid_argument("empty family");
    const ScaleLadder ladder = ScaleLadder::for_scale(family.scale(), 1);
    std::vector<BranchingFunction> members;
    for (const Shading& y : family.entries()) members.push_back(shading_branching(y, ladder));
    const CommonBranching common = common_branching(members);
    const MultiscalePartition p = multiscale_decompose(common.beta.values, o.eta);
    const DecompositionCheck check = verify_decomposition(common.beta.values, o.eta, p);

    const RichPoints rich = rich_point_refine(family);

    json report = header("decompose", spec);
    report["eta"] = o.eta;
    report["branching"] = to_json(common.beta);
    report["branching_lines"] = common.kept.size();
    report["partition"] = to_json(p);
    report["check"] = {{"ok", check.ok}, {"violated", check.violated}, {"detail", check.detail}};
    report["rich_points"] = {{"mu", rich.mu},
                             {"cells", rich.rich.size()},
                             {"kept_lines", rich.kept_lines.size()},
                             {"trace", to_json(rich.trace)}};
    log(rich.trace.to_text());
    write_file(dir / "report.json", report.dump(2) + "\n");
    return check.ok ? 0 : 1;
}

int cmd_verify(const Options& o, const ConfigSpec& spec, const fs::path& dir) {
    TheoremReport r;
    if (!o.family.empty()) {
        const LineFamily family = load_family(o, spec);
        r = o.corollary ? verify_corollary(family, spec.t, spec.eps1, spec.eps2)
                        : verify_theorem(family, spec.t, spec.eps1, spec.eps2);
    } else {
        r = verify_config(spec, o.corollary);
    }
    log("k = " + std::to_string(r.k) + ", ratio = " + format_double(r.ratio) + (r.flagged() ? " (flagged)" : ""));
    json report = header("verify", spec);
    report["report"] = to_json(r);
    write_file(dir / "report.json", report.dump(2) + "\n");
    write_table(dir, {&r});
    return r.flagged() ? 1 : 0;
}

int cmd_sweep(const Options& o, const ConfigSpec& spec, const fs::path& dir) {
    if (spec.deltas.empty()) throw std::invalid_argument("sweep needs --deltas or a \"deltas\" config entry");
    const SweepResult res = sweep(spec, spec.deltas, o.corollary);
    std::vector<const TheoremReport*> rows;
    for (const SweepPoint& p : res.points) {
        if (p.report) {
            rows.push_back(&*p.report);
            log("k = " + std::to_string(p.k) + ", ratio = " + format_double(p.report->ratio));
        } else {
            log("k = " + std::to_string(p.k) + " failed: " + p.error);
        }
    }
    if (res.fit) log("fitted exponent " + format_double(res.fit->slope));
    json report = header("sweep", spec);
    report["sweep"] = to_json(res);
    write_file(dir / "report.json", report.dump(2) + "\n");
    write_table(dir, rows);
    return res.partial || res.flagged ? 1 : 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"delta-discretized incidence experiments"};
    app.require_subcommand(1);
    Options o;
    Flags flags;
    struct Sub {
        const char* name;
        const char* help;
        int (*run)(const Options&, const ConfigSpec&, const fs::path&);
    };
    const Sub subs[] = {
        {"generate", "generate a configuration and write family.json", cmd_generate},
        {"measure", "measure a family: density, two-ends, Katz-Tao, gamma, covering counts", cmd_measure},
        {"decompose", "common branching, multiscale partition and rich-point trace", cmd_decompose},
        {"verify", "compare |E_L| with the lower bound", cmd_verify},
        {"sweep", "verify at several deltas and fit the ratio exponent", cmd_sweep},
    };
    std::vector<std::pair<CLI::App*, const Sub*>> apps;
    for (const Sub& sub : subs) {
        CLI::App* c = app.add_subcommand(sub.name, sub.help);
        c->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
        c->add_option("--out", o.out, "output directory");
        flags.seed = c->add_option("--seed", o.seed, "RNG seed");
        c->add_option("--deltas", o.deltas, "comma list such as 2^-6,2^-8");
        flags.t = c->add_option("--t", o.t);
        flags.s = c->add_option("--s", o.s);
        flags.eps1 = c->add_option("--eps1", o.eps1);
        flags.eps2 = c->add_option("--eps2", o.eps2);
        flags.lambda = c->add_option("--lambda", o.lambda);
        flags.k = c->add_option("--k", o.k, "delta = 2^-k");
        flags.r_k = c->add_option("--r-k", o.r_k, "r = 2^-r_k");
        c->add_option("--kind", o.kind, "base | case1 | case2 | random | bush | grid");
        if (std::string(sub.name) != "generate") c->add_option("--family", o.family, "family JSON instead of generating");
        if (std::string(sub.name) == "verify" || std::string(sub.name) == "sweep") {
            c->add_flag("--corollary", o.corollary, "shading Katz-Tao form without gamma");
        }
        if (std::string(sub.name) == "decompose") c->add_option("--eta", o.eta);
        apps.emplace_back(c, &sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, std::cout, std::cerr);
        return code == 0 ? 0 : 2;
    }

    for (auto [c, sub] : apps) {
        if (!c->parsed()) continue;
        // Each subcommand registered its own options; rebind the flag handles to the parsed one.
        flags = {c->get_option("--seed"), c->get_option("--t"),    c->get_option("--s"),      c->get_option("--eps1"),
                 c->get_option("--eps2"), c->get_option("--lambda"), c->get_option("--k"), c->get_option("--r-k")};
        try {
            const ConfigSpec spec = build_spec(o, flags);
            const fs::path dir(o.out);
            fs::create_directories(dir);
            return sub->run(o, spec, dir);
        } catch (const std::exception& e) {
            log(std::string("error: ") + e.what());
            return 2;
        }
    }
    return 2;
}

}  // namespace flab
