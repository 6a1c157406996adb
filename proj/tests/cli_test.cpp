#include "flab/lab.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "flab/io.h"

namespace flab {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("flab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(std::vector<std::string> args) {
        args.insert(args.begin(), "flab");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        return run_cli(static_cast<int>(argv.size()), argv.data());
    }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(path(name)) << text;
        return path(name);
    }
    static std::string slurp(const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path dir_;
};

TEST_F(Cli, VerifyValidConfig) {
    const std::string c = write("c.json", R"({"kind": "random", "k": 6, "t": 1.0, "lambda": 0.5, "seed": 3})");
    EXPECT_EQ(run({"verify", "--config", c, "--out", path("o")}), 0);
    const json report = json::parse(slurp(path("o/report.json")));
    EXPECT_EQ(report["seed"], 3);
    EXPECT_EQ(report["config"]["kind"], "random");
    EXPECT_FALSE(report["report"]["flagged"].get<bool>());
    const std::string csv = slurp(path("o/table.csv"));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), csv_header());
}

TEST_F(Cli, ErrorsExitTwo) {
    EXPECT_EQ(run({"bogus"}), 2);
    EXPECT_EQ(run({}), 2);
    EXPECT_EQ(run({"verify", "--no-such-flag"}), 2);
    EXPECT_EQ(run({"verify", "--config", write("bad.json", "{\"kind\": ")}), 2);
    EXPECT_EQ(run({"verify", "--config", write("bad2.json", R"({"kind": "random", "extra": 1})")}), 2);
    EXPECT_EQ(run({"verify", "--t", "2.5", "--out", path("o")}), 2);
    EXPECT_EQ(run({"sweep", "--kind", "case1", "--t", "0.5", "--out", path("o")}), 2);  // no deltas
    EXPECT_EQ(run({"sweep", "--deltas", "2^-x,2^-6", "--out", path("o")}), 2);
    EXPECT_EQ(run({"verify", "--config", path("missing.json")}), 2);
    EXPECT_EQ(run({"--help"}), 0);
}

TEST_F(Cli, SweepWithInfeasibleDeltaIsPartial) {
    EXPECT_EQ(run({"sweep", "--kind", "case1", "--t", "0.5", "--deltas", "2^-4,2^-6,2^-7,2^-8", "--out", path("o")}), 1);
    const json report = json::parse(slurp(path("o/report.json")));
    EXPECT_TRUE(report["sweep"]["partial"].get<bool>());
    EXPECT_TRUE(report["sweep"]["points"][0].contains("error"));
    // Three successful rows under the header.
    const std::string csv = slurp(path("o/table.csv"));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST_F(Cli, SweepAccepted) {
    EXPECT_EQ(run({"sweep", "--kind", "case1", "--t", "0.5", "--deltas", "2^-6, 2^-7, 0.00390625", "--out", path("o")}), 0);
    const json report = json::parse(slurp(path("o/report.json")));
    EXPECT_EQ(report["config"]["deltas"], json::array({6, 7, 8}));
    EXPECT_TRUE(report["sweep"]["fit"]["exponent"].is_number());
}

TEST_F(Cli, FlaggedVerifyExitsOne) {
    // Case 2 fails the per-shading Katz-Tao hypothesis of the corollary form.
    EXPECT_EQ(run({"verify", "--kind", "case2", "--t", "1.5", "--k", "8", "--corollary", "--out", path("o")}), 1);
    EXPECT_TRUE(json::parse(slurp(path("o/report.json")))["report"]["flags"]["shading"].get<bool>());
}

TEST_F(Cli, GenerateMeasureDecompose) {
    EXPECT_EQ(run({"generate", "--kind", "random", "--k", "6", "--seed", "11", "--out", path("g")}), 0);
    const LineFamily f = family_from_json(json::parse(slurp(path("g/family.json"))));
    ConfigSpec spec;
    spec.kind = ConfigKind::random;
    spec.k = 6;
    spec.seed = 11;
    EXPECT_EQ(to_json(f), to_json(generate(spec)));

    EXPECT_EQ(run({"measure", "--family", path("g/family.json"), "--out", path("m")}), 0);
    const json m = json::parse(slurp(path("m/report.json")));
    EXPECT_EQ(m["lines"], f.size());
    EXPECT_EQ(m["covering_counts"].size(), 7u);

    const int rc = run({"decompose", "--family", path("g/family.json"), "--eta", "0.2", "--out", path("d")});
    EXPECT_EQ(rc, 0);
    const json d = json::parse(slurp(path("d/report.json")));
    EXPECT_TRUE(d["check"]["ok"].get<bool>());
    EXPECT_EQ(d["partition"]["A"].front(), 0.0);
    EXPECT_EQ(d["partition"]["A"].back(), 1.0);
    EXPECT_FALSE(d["rich_points"]["trace"]["steps"].empty());
}

TEST_F(Cli, ReportIsByteIdenticalAcrossRuns) {
    const std::string c = write("c.json", R"({"kind": "random", "k": 7, "t": 1.5, "lambda": 0.5, "seed": 42})");
    EXPECT_EQ(run({"verify", "--config", c, "--out", path("a")}), 0);
    EXPECT_EQ(run({"verify", "--config", c, "--out", path("b")}), 0);
    EXPECT_EQ(slurp(path("a/report.json")), slurp(path("b/report.json")));
    EXPECT_EQ(slurp(path("a/table.csv")), slurp(path("b/table.csv")));
    EXPECT_EQ(run({"verify", "--config", c, "--seed", "43", "--out", path("c")}), 0);
    EXPECT_NE(slurp(path("a/report.json")), slurp(path("c/report.json")));
}

}  // namespace
}  // namespace flab
