#include "hconv/cli.hpp"
#include "hconv/tensor_io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace hconv;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = HCONV_FIXTURE_DIR;

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("hconv_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, CharacterizeEmbedsDecisionTable) {
    const auto r = run({"characterize", "--out", path("t.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream csv(slurp(path("t.csv")));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "Q,fm,L,K,algo,mults,transform_ops,weighted_cost,selected");
    std::map<std::pair<int, int>, std::set<std::string>> chosen;
    while (std::getline(csv, line)) {
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
        ASSERT_EQ(f.size(), 9u);
        if (f[8] == "1") chosen[{std::stoi(f[0]), std::stoi(f[1])}].insert(f[4].substr(0, 3));
    }
    ASSERT_EQ(chosen.size(), 9u);
    for (const auto& [cell, algos] : chosen) {
        const bool fft = cell == std::pair{5, 24} || cell == std::pair{7, 12} || cell == std::pair{7, 24};
        EXPECT_EQ(algos, (std::set<std::string>{fft ? "fft" : "win"})) << cell.first << "," << cell.second;
    }
}

TEST_F(Cli, CharacterizeIsByteIdentical) {
    ASSERT_EQ(run({"characterize", "--out", path("a.csv")}).code, 0);
    ASSERT_EQ(run({"characterize", "--out", path("b.csv")}).code, 0);
    EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
}

TEST_F(Cli, CharacterizeGridFileAndBench) {
    std::ofstream(path("g.txt")) << "3 6 16 16\n";
    const auto r = run({"characterize", "--grid", path("g.txt"), "--bench", "--out", path("t.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(slurp(path("t.csv")).find(",selected,time_us"), std::string::npos);
    std::ofstream(path("bad.txt")) << "3 6\n";
    EXPECT_EQ(run({"characterize", "--grid", path("bad.txt"), "--out", path("t.csv")}).code, 1);
    EXPECT_EQ(run({"characterize", "--grid", path("missing.txt"), "--out", path("t.csv")}).code, 2);
}

TEST_F(Cli, PlanMissingNetIsIoError) {
    EXPECT_EQ(run({"plan", "--net", path("missing.txt"), "--resources", "64", "--out", path("p.txt")}).code, 2);
}

TEST_F(Cli, PlanWritesFileAndIsIdempotent) {
    const std::vector<std::string> a{"plan", "--net", kFixtures + "/inception_v2.net", "--resources", "512", "--out",
                                     path("p1.txt")};
    auto b = a;
    b.back() = path("p2.txt");
    ASSERT_EQ(run(a).code, 0);
    ASSERT_EQ(run(b).code, 0);
    const std::string text = slurp(path("p1.txt"));
    EXPECT_EQ(text, slurp(path("p2.txt")));
    EXPECT_EQ(text.rfind("hconv-plan 1\n", 0), 0u);
    EXPECT_NE(text.find("branch inception_3a 2 alg=direct,fft"), std::string::npos);
}

TEST_F(Cli, CostFlagsOverrideEnvironment) {
    std::ofstream(path("g.txt")) << "5 28 32 64\n";
    setenv("HCONV_LAMBDA", "1000", 1);
    ASSERT_EQ(run({"characterize", "--grid", path("g.txt"), "--out", path("env.csv")}).code, 0);
    ASSERT_EQ(run({"characterize", "--grid", path("g.txt"), "--lambda", "1.5", "--out", path("flag.csv")}).code, 0);
    setenv("HCONV_LAMBDA", "zebra", 1);
    EXPECT_EQ(run({"characterize", "--grid", path("g.txt"), "--out", path("x.csv")}).code, 1);
    unsetenv("HCONV_LAMBDA");
    // the huge environment penalty picks Winograd; the flag restores the default and picks FFT
    auto selected = [](const std::string& csv) {
        std::istringstream in(csv);
        for (std::string line; std::getline(in, line);) {
            std::vector<std::string> f;
            std::stringstream ls(line);
            for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
            if (f.size() == 9 && f[8] == "1") return f[4];
        }
        return std::string();
    };
    const std::string env = slurp(path("env.csv")), flag = slurp(path("flag.csv"));
    EXPECT_EQ(selected(env), "winograd2");
    EXPECT_EQ(selected(flag), "fft");
}

TEST_F(Cli, EndToEndRunAndVerify) {
    const std::string net = kFixtures + "/toy.net";
    ASSERT_EQ(run({"rand-weights", "--net", net, "--seed", "1", "--out", path("w.bin")}).code, 0);
    ASSERT_EQ(run({"rand-input", "--net", net, "--seed", "2", "--out", path("x.bin")}).code, 0);
    ASSERT_EQ(run({"plan", "--net", net, "--resources", "64", "--out", path("p.txt")}).code, 0);

    const auto r = run({"run", "--net", net, "--weights", path("w.bin"), "--input", path("x.bin"), "--mode", "fix16",
                        "--plan", path("p.txt"), "--stats", "--out", path("e16.bin")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("winograd4"), std::string::npos);
    EXPECT_NE(r.out.find("total"), std::string::npos);
    ASSERT_EQ(run({"run", "--net", net, "--weights", path("w.bin"), "--input", path("x.bin"), "--out", path("e.bin")}).code,
              0);
    ASSERT_EQ(run({"run", "--net", net, "--weights", path("w.bin"), "--input", path("x.bin"), "--out", path("e2.bin")}).code,
              0);
    EXPECT_EQ(slurp(path("e.bin")), slurp(path("e2.bin")));
    EXPECT_EQ(read_tensor(path("e.bin")).shape(), (Shape3{128, 1, 1}));

    const auto same = run({"verify", "--a", path("e.bin"), "--b", path("e.bin")});
    EXPECT_EQ(same.code, 0);
    EXPECT_EQ(same.out, "distance 0\nsame\n");
    const auto close = run({"verify", "--a", path("e.bin"), "--b", path("e16.bin")});
    EXPECT_EQ(close.code, 0);
    EXPECT_NE(close.out.find("same"), std::string::npos);
    const auto strict = run({"verify", "--a", path("e.bin"), "--b", path("e16.bin"), "--threshold", "0"});
    EXPECT_NE(strict.out.find("different"), std::string::npos);
}

TEST_F(Cli, RunErrors) {
    const std::string net = kFixtures + "/toy.net";
    ASSERT_EQ(run({"rand-weights", "--net", net, "--seed", "1", "--out", path("w.bin")}).code, 0);
    ASSERT_EQ(run({"rand-input", "--net", kFixtures + "/inception_v2.net", "--seed", "2", "--out", path("big.bin")}).code,
              0);
    EXPECT_EQ(run({"run", "--net", net, "--weights", path("w.bin"), "--input", path("big.bin"), "--out", path("e.bin")}).code,
              1);
    EXPECT_EQ(run({"run", "--net", net, "--weights", path("w.bin"), "--input", path("none.bin"), "--out", path("e.bin")}).code,
              2);
    EXPECT_EQ(run({"run", "--net", net, "--weights", path("w.bin"), "--input", path("w.bin"), "--mode", "fix4", "--out",
                   path("e.bin")})
                  .code,
              1);
    std::ofstream(path("junk.bin")) << "not a tensor";
    EXPECT_EQ(run({"verify", "--a", path("junk.bin"), "--b", path("junk.bin")}).code, 2);
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"bogus"}).code, 1);
    EXPECT_EQ(run({"verify", "--a", "x"}).code, 1);
    EXPECT_EQ(run({"characterize", "--out", path("t.csv"), "--frobnicate"}).code, 1);
    EXPECT_EQ(run({"gen-transforms", "--m", "1", "--r", "3"}).code, 1);
}

TEST_F(Cli, VersionAndHelpOnEverySubcommand) {
    for (const char* sub : {"characterize", "plan", "run", "verify", "gen-transforms", "rand-weights", "rand-input"}) {
        const auto v = run({sub, "--version"});
        EXPECT_EQ(v.code, 0) << sub;
        EXPECT_NE(v.out.find(kVersion), std::string::npos) << sub;
        const auto h = run({sub, "--help"});
        EXPECT_EQ(h.code, 0) << sub;
        EXPECT_NE(h.out.find("--"), std::string::npos) << sub;
    }
    EXPECT_EQ(run({"--version"}).code, 0);
}

TEST_F(Cli, GenTransformsPrintsExactAndDecimal) {
    const auto r = run({"gen-transforms", "--m", "4", "--r", "3"});
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("F(4x4,3x3)"), std::string::npos);
    EXPECT_NE(r.out.find("1/4"), std::string::npos);
    EXPECT_NE(r.out.find("0.250000"), std::string::npos);
    EXPECT_NE(r.out.find("36 per 2D tile"), std::string::npos);
}
