#include "iacolight/cli/commands.hpp"

#include "temp_dir.hpp"
#include "tiny_config.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <limits>
#include <sstream>

using namespace iacolight;
namespace fs = std::filesystem;

namespace
{
    struct CliRun
    {
        int rc;
        std::string out;
        std::string err;
    };

    CliRun invoke(std::vector<std::string> args)
    {
        args.insert(args.begin(), "iacolight");
        std::vector<const char *> argv;
        for (const auto &a : args)
            argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int rc = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return CliRun{rc, out.str(), err.str()};
    }

    void write_json(const fs::path &p, const nlohmann::json &j) { json_detail::write_text(p, j.dump(2)); }
} // namespace

TEST(Cli, GenNetWritesTheRequestedGrid)
{
    TempDir dir;
    const auto r = invoke({"gen-net", "--rows", "4", "--cols", "4", "--out", (dir / "net.json").string()});
    ASSERT_EQ(r.rc, 0) << r.err;
    const RoadNetwork net = load_roadnet(dir / "net.json");
    EXPECT_EQ(net.intersection_count(), 16u);
    EXPECT_EQ(net, build_grid(4, 4));
}

TEST(Cli, GenFlowIsSeededAndReproducible)
{
    TempDir dir;
    ASSERT_EQ(invoke({"gen-net", "--rows", "2", "--cols", "2", "--out", (dir / "net.json").string()}).rc, 0);
    for (const char *name : {"a.json", "b.json"})
    {
        const auto r = invoke({"gen-flow", "--net", (dir / "net.json").string(), "--duration", "600", "--mean", "40", "--seed", "5", "--out",
                            (dir / name).string()});
        ASSERT_EQ(r.rc, 0) << r.err;
    }
    EXPECT_EQ(json_detail::read_text(dir / "a.json"), json_detail::read_text(dir / "b.json"));
    EXPECT_NO_THROW(load_flow(dir / "a.json", load_roadnet(dir / "net.json")));
}

TEST(Cli, ExitCodesByErrorClass)
{
    TempDir dir;
    EXPECT_EQ(invoke({"gen-net", "--bogus"}).rc, cli::kExitUsage);
    EXPECT_EQ(invoke({}).rc, cli::kExitUsage);
    EXPECT_EQ(invoke({"gen-net", "--rows", "two"}).rc, cli::kExitUsage);

    const auto missing = invoke({"train", "--config", (dir / "nope.json").string()});
    EXPECT_EQ(missing.rc, cli::kExitMissingFile);
    EXPECT_EQ(missing.err.rfind("error: io:", 0), 0u) << missing.err;

    write_json(dir / "bad.json", {{"episodes", 0}});
    const auto invalid = invoke({"train", "--config", (dir / "bad.json").string()});
    EXPECT_EQ(invalid.rc, cli::kExitInvalid);
    EXPECT_NE(invalid.err.find("invalid-config"), std::string::npos) << invalid.err;

    json_detail::write_text(dir / "broken.json", "{\"episodes\": ");
    EXPECT_EQ(invoke({"train", "--config", (dir / "broken.json").string()}).rc, cli::kExitInvalid);
    EXPECT_EQ(invoke({"report", "--in", (dir / "nothing").string()}).rc, cli::kExitMissingFile);
    EXPECT_EQ(invoke({"gen-net", "--rows", "0", "--out", (dir / "x.json").string()}).rc, cli::kExitInvalid);
}

TEST(Cli, NumericFailureExitsWithFiveAndKeepsPartialOutputs)
{
    TempDir dir;
    auto c = tiny_config(3, 40);
    c.ia.mix_e = 1e300;
    write_json(dir / "cfg.json", to_json(c));
    const auto r = invoke({"train", "--config", (dir / "cfg.json").string(), "--out", (dir / "run").string()});
    EXPECT_EQ(r.rc, cli::kExitNumeric) << r.err;
    const auto manifest = nlohmann::json::parse(json_detail::read_text(dir / "run" / "run_manifest.json"));
    EXPECT_EQ(manifest["status"], "aborted");
    EXPECT_TRUE(fs::exists(dir / "run" / "metrics.csv"));
}

TEST(Cli, TrainIsByteReproducible)
{
    TempDir dir;
    write_json(dir / "cfg.json", to_json(tiny_config(3, 30)));
    for (const char *name : {"a", "b"})
    {
        const auto r = invoke({"train", "--config", (dir / "cfg.json").string(), "--seed", "11", "--out", (dir / name).string()});
        ASSERT_EQ(r.rc, 0) << r.err;
    }
    for (const char *f : {"metrics.csv", "summary.json", "config.json", "checkpoint.bin"})
        EXPECT_EQ(json_detail::read_text(dir / "a" / f), json_detail::read_text(dir / "b" / f)) << f;
    const auto cfg = load_experiment_config(dir / "a" / "config.json");
    EXPECT_EQ(cfg.seed, 11u);
    const auto manifest = nlohmann::json::parse(json_detail::read_text(dir / "a" / "run_manifest.json"));
    EXPECT_EQ(manifest["status"], "complete");
    EXPECT_EQ(manifest["config_hash"], config_hash(cfg));

    const auto rep = invoke({"report", "--in", (dir / "a").string()});
    EXPECT_EQ(rep.rc, 0) << rep.err;
    EXPECT_NE(rep.out.find("final_performance_s=NA"), std::string::npos) << rep.out;
}

TEST(Cli, OutRootComesFromTheEnvironment)
{
    TempDir dir;
    ::setenv(cli::kOutRootEnv, dir.path().c_str(), 1);
    const auto r = invoke({"gen-net", "--rows", "1", "--cols", "2"});
    ::unsetenv(cli::kOutRootEnv);
    ASSERT_EQ(r.rc, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "roadnet.json"));
    EXPECT_EQ(cli::default_out_root(), fs::path("out"));
}

TEST(Cli, HelpListsFlagsWithDefaults)
{
    const auto r = invoke({"--help"});
    EXPECT_EQ(r.rc, 0);
    for (const char *s : {"gen-net", "gen-flow", "train", "sweep", "report", "--rows", "--parallelism", "--resume", "526.63", "1440"})
        EXPECT_NE(r.out.find(s), std::string::npos) << s;
    EXPECT_EQ(invoke({"--version"}).out, std::string(kToolVersion) + "\n");
}

TEST(Cli, SweepThenReportNamesTheHeatmapMinimum)
{
    TempDir dir;
    SweepConfig s;
    s.alpha = AxisRange{0.0, 0.2, 0.2};
    s.beta = AxisRange{0.0, 0.2, 0.2};
    s.repetitions = 2;
    s.base = tiny_config(20, 5);
    write_json(dir / "sweep.json", to_json(s));
    const auto r = invoke({"sweep", "--config", (dir / "sweep.json").string(), "--out", dir.path().string(), "--parallelism", "2"});
    ASSERT_EQ(r.rc, 0) << r.err;

    const fs::path sweep_dir = sweep_directory(s, dir.path());
    ASSERT_TRUE(fs::exists(sweep_dir / "heatmap.csv"));
    // Independent scan of the heatmap for the minimal mean.
    std::istringstream heat(json_detail::read_text(sweep_dir / "heatmap.csv"));
    std::string line, best_a, best_b, best_m;
    double best = std::numeric_limits<double>::infinity();
    std::getline(heat, line);
    std::size_t rows = 0;
    while (std::getline(heat, line))
    {
        ++rows;
        std::istringstream fields(line);
        std::string a, b, m;
        std::getline(fields, a, ',');
        std::getline(fields, b, ',');
        std::getline(fields, m, ',');
        if (!m.empty() && std::stod(m) < best)
        {
            best = std::stod(m);
            best_a = a;
            best_b = b;
            best_m = m;
        }
    }
    EXPECT_EQ(rows, 4u);
    ASSERT_TRUE(std::isfinite(best));

    const auto rep = invoke({"report", "--in", dir.path().string()});
    ASSERT_EQ(rep.rc, 0) << rep.err;
    EXPECT_NE(rep.out.find("best cell: alpha=" + best_a + " beta=" + best_b + " mean_tt_s=" + best_m), std::string::npos) << rep.out;
    EXPECT_NE(rep.out.find("no shaping"), std::string::npos);

    const auto resumed = invoke({"sweep", "--config", (dir / "sweep.json").string(), "--out", dir.path().string(), "--resume"});
    ASSERT_EQ(resumed.rc, 0) << resumed.err;
    EXPECT_NE(resumed.out.find("0 experiments run, 4 cells reused"), std::string::npos) << resumed.out;
}
