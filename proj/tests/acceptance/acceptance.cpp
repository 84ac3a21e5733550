// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "iacolight/cli/commands.hpp"
#include "iacolight/iacolight.hpp"

#include "../gradcheck.hpp"
#include "../temp_dir.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

using namespace iacolight;
namespace fs = std::filesystem;

namespace
{
    // Pinned tolerances.
    constexpr double kClosedFormTol = 1e-12;
    constexpr double kSumIdentityTol = 1e-9;
    constexpr double kAttentionTol = 1e-9;
    constexpr double kYellowTol = 1e-9;
    constexpr double kBaselineRuntimeLimitS = 120.0;

    struct Outcome
    {
        bool pass = false;
        std::string detail;
    };

    double seconds_since(std::chrono::steady_clock::time_point t0)
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

    bool same_bits(const std::vector<double> &a, const std::vector<double> &b)
    {
        if (a.size() != b.size())
            return false;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!same_bits(a[i], b[i]))
                return false;
        return true;
    }

    std::string read(const fs::path &p) { return json_detail::read_text(p); }

    // ---- 1 ----
    Outcome neutral_shaping_equals_bypass()
    {
        ExperimentConfig c;
        c.network.rows = 2;
        c.network.cols = 2;
        c.flow.mean_per_bin = 83.57;
        c.flow.std_per_bin = 12.74;
        c.episodes = 5;
        c.seed = 3;
        c.ia.alpha = 0.0;
        c.ia.beta = 0.0;
        c.convergence_search_lo = 0;
        c.convergence_search_hi = 0;
        ExperimentConfig bypass = c;
        bypass.shaping_enabled = false;

        auto run = [](const ExperimentConfig &cfg, std::vector<double> &rewards, double &secs)
        {
            RunHooks h;
            h.on_transition = [&](std::size_t, std::size_t, const rl::Transition &t)
            { rewards.insert(rewards.end(), t.rewards.begin(), t.rewards.end()); };
            const auto t0 = std::chrono::steady_clock::now();
            auto r = run_experiment(cfg, h);
            secs = seconds_since(t0);
            return r;
        };
        std::vector<double> ra, rb;
        double ta = 0, tb = 0;
        const auto a = run(c, ra, ta);
        const auto b = run(bypass, rb, tb);

        bool params_equal = a.params && b.params && a.params->congruent(*b.params);
        if (params_equal)
            for (std::size_t i = 0; i < a.params->size() && params_equal; ++i)
                params_equal = same_bits((*a.params)[i].data, (*b.params)[i].data);
        bool metrics_equal = a.metrics.episodes.size() == b.metrics.episodes.size();
        for (std::size_t e = 0; metrics_equal && e < a.metrics.episodes.size(); ++e)
        {
            const auto &x = a.metrics.episodes[e];
            const auto &y = b.metrics.episodes[e];
            metrics_equal = x.avg_travel_time_s.has_value() == y.avg_travel_time_s.has_value() &&
                            (!x.avg_travel_time_s || same_bits(*x.avg_travel_time_s, *y.avg_travel_time_s)) &&
                            same_bits(x.mean_extrinsic, y.mean_extrinsic) && same_bits(x.mean_shaped, y.mean_shaped) &&
                            x.vehicles_exited == y.vehicles_exited;
        }
        const bool rewards_equal = same_bits(ra, rb);
        const bool fast = ta < kBaselineRuntimeLimitS && tb < kBaselineRuntimeLimitS;
        std::ostringstream d;
        d << "2x2 grid, 5 episodes x 1440 steps; rewards " << (rewards_equal ? "identical" : "DIFFER") << " (" << ra.size()
          << " values), params " << (params_equal ? "identical" : "DIFFER") << ", metrics " << (metrics_equal ? "identical" : "DIFFER")
          << "; runtimes " << format_double(std::round(ta * 10) / 10) << " s / " << format_double(std::round(tb * 10) / 10)
          << " s (limit 120 s)";
        return {rewards_equal && params_equal && metrics_equal && fast && !ra.empty(), d.str()};
    }

    // ---- 2 ----
    Outcome memory_closed_form()
    {
        Rng rng(2024);
        double worst = 0.0;
        for (int s = 0; s < 100; ++s)
        {
            ia::IAConfig cfg;
            cfg.gamma = rng.uniform(0.0, 1.0);
            cfg.lambda = rng.uniform(0.0, 1.0);
            const std::size_t n = 10;
            const std::size_t len = 1 + rng.below(200);
            std::vector<std::vector<double>> e(len, std::vector<double>(n));
            for (auto &row : e)
                for (double &x : row)
                    x = rng.uniform(-10.0, 0.0);
            ia::SmoothedMemory m(n);
            for (const auto &row : e)
                m = ia::update_memory(m, row, cfg);
            const double decay = cfg.gamma * cfg.lambda;
            for (std::size_t k = 0; k < n; ++k)
            {
                double closed = 0.0;
                for (std::size_t t = 0; t < len; ++t)
                    closed += std::pow(decay, static_cast<double>(len - 1 - t)) * e[t][k];
                worst = std::max(worst, std::abs(closed - m.w[k]));
            }
        }
        return {worst <= kClosedFormTol, "100 streams, N=10; max |recursive - closed form| = " + format_double(worst) + " (tol 1e-12)"};
    }

    // ---- 3 ----
    Outcome intrinsic_oracle()
    {
        Rng rng(77);
        std::size_t mismatches = 0;
        double worst_sum = 0.0;
        for (int c = 0; c < 1000; ++c)
        {
            const std::size_t n = 2 + rng.below(49);
            ia::IAConfig cfg;
            cfg.alpha = rng.uniform(-1.0, 1.0);
            cfg.beta = rng.uniform(-1.0, 1.0);
            ia::SmoothedMemory m(n);
            for (double &w : m.w)
                w = rng.uniform(-20.0, 0.0);
            const auto got = ia::intrinsic_rewards(m, cfg, n);
            const double peers = static_cast<double>(n - 1);
            double total = 0.0;
            for (std::size_t k = 0; k < n; ++k)
            {
                double envy = 0.0, guilt = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                {
                    if (j == k)
                        continue;
                    envy += std::max(m.w[j] - m.w[k], 0.0);
                    guilt += std::max(m.w[k] - m.w[j], 0.0);
                }
                const double want = -(cfg.alpha / peers) * envy - (cfg.beta / peers) * guilt;
                mismatches += got[k] != want;
                total += got[k];
            }
            double pairs = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = j + 1; k < n; ++k)
                    pairs += std::abs(m.w[j] - m.w[k]);
            worst_sum = std::max(worst_sum, std::abs(total + (cfg.alpha + cfg.beta) / peers * pairs));
        }
        return {mismatches == 0 && worst_sum <= kSumIdentityTol, "1000 cases, N<=50; " + std::to_string(mismatches) +
                                                                     " inexact entries; max sum-identity error " + format_double(worst_sum) +
                                                                     " (tol 1e-9)"};
    }

    // ---- 4 ----
    Outcome gradient_check()
    {
        using namespace gradcheck;
        const std::vector<std::pair<std::string, Report>> reports{
            {"dense/relu", check_dense(Activation::Relu, 1)},
            {"dense/identity", check_dense(Activation::Identity, 2)},
            {"gat/1 head", check_gat(Activation::Identity, 1, 3)},
            {"gat/5 heads relu", check_gat(Activation::Relu, 5, 4)},
            {"embed-gat-q network", check_q_network(5)},
        };
        bool ok = true;
        std::ostringstream d;
        d << "step 1e-4, tol 1e-3;";
        for (const auto &[name, r] : reports)
        {
            ok = ok && r.ok();
            d << ' ' << name << "=" << format_double(r.max_rel_error) << " (" << r.checked << ")";
        }
        return {ok, d.str()};
    }

    // ---- 5 ----
    Outcome attention_normalization()
    {
        Rng rng(55);
        double worst = 0.0;
        std::size_t graphs = 0;
        for (int trial = 0; trial < 200; ++trial)
        {
            const std::size_t n = 1 + rng.below(16);
            nn::ParamSet p;
            nn::GatLayout layer;
            const std::size_t in = 1 + rng.below(8), out = 1 + rng.below(8), kd = 1 + rng.below(6);
            for (std::size_t h = 0; h < 5; ++h)
            {
                const std::string hp = "h" + std::to_string(h);
                layer.heads.push_back(nn::GatHeadLayout{p.add(hp + "t", nn::Matrix(kd, in)), p.add(hp + "s", nn::Matrix(kd, in)),
                                                        p.add(hp + "v", nn::Matrix(out, in))});
            }
            layer.bias = p.add("b", nn::Matrix(out, 1));
            gradcheck::randomize(p, rng, 2.0);
            const double density = rng.uniform01();
            nn::Neighborhoods nb(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (i != j && rng.uniform01() < density)
                        nb[i].push_back(j);
            const auto tr = nn::gat_forward(p, layer, gradcheck::random_features(n, in, rng, 4.0), nb);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t h = 0; h < 5; ++h)
                {
                    double s = 0.0;
                    for (double a : tr.attention[i][h])
                    {
                        if (!(a >= 0.0))
                            worst = std::numeric_limits<double>::infinity();
                        s += a;
                    }
                    worst = std::max(worst, std::abs(s - 1.0));
                }
            ++graphs;
        }
        return {worst <= kAttentionTol, std::to_string(graphs) + " random graphs, 1..16 nodes, 5 heads; max |sum - 1| = " +
                                            format_double(worst) + " (tol 1e-9)"};
    }

    // ---- 6 ----
    Outcome simulator_conservation()
    {
        const auto net = std::make_shared<const RoadNetwork>(build_grid(2, 2));
        ArrivalProfile prof;
        prof.mean_per_bin = {120.0};
        prof.std_per_bin = {20.0};
        prof.duration_s = 14400.0;
        const auto flow = std::make_shared<const FlowSpec>(generate_flow(prof, *net, 6));
        SimConfig sc;
        sc.record_events = true;
        Simulation sim(net, flow, sc);
        Rng rng(66);
        std::vector<std::size_t> a(net->intersection_count(), 0);
        std::size_t conservation_failures = 0;
        for (std::size_t s = 0; s < 1440; ++s)
        {
            for (std::size_t k = 0; k < a.size(); ++k)
                a[k] = rng.uniform01() < 0.35 ? rng.below(4) : a[k];
            sim.step(a, 10.0);
            const SimState &st = sim.state();
            std::size_t on_network = 0;
            for (const auto &q : st.lane_queues)
                on_network += q.size();
            for (const auto &l : st.link_traveling)
                on_network += l.size();
            conservation_failures += st.entered != on_network + st.exited;
        }

        std::map<std::size_t, std::vector<SignalEvent>> by_node;
        for (const auto &e : sim.signal_events())
            by_node[e.intersection].push_back(e);
        std::size_t cycles = 0, interlock_failures = 0;
        for (const auto &[k, evs] : by_node)
            for (std::size_t i = 0; i + 2 < evs.size(); ++i)
            {
                if (evs[i].from != Interlock::Green)
                    continue;
                ++cycles;
                const bool order = evs[i].to == Interlock::Yellow && evs[i + 1].from == Interlock::Yellow &&
                                   evs[i + 1].to == Interlock::AllRed && evs[i + 2].from == Interlock::AllRed &&
                                   evs[i + 2].to == Interlock::Green;
                const bool yellow = std::abs(evs[i + 1].time - evs[i].time - 3.0) <= kYellowTol;
                const bool red = evs[i + 2].time - evs[i + 1].time >= 2.0 - kYellowTol;
                interlock_failures += !(order && yellow && red);
            }
        std::size_t green_violations = 0;
        const auto phases = default_phases();
        for (const auto &e : sim.discharge_events())
            if (e.lane % kLanesPerApproach != static_cast<std::size_t>(LaneType::Right))
                green_violations += e.interlock != Interlock::Green || !phases[e.phase].lane_mask()[e.lane];

        std::ostringstream d;
        d << "1440 fuzzed steps, " << sim.state().entered << " entered / " << sim.state().exited << " exited; " << conservation_failures
          << " conservation failures, " << cycles << " phase changes with " << interlock_failures << " timing violations, "
          << green_violations << " non-green discharges";
        return {conservation_failures == 0 && interlock_failures == 0 && green_violations == 0 && cycles > 0 && sim.state().exited > 0,
                d.str()};
    }

    // ---- 7 ----
    Outcome convergence_suite()
    {
        std::vector<std::string> failures;
        auto expect = [&](const std::string &name, const ConvergenceIndices &c, std::optional<std::size_t> loose, std::optional<std::size_t> tight)
        {
            if (c.loose_index != loose || c.tight_index != tight)
                failures.push_back(name + " got (" + format_index(c.loose_index) + ", " + format_index(c.tight_index) + ")");
        };
        expect("constant", convergence_indices(std::vector<double>(100, 309.1)), 50, 50);

        // Hand-derived: threshold 309.1, 1.2x = 370.92, 1.1x = 340.01.
        std::vector<double> spikes(100, 309.1);
        spikes[77] = 400.0; // breaks both bounds, so both indices are at least 78
        spikes[79] = 350.0; // breaks only the tight bound, pushing it to 80
        expect("spikes", convergence_indices(spikes), 78, 80);

        std::vector<double> early(100, 250.0);
        for (std::size_t i = 0; i < 60; ++i)
            early[i] = 600.0;
        early[65] = 280.0; // 1.12x: loose holds from 60, tight from 66
        expect("descent", convergence_indices(early), 60, 66);

        std::vector<double> never(100, 100.0);
        never[99] = 1000.0;
        expect("never", convergence_indices(never), std::nullopt, std::nullopt);

        std::string detail = "4 series: constant (50, 50), spikes (78, 80), descent (60, 66), never (none, none)";
        for (const auto &f : failures)
            detail += "; " + f;
        return {failures.empty(), detail};
    }

    // ---- 8 ----
    Outcome sweep_shape()
    {
        TempDir dir;
        SweepConfig full;
        full.base.convergence_search_lo = 0;
        full.base.convergence_search_hi = 0;
        std::atomic<std::size_t> calls{0};
        const auto out = run_sweep(full, dir / "full", {}, [&](const ExperimentConfig &c)
                                   {
                                       ++calls;
                                       ExperimentSummary s;
                                       s.final_performance = 300.0 + c.ia.alpha + c.ia.beta;
                                       return s; });
        std::size_t records = 0;
        for (const auto &c : out.cells)
            records += c.repetitions.size();
        std::istringstream heat(read(out.directory / "heatmap.csv"));
        std::size_t rows = 0;
        for (std::string l; std::getline(heat, l);)
            ++rows;
        rows -= 1; // header

        SweepConfig tiny;
        tiny.alpha = AxisRange{0.0, 0.4, 0.2};
        tiny.beta = AxisRange{-0.2, 0.2, 0.2};
        tiny.repetitions = 2;
        tiny.base.network.rows = 1;
        tiny.base.network.cols = 2;
        tiny.base.flow.mean_per_bin = 120.0;
        tiny.base.flow.std_per_bin = 10.0;
        tiny.base.episodes = 20;
        tiny.base.steps_per_episode = 10;
        tiny.base.agent.hidden = 8;
        tiny.base.agent.batch_size = 4;
        tiny.base.convergence_search_lo = 0;
        tiny.base.convergence_search_hi = 19;
        SweepConfig tiny4 = tiny;
        tiny4.parallelism = 4;
        const auto s1 = run_sweep(tiny, dir / "p1");
        const auto s4 = run_sweep(tiny4, dir / "p4");
        bool invariant = read(s1.directory / "heatmap.csv") == read(s4.directory / "heatmap.csv");
        for (const auto &e : fs::directory_iterator(s1.directory / "cells"))
            invariant = invariant && read(e.path()) == read(s4.directory / "cells" / e.path().filename());
        std::size_t complete = 0;
        for (const auto &c : s1.cells)
            complete += c.complete();

        std::ostringstream d;
        d << "default grid: " << out.cells.size() << " cells, " << records << " records, " << calls.load() << " runs, " << rows
          << " heatmap rows; real 3x3x2 sweep at parallelism 1 vs 4 " << (invariant ? "byte-identical" : "DIFFERS") << " (" << complete
          << "/9 cells complete)";
        return {out.cells.size() == 121 && records == 363 && calls.load() == 363 && rows == 121 && invariant && complete == 9, d.str()};
    }

    // ---- 9 ----
    Outcome learning_sanity()
    {
        ExperimentConfig c;
        c.network.rows = 2;
        c.network.cols = 2;
        // Jinan arrival statistics scaled from 12 to 4 intersections.
        c.flow.mean_per_bin = 83.57;
        c.flow.std_per_bin = 12.74;
        c.episodes = 30;
        c.dt_s = 10.0;
        c.seed = 1;
        c.convergence_search_lo = 0;
        c.convergence_search_hi = 0;
        ExperimentConfig fixed = c;
        fixed.controller = Controller::FixedTime;

        const auto t0 = std::chrono::steady_clock::now();
        const auto dqn = summarize(run_experiment(c).metrics, c);
        const double secs = seconds_since(t0);
        const auto base = summarize(run_experiment(fixed).metrics, fixed);
        if (!dqn.final_performance || !base.final_performance)
            return {false, "final performance undefined"};
        std::ostringstream d;
        d << "2x2 grid, 30 episodes x 1440 steps, dt 10 s; DQN final performance " << format_double(std::round(*dqn.final_performance * 100) / 100)
          << " s vs fixed-time " << format_double(std::round(*base.final_performance * 100) / 100) << " s; DQN run "
          << format_double(std::round(secs)) << " s";
        return {*dqn.final_performance <= *base.final_performance, d.str()};
    }

    // ---- 10 ----
    int invoke(std::vector<std::string> args, std::string *stdout_text = nullptr)
    {
        args.insert(args.begin(), "iacolight");
        std::vector<const char *> argv;
        for (const auto &a : args)
            argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int rc = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        if (stdout_text)
            *stdout_text = out.str();
        return rc;
    }

    Outcome determinism()
    {
        TempDir dir;
        ExperimentConfig c;
        c.network.rows = 2;
        c.network.cols = 2;
        c.flow.mean_per_bin = 83.57;
        c.flow.std_per_bin = 12.74;
        c.episodes = 3;
        c.steps_per_episode = 120;
        c.convergence_search_lo = 0;
        c.convergence_search_hi = 0;
        SweepConfig s;
        s.alpha = AxisRange{0.0, 0.2, 0.2};
        s.beta = AxisRange{0.0, 0.2, 0.2};
        s.repetitions = 2;
        s.base = c;
        s.base.episodes = 20;
        s.base.steps_per_episode = 10;
        json_detail::write_text(dir / "train.json", to_json(c).dump(2));
        json_detail::write_text(dir / "sweep.json", to_json(s).dump(2));

        std::size_t compared = 0, differing = 0, failed_runs = 0;
        auto same = [&](const fs::path &a, const fs::path &b)
        {
            ++compared;
            differing += !fs::exists(a) || !fs::exists(b) || read(a) != read(b);
        };
        for (const char *run : {"r1", "r2"})
        {
            const fs::path root = dir / run;
            failed_runs += invoke({"gen-net", "--rows", "2", "--cols", "2", "--out", (root / "net.json").string()}) != 0;
            failed_runs += invoke({"gen-flow", "--net", (root / "net.json").string(), "--seed", "9", "--duration", "3600", "--out",
                                (root / "flow.json").string()}) != 0;
            failed_runs += invoke({"train", "--config", (dir / "train.json").string(), "--seed", "4", "--alpha", "0.6", "--beta", "-0.2",
                                "--out", (root / "train").string()}) != 0;
            failed_runs += invoke({"sweep", "--config", (dir / "sweep.json").string(), "--seed", "4", "--out", (root / "sweep").string()}) != 0;
        }
        for (const char *f : {"net.json", "flow.json", "train/metrics.csv", "train/summary.json", "train/config.json", "train/checkpoint.bin"})
            same(dir / "r1" / f, dir / "r2" / f);
        fs::path sweep1, sweep2;
        for (const auto &e : fs::directory_iterator(dir / "r1" / "sweep"))
            sweep1 = e.path();
        for (const auto &e : fs::directory_iterator(dir / "r2" / "sweep"))
            sweep2 = e.path();
        same(sweep1 / "heatmap.csv", sweep2 / "heatmap.csv");
        for (const auto &e : fs::directory_iterator(sweep1 / "cells"))
            same(e.path(), sweep2 / "cells" / e.path().filename());
        std::string rep1, rep2;
        failed_runs += invoke({"report", "--in", sweep1.string()}, &rep1) != 0;
        failed_runs += invoke({"report", "--in", sweep2.string()}, &rep2) != 0;
        ++compared;
        differing += rep1 != rep2;

        std::ostringstream d;
        d << "gen-net, gen-flow, train, sweep and report each run twice: " << compared << " outputs compared, " << differing
          << " differ, " << failed_runs << " failed commands";
        return {differing == 0 && failed_runs == 0 && compared >= 12, d.str()};
    }

    Outcome guarded(const std::function<Outcome()> &f)
    {
        try
        {
            return f();
        }
        catch (const std::exception &e)
        {
            return {false, std::string("exception: ") + e.what()};
        }
    }
} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"baseline equivalence", neutral_shaping_equals_bypass},
        {"memory closed form", memory_closed_form},
        {"intrinsic oracle and sum identity", intrinsic_oracle},
        {"gradient check", gradient_check},
        {"attention normalization", attention_normalization},
        {"simulator conservation and interlock", simulator_conservation},
        {"convergence indices", convergence_suite},
        {"sweep protocol shape", sweep_shape},
        {"desk-scale learning sanity", learning_sanity},
        {"determinism", determinism},
    };
    std::size_t failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i)
    {
        const auto t0 = std::chrono::steady_clock::now();
        const Outcome o = guarded(criteria[i].second);
        failed += !o.pass;
        std::cout << "criterion " << i + 1 << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << ": " << o.detail << " ["
                  << format_double(std::round(seconds_since(t0) * 10) / 10) << " s]" << std::endl;
    }
    std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " FAILED") << std::endl;
    return failed == 0 ? 0 : 1;
}
