#pragma once

#include "iacolight/core/error.hpp"
#include "iacolight/core/text.hpp"
#include "iacolight/core/version.hpp"
#include "iacolight/experiment/config.hpp"
#include "iacolight/experiment/metrics.hpp"
#include "iacolight/experiment/runner.hpp"
#include "iacolight/io/network_io.hpp"
#include "iacolight/nn/checkpoint.hpp"
#include "iacolight/sweep/sweep.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace iacolight::cli
{
    namespace fs = std::filesystem;

    inline constexpr const char *kOutRootEnv = "IACOLIGHT_OUT_ROOT";

    // Exit codes.
    inline constexpr int kExitOk = 0;
    inline constexpr int kExitFailure = 1;
    inline constexpr int kExitUsage = 2;
    inline constexpr int kExitInvalid = 3;
    inline constexpr int kExitMissingFile = 4;
    inline constexpr int kExitNumeric = 5;

    inline int exit_code_for(ErrorCategory c)
    {
        switch (c)
        {
        case ErrorCategory::InvalidConfig:
        case ErrorCategory::InvalidInput:
        case ErrorCategory::InvalidAction:
        case ErrorCategory::Shape:
        case ErrorCategory::Parse:
        case ErrorCategory::Validation:
            return kExitInvalid;
        case ErrorCategory::Io:
            return kExitMissingFile;
        case ErrorCategory::Numeric:
            return kExitNumeric;
        default:
            return kExitFailure;
        }
    }

    inline fs::path default_out_root()
    {
        const char *env = std::getenv(kOutRootEnv);
        return env && *env ? fs::path(env) : fs::path("out");
    }

    inline std::string utc_timestamp()
    {
        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    // ---- gen-net ----

    struct GenNetOptions
    {
        std::size_t rows = 4;
        std::size_t cols = 4;
        double link_travel_time_s = 20.0;
        double boundary_travel_time_s = 20.0;
        std::string out;
    };

    inline fs::path cmd_gen_net(const GenNetOptions &o, std::ostream &log)
    {
        GridOptions g;
        g.link_travel_time_s = o.link_travel_time_s;
        g.boundary_travel_time_s = o.boundary_travel_time_s;
        const RoadNetwork net = build_grid(o.rows, o.cols, g);
        const fs::path out = o.out.empty() ? default_out_root() / "roadnet.json" : fs::path(o.out);
        save_roadnet(net, out);
        log << "wrote " << out.string() << " (" << net.intersection_count() << " intersections, " << net.links().size() << " links)\n";
        return out;
    }

    // ---- gen-flow ----

    struct GenFlowOptions
    {
        std::string net;
        double mean = 526.63;
        double std = 86.70;
        double duration_s = 14400.0;
        double bin_width_s = 300.0;
        std::uint64_t seed = 0;
        std::string out;
    };

    inline fs::path cmd_gen_flow(const GenFlowOptions &o, std::ostream &log)
    {
        const RoadNetwork net = load_roadnet(o.net);
        ArrivalProfile p;
        p.bin_width_s = o.bin_width_s;
        p.mean_per_bin = {o.mean};
        p.std_per_bin = {o.std};
        p.duration_s = o.duration_s;
        const FlowSpec flow = generate_flow(p, net, o.seed);
        const fs::path out = o.out.empty() ? default_out_root() / "flow.json" : fs::path(o.out);
        save_flow(flow, out);
        log << "wrote " << out.string() << " (" << flow.entries.size() << " vehicles)\n";
        return out;
    }

    // ---- train ----

    struct TrainOverrides
    {
        std::optional<std::uint64_t> seed;
        std::optional<std::size_t> episodes;
        std::optional<std::size_t> steps;
        std::optional<double> alpha;
        std::optional<double> beta;
        std::optional<std::string> controller;
        std::optional<std::size_t> rows;
        std::optional<std::size_t> cols;
    };

    struct TrainOptions
    {
        std::string config;
        TrainOverrides overrides;
        std::string out;
    };

    /// Reads an experiment config file; a "sweep" section, if present, is ignored.
    inline ExperimentConfig load_train_config(const fs::path &path)
    {
        nlohmann::json j = json_detail::parse(json_detail::read_text(path), path.string());
        if (j.is_object())
            j.erase("sweep");
        ExperimentConfig c;
        apply_json(j, c, path.string());
        return c;
    }

    inline void apply_overrides(ExperimentConfig &c, const TrainOverrides &o)
    {
        if (o.seed)
            c.seed = *o.seed;
        if (o.episodes)
            c.episodes = *o.episodes;
        if (o.steps)
            c.steps_per_episode = *o.steps;
        if (o.alpha)
            c.ia.alpha = *o.alpha;
        if (o.beta)
            c.ia.beta = *o.beta;
        if (o.rows)
            c.network.rows = *o.rows;
        if (o.cols)
            c.network.cols = *o.cols;
        if (o.controller)
        {
            if (*o.controller == "dqn")
                c.controller = Controller::Dqn;
            else if (*o.controller == "fixed_time")
                c.controller = Controller::FixedTime;
            else
                throw InvalidConfigError("--controller: expected 'dqn' or 'fixed_time'");
        }
    }

    struct TrainOutcome
    {
        fs::path directory;
        ExperimentSummary summary;
    };

    inline TrainOutcome cmd_train(const TrainOptions &o, std::ostream &log)
    {
        ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_train_config(o.config);
        apply_overrides(cfg, o.overrides);
        cfg.validate();

        const std::string hash = config_hash(cfg);
        TrainOutcome outcome;
        outcome.directory = o.out.empty() ? default_out_root() / ("train-" + hash) : fs::path(o.out);
        const fs::path dir = outcome.directory;
        fs::create_directories(dir);

        nlohmann::json manifest;
        manifest["config_hash"] = hash;
        manifest["tool_version"] = kToolVersion;
        manifest["started_at"] = utc_timestamp();
        manifest["status"] = "running";
        manifest["outputs"] = nlohmann::json::array();
        json_detail::write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
        json_detail::write_text(dir / "run_manifest.json", manifest.dump(2) + "\n");

        std::vector<std::string> outputs{"config.json", "metrics.csv", "summary.json"};
        EpisodeMetrics metrics;
        std::optional<nn::ParamSet> params;
        std::optional<ExperimentAborted> aborted;
        try
        {
            ExperimentResult r = run_experiment(cfg, RunHooks{nullptr, [&](const EpisodeRecord &e)
                                                              {
                                                                  log << "episode " << e.episode << " avg_travel_time_s="
                                                                      << format_optional(e.avg_travel_time_s) << '\n';
                                                              }});
            metrics = std::move(r.metrics);
            params = std::move(r.params);
        }
        catch (const ExperimentAborted &e)
        {
            metrics = e.partial();
            aborted = e;
        }

        outcome.summary = summarize(metrics, cfg);
        if (aborted)
        {
            outcome.summary.status = "aborted";
            outcome.summary.error = aborted->what();
        }
        json_detail::write_text(dir / "metrics.csv", metrics_csv(metrics));
        json_detail::write_text(dir / "summary.json", to_json(outcome.summary).dump(2) + "\n");
        if (params)
        {
            nn::save_checkpoint(*params, dir / "checkpoint.bin");
            outputs.push_back("checkpoint.bin");
        }

        manifest["finished_at"] = utc_timestamp();
        manifest["status"] = aborted ? "aborted" : "complete";
        manifest["outputs"] = outputs;
        json_detail::write_text(dir / "run_manifest.json", manifest.dump(2) + "\n");

        if (aborted)
            throw *aborted;
        log << "final_performance_s=" << format_optional(outcome.summary.final_performance) << '\n';
        log << "wrote " << dir.string() << '\n';
        return outcome;
    }

    // ---- sweep ----

    struct SweepCommandOptions
    {
        std::string config;
        std::string out;
        bool resume = false;
        std::optional<std::size_t> parallelism;
        std::optional<std::uint64_t> seed;
    };

    inline SweepOutcome cmd_sweep(const SweepCommandOptions &o, std::ostream &log, ExperimentFn fn = run_and_summarize)
    {
        SweepConfig cfg;
        if (!o.config.empty())
        {
            apply_json(json_detail::parse(json_detail::read_text(o.config), o.config), cfg, o.config);
        }
        if (o.parallelism)
            cfg.parallelism = *o.parallelism;
        if (o.seed)
            cfg.base.seed = *o.seed;
        cfg.validate();
        const fs::path out = o.out.empty() ? default_out_root() : fs::path(o.out);
        SweepOutcome r = run_sweep(cfg, out, SweepOptions{o.resume}, std::move(fn));
        std::size_t failed = 0;
        for (const auto &c : r.cells)
            failed += !c.complete();
        log << "sweep " << r.directory.string() << ": " << r.cells.size() << " cells, " << r.experiments_run << " experiments run, "
            << r.cells_skipped << " cells reused, " << failed << " failed\n";
        return r;
    }

    // ---- report ----

    inline std::string pair_text(const std::optional<ConvergenceIndices> &c)
    {
        if (!c)
            return "(NA, NA)";
        return "(" + format_index(c->loose_index) + ", " + format_index(c->tight_index) + ")";
    }

    inline void report_sweep(const fs::path &dir, std::ostream &out)
    {
        const auto cells = load_sweep_cells(dir);
        std::size_t lo = 50, hi = 100;
        if (fs::exists(dir / "sweep_config.json"))
        {
            SweepConfig cfg;
            apply_json(json_detail::parse(json_detail::read_text(dir / "sweep_config.json"), (dir / "sweep_config.json").string()), cfg);
            lo = cfg.base.convergence_search_lo;
            hi = cfg.base.convergence_search_hi;
        }
        auto convergence_of = [&](const SweepCellResult &c) -> std::optional<ConvergenceIndices>
        {
            const auto curve = mean_curve(c);
            if (!curve || curve->size() < hi || curve->size() < kFinalPerformanceWindow || curve->size() <= lo)
                return std::nullopt;
            return convergence_indices(*curve, lo, hi);
        };

        std::size_t complete = 0;
        for (const auto &c : cells)
            complete += c.complete();
        out << "sweep: " << cells.size() << " cells, " << complete << " complete\n";
        out << "cells (alpha,beta,mean_tt_s,std_tt_s,n,convergence):\n";
        for (const auto &c : cells)
            out << "  " << format_double(c.cell.alpha) << ',' << format_double(c.cell.beta) << ',' << format_double(c.mean) << ','
                << format_double(c.std) << ',' << c.n << ',' << pair_text(convergence_of(c)) << '\n';

        const auto best = best_cell(cells);
        if (!best)
        {
            out << "best cell: none\n";
            return;
        }
        out << "best cell: alpha=" << format_double(best->cell.alpha) << " beta=" << format_double(best->cell.beta)
            << " mean_tt_s=" << format_double(best->mean) << '\n';

        out << "\nmethod                 alpha   beta   final_performance_s  convergence\n";
        auto row = [&](const std::string &name, const SweepCellResult &c)
        {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%-22s %6s %6s %20s  %s\n", name.c_str(), format_double(c.cell.alpha).c_str(),
                          format_double(c.cell.beta).c_str(), format_double(c.mean).c_str(), pair_text(convergence_of(c)).c_str());
            out << buf;
        };
        for (const auto &c : cells)
            if (c.cell.alpha == 0.0 && c.cell.beta == 0.0)
                row("no shaping", c);
        row("best (alpha, beta)", *best);
    }

    inline void report_train(const fs::path &dir, std::ostream &out)
    {
        const fs::path path = dir / "summary.json";
        const auto j = json_detail::parse(json_detail::read_text(path), path.string());
        try
        {
            out << "run: " << j.at("config_hash").get<std::string>() << " status=" << j.at("status").get<std::string>()
                << " episodes=" << j.at("episodes").get<std::size_t>() << '\n';
            const auto &fp = j.at("final_performance");
            out << "final_performance_s=" << (fp.is_null() ? std::string("NA") : format_double(fp.get<double>())) << '\n';
            const auto &cv = j.at("convergence");
            if (cv.is_null())
                out << "convergence=(NA, NA)\n";
            else
            {
                auto idx = [](const nlohmann::json &v) { return v.is_null() ? std::string("none") : std::to_string(v.get<std::size_t>()); };
                out << "convergence=(" << idx(cv.at("loose_index")) << ", " << idx(cv.at("tight_index"))
                    << ") threshold=" << format_double(cv.at("threshold").get<double>()) << '\n';
            }
        }
        catch (const nlohmann::json::exception &e)
        {
            throw ValidationError(path.string() + ": malformed summary (" + e.what() + ")");
        }
    }

    /// Reports either a sweep directory (holding cells/) or a train directory (holding summary.json).
    /// A parent directory holding exactly one sweep-* directory is accepted too.
    inline void cmd_report(const fs::path &in, std::ostream &out)
    {
        if (!fs::is_directory(in))
            throw IoError("no such directory '" + in.string() + "'");
        if (fs::is_directory(in / "cells"))
            return report_sweep(in, out);
        if (fs::exists(in / "summary.json"))
            return report_train(in, out);
        std::vector<fs::path> sweeps;
        for (const auto &e : fs::directory_iterator(in))
            if (e.is_directory() && e.path().filename().string().rfind("sweep-", 0) == 0)
                sweeps.push_back(e.path());
        if (sweeps.size() == 1)
            return report_sweep(sweeps.front(), out);
        if (sweeps.size() > 1)
            throw InvalidInputError("'" + in.string() + "' holds several sweeps; pass one sweep-* directory");
        throw IoError("'" + in.string() + "' holds neither a sweep nor a training run");
    }

    // ---- entry point ----

    inline int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
    {
        CLI::App app{"Inequity-aversion traffic signal control laboratory", "iacolight"};
        app.set_version_flag("--version", kToolVersion);
        app.require_subcommand(1);
        app.option_defaults()->always_capture_default();

        GenNetOptions gn;
        auto *gen_net = app.add_subcommand("gen-net", "Write a grid road network");
        gen_net->add_option("--rows", gn.rows, "Grid rows");
        gen_net->add_option("--cols", gn.cols, "Grid columns");
        gen_net->add_option("--link-time", gn.link_travel_time_s, "Travel time of internal links (s)");
        gen_net->add_option("--boundary-time", gn.boundary_travel_time_s, "Travel time of boundary links (s)");
        gen_net->add_option("--out", gn.out, "Output file (default: $IACOLIGHT_OUT_ROOT/roadnet.json)");

        GenFlowOptions gf;
        auto *gen_flow = app.add_subcommand("gen-flow", "Sample a synthetic vehicle flow for a road network");
        gen_flow->add_option("--net", gf.net, "Road network file")->required();
        gen_flow->add_option("--mean", gf.mean, "Mean vehicles per bin");
        gen_flow->add_option("--std", gf.std, "Standard deviation of vehicles per bin");
        gen_flow->add_option("--duration", gf.duration_s, "Flow duration (s)");
        gen_flow->add_option("--bin-width", gf.bin_width_s, "Bin width (s)");
        gen_flow->add_option("--seed", gf.seed, "Random seed");
        gen_flow->add_option("--out", gf.out, "Output file (default: $IACOLIGHT_OUT_ROOT/flow.json)");

        TrainOptions tr;
        std::uint64_t t_seed = 0;
        std::size_t t_episodes = 0, t_steps = 0, t_rows = 0, t_cols = 0;
        double t_alpha = 0.0, t_beta = 0.0;
        std::string t_controller;
        const ExperimentConfig defaults;
        auto *train = app.add_subcommand("train", "Run one experiment");
        train->add_option("--config", tr.config, "Experiment config file (default: built-in defaults)");
        auto *o_seed = train->add_option("--seed", t_seed, "Override seed")->default_str(std::to_string(defaults.seed));
        auto *o_episodes = train->add_option("--episodes", t_episodes, "Override episode count")->default_str(std::to_string(defaults.episodes));
        auto *o_steps = train->add_option("--steps", t_steps, "Override steps per episode")->default_str(std::to_string(defaults.steps_per_episode));
        auto *o_alpha = train->add_option("--alpha", t_alpha, "Override inequity coefficient alpha")->default_str(format_double(defaults.ia.alpha));
        auto *o_beta = train->add_option("--beta", t_beta, "Override inequity coefficient beta")->default_str(format_double(defaults.ia.beta));
        auto *o_controller = train->add_option("--controller", t_controller, "Override controller: dqn or fixed_time")
                                 ->default_str(to_string(defaults.controller));
        auto *o_rows = train->add_option("--rows", t_rows, "Override grid rows")->default_str(std::to_string(defaults.network.rows));
        auto *o_cols = train->add_option("--cols", t_cols, "Override grid columns")->default_str(std::to_string(defaults.network.cols));
        train->add_option("--out", tr.out, "Output directory (default: $IACOLIGHT_OUT_ROOT/train-<config hash>)");

        SweepCommandOptions sw;
        std::size_t s_parallelism = 1;
        std::uint64_t s_seed = 0;
        auto *sweep = app.add_subcommand("sweep", "Grid search over (alpha, beta)");
        sweep->add_option("--config", sw.config, "Sweep config file (default: built-in defaults)");
        sweep->add_option("--out", sw.out, "Output root; results go to <out>/sweep-<hash> (default: $IACOLIGHT_OUT_ROOT)");
        sweep->add_flag("--resume", sw.resume, "Reuse completed cell files");
        auto *o_par = sweep->add_option("--parallelism", s_parallelism, "Override concurrent experiments");
        auto *o_sseed = sweep->add_option("--seed", s_seed, "Override master seed");

        std::string report_in;
        auto *report = app.add_subcommand("report", "Summarize a sweep or training directory");
        report->add_option("--in", report_in, "Sweep or training output directory")->required();

        try
        {
            app.parse(argc, argv);
        }
        catch (const CLI::CallForHelp &)
        {
            out << app.help("", CLI::AppFormatMode::All);
            return kExitOk;
        }
        catch (const CLI::CallForAllHelp &)
        {
            out << app.help("", CLI::AppFormatMode::All);
            return kExitOk;
        }
        catch (const CLI::CallForVersion &)
        {
            out << kToolVersion << '\n';
            return kExitOk;
        }
        catch (const CLI::ParseError &e)
        {
            err << "error: usage: " << e.what() << '\n';
            return kExitUsage;
        }

        try
        {
            if (*gen_net)
                cmd_gen_net(gn, out);
            else if (*gen_flow)
                cmd_gen_flow(gf, out);
            else if (*train)
            {
                if (o_seed->count())
                    tr.overrides.seed = t_seed;
                if (o_episodes->count())
                    tr.overrides.episodes = t_episodes;
                if (o_steps->count())
                    tr.overrides.steps = t_steps;
                if (o_alpha->count())
                    tr.overrides.alpha = t_alpha;
                if (o_beta->count())
                    tr.overrides.beta = t_beta;
                if (o_controller->count())
                    tr.overrides.controller = t_controller;
                if (o_rows->count())
                    tr.overrides.rows = t_rows;
                if (o_cols->count())
                    tr.overrides.cols = t_cols;
                cmd_train(tr, out);
            }
            else if (*sweep)
            {
                if (o_par->count())
                    sw.parallelism = s_parallelism;
                if (o_sseed->count())
                    sw.seed = s_seed;
                cmd_sweep(sw, out);
            }
            else if (*report)
                cmd_report(report_in, out);
            return kExitOk;
        }
        catch (const Error &e)
        {
            err << "error: " << to_string(e.category()) << ": " << e.what() << '\n';
            return exit_code_for(e.category());
        }
        catch (const fs::filesystem_error &e)
        {
            err << "error: io: " << e.what() << '\n';
            return kExitMissingFile;
        }
        catch (const std::exception &e)
        {
            err << "error: internal: " << e.what() << '\n';
            return kExitFailure;
        }
    }

} // namespace iacolight::cli
