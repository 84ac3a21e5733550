#pragma once

#include "iacolight/core/error.hpp"
#include "iacolight/core/random.hpp"
#include "iacolight/core/text.hpp"
#include "iacolight/experiment/config.hpp"
#include "iacolight/experiment/runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace iacolight
{
    inline constexpr int kSweepSchemaVersion = 1;

    struct AxisRange
    {
        double lo = -1.0;
        double hi = 1.0;
        double step = 0.2;

        void validate(const std::string &name) const
        {
            if (!std::isfinite(lo) || !std::isfinite(hi) || !std::isfinite(step))
                throw InvalidConfigError("sweep: " + name + " range must be finite");
            if (!(step > 0.0))
                throw InvalidConfigError("sweep: " + name + " step must be positive");
            if (lo > hi)
                throw InvalidConfigError("sweep: " + name + " lo must not exceed hi");
        }

        friend bool operator==(const AxisRange &, const AxisRange &) = default;
    };

    namespace sweep_detail
    {
        // Number of decimals needed to write `step` exactly (capped at 12).
        inline int step_decimals(double step)
        {
            double scale = 1.0;
            for (int d = 0; d <= 12; ++d, scale *= 10.0)
            {
                const double scaled = step * scale;
                if (std::abs(scaled - std::round(scaled)) < 1e-9 * std::max(1.0, scaled))
                    return d;
            }
            return 12;
        }
    } // namespace sweep_detail

    /// lo + k * step for k = 0.., rounded to the step's decimal precision.
    inline std::vector<double> axis_values(const AxisRange &r)
    {
        r.validate("axis");
        const auto count = static_cast<std::size_t>(std::floor((r.hi - r.lo) / r.step + 1e-9)) + 1;
        const double scale = std::pow(10.0, sweep_detail::step_decimals(r.step));
        std::vector<double> out;
        out.reserve(count);
        for (std::size_t k = 0; k < count; ++k)
            out.push_back(std::round((r.lo + static_cast<double>(k) * r.step) * scale) / scale + 0.0);
        return out;
    }

    struct SweepConfig
    {
        AxisRange alpha;
        AxisRange beta;
        std::size_t repetitions = 3;
        std::size_t parallelism = 1;
        ExperimentConfig base;

        void validate() const
        {
            alpha.validate("alpha");
            beta.validate("beta");
            if (repetitions < 1)
                throw InvalidConfigError("sweep: repetitions must be >= 1");
            if (parallelism < 1)
                throw InvalidConfigError("sweep: parallelism must be >= 1");
            base.validate();
        }
    };

    struct GridCell
    {
        std::size_t alpha_index = 0;
        std::size_t beta_index = 0;
        double alpha = 0.0;
        double beta = 0.0;
    };

    /// Cartesian product of the two axes, alpha-major.
    inline std::vector<GridCell> enumerate_grid(const SweepConfig &cfg)
    {
        cfg.alpha.validate("alpha");
        cfg.beta.validate("beta");
        const auto as = axis_values(cfg.alpha);
        const auto bs = axis_values(cfg.beta);
        std::vector<GridCell> out;
        out.reserve(as.size() * bs.size());
        for (std::size_t i = 0; i < as.size(); ++i)
            for (std::size_t j = 0; j < bs.size(); ++j)
                out.push_back(GridCell{i, j, as[i], bs[j]});
        return out;
    }

    inline std::uint64_t cell_seed(std::uint64_t master, std::size_t alpha_index, std::size_t beta_index, std::size_t repetition)
    {
        return derive_seed(master, {alpha_index, beta_index, repetition});
    }

    /// The experiment one (cell, repetition) pair runs.
    inline ExperimentConfig cell_experiment(const SweepConfig &cfg, const GridCell &cell, std::size_t repetition)
    {
        ExperimentConfig c = cfg.base;
        c.ia.alpha = cell.alpha;
        c.ia.beta = cell.beta;
        c.seed = cell_seed(cfg.base.seed, cell.alpha_index, cell.beta_index, repetition);
        c.repetition = repetition;
        return c;
    }

    struct RepetitionResult
    {
        std::size_t repetition = 0;
        std::uint64_t seed = 0;
        bool ok = false;
        std::optional<double> final_performance;
        std::optional<ConvergenceIndices> convergence;
        std::vector<std::optional<double>> travel_times;
        std::string error;
    };

    struct SweepCellResult
    {
        GridCell cell;
        std::vector<RepetitionResult> repetitions;
        double mean = std::numeric_limits<double>::quiet_NaN();
        double std = std::numeric_limits<double>::quiet_NaN(); // unbiased; NaN when n < 2
        std::size_t n = 0;                                     // repetitions with a final performance

        bool complete() const
        {
            return std::all_of(repetitions.begin(), repetitions.end(), [](const RepetitionResult &r) { return r.ok; });
        }
    };

    /// Mean and unbiased standard deviation of the available final performances.
    inline void aggregate(SweepCellResult &r)
    {
        std::vector<double> xs;
        for (const auto &rep : r.repetitions)
            if (rep.final_performance)
                xs.push_back(*rep.final_performance);
        r.n = xs.size();
        r.mean = std::numeric_limits<double>::quiet_NaN();
        r.std = std::numeric_limits<double>::quiet_NaN();
        if (xs.empty())
            return;
        double sum = 0.0;
        for (double x : xs)
            sum += x;
        r.mean = sum / static_cast<double>(xs.size());
        if (xs.size() >= 2)
        {
            double ss = 0.0;
            for (double x : xs)
                ss += (x - r.mean) * (x - r.mean);
            r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
        }
    }

    /// Runs one experiment and reduces it to what the sweep keeps.
    using ExperimentFn = std::function<ExperimentSummary(const ExperimentConfig &)>;

    inline ExperimentSummary run_and_summarize(const ExperimentConfig &cfg)
    {
        return summarize(run_experiment(cfg).metrics, cfg);
    }

    // ---- serialization ----

    inline nlohmann::json to_json(const AxisRange &r) { return {{"lo", r.lo}, {"hi", r.hi}, {"step", r.step}}; }

    inline nlohmann::json to_json(const SweepConfig &c, bool include_parallelism = true)
    {
        nlohmann::json j = to_json(c.base);
        nlohmann::json s = {{"alpha", to_json(c.alpha)}, {"beta", to_json(c.beta)}, {"repetitions", c.repetitions}};
        if (include_parallelism)
            s["parallelism"] = c.parallelism;
        j["sweep"] = s;
        return j;
    }

    /// Sweep identity; the parallelism level does not change results and is left out.
    inline std::string sweep_hash(const SweepConfig &c) { return to_hex(fnv1a64(to_json(c, false).dump())); }

    /// Overlays a document holding ExperimentConfig keys plus an optional "sweep" object.
    inline void apply_json(const nlohmann::json &j, SweepConfig &c, const std::string &where = "config")
    {
        if (!j.is_object())
            throw InvalidConfigError(where + ": expected an object");
        nlohmann::json rest = j;
        if (auto it = rest.find("sweep"); it != rest.end())
        {
            config_detail::ObjectReader r(*it, where + ".sweep");
            auto axis = [&](const char *key, AxisRange &out)
            {
                if (const auto *a = r.object(key))
                {
                    config_detail::ObjectReader s(*a, r.path(key));
                    s.get("lo", out.lo);
                    s.get("hi", out.hi);
                    s.get("step", out.step);
                    s.finish();
                }
            };
            axis("alpha", c.alpha);
            axis("beta", c.beta);
            r.get("repetitions", c.repetitions);
            r.get("parallelism", c.parallelism);
            r.finish();
            rest.erase("sweep");
        }
        apply_json(rest, c.base, where);
    }

    inline SweepConfig load_sweep_config(const std::filesystem::path &path)
    {
        SweepConfig c;
        apply_json(json_detail::parse(json_detail::read_text(path), path.string()), c, path.string());
        c.validate();
        return c;
    }

    inline nlohmann::json to_json(const RepetitionResult &r)
    {
        using nlohmann::json;
        json j;
        j["repetition"] = r.repetition;
        j["seed"] = r.seed;
        j["status"] = r.ok ? "complete" : "failed";
        j["final_performance"] = r.final_performance ? json(*r.final_performance) : json(nullptr);
        if (r.convergence)
        {
            auto idx = [](const std::optional<std::size_t> &i) { return i ? json(*i) : json(nullptr); };
            j["convergence"] = {{"threshold", r.convergence->threshold},
                                {"loose_index", idx(r.convergence->loose_index)},
                                {"tight_index", idx(r.convergence->tight_index)}};
        }
        else
            j["convergence"] = nullptr;
        j["travel_times"] = json::array();
        for (const auto &t : r.travel_times)
            j["travel_times"].push_back(t ? json(*t) : json(nullptr));
        if (!r.error.empty())
            j["error"] = r.error;
        return j;
    }

    inline nlohmann::json to_json(const SweepCellResult &r)
    {
        using nlohmann::json;
        json j;
        j["alpha"] = r.cell.alpha;
        j["beta"] = r.cell.beta;
        j["alpha_index"] = r.cell.alpha_index;
        j["beta_index"] = r.cell.beta_index;
        j["status"] = r.complete() ? "complete" : "failed";
        j["repetitions"] = json::array();
        for (const auto &rep : r.repetitions)
            j["repetitions"].push_back(to_json(rep));
        j["mean_tt_s"] = std::isnan(r.mean) ? json(nullptr) : json(r.mean);
        j["std_tt_s"] = std::isnan(r.std) ? json(nullptr) : json(r.std);
        j["n"] = r.n;
        return j;
    }

    inline SweepCellResult cell_result_from_json(const nlohmann::json &j, const std::string &where)
    {
        using nlohmann::json;
        try
        {
            SweepCellResult r;
            r.cell.alpha = j.at("alpha").get<double>();
            r.cell.beta = j.at("beta").get<double>();
            r.cell.alpha_index = j.at("alpha_index").get<std::size_t>();
            r.cell.beta_index = j.at("beta_index").get<std::size_t>();
            for (const json &rj : j.at("repetitions"))
            {
                RepetitionResult rep;
                rep.repetition = rj.at("repetition").get<std::size_t>();
                rep.seed = rj.at("seed").get<std::uint64_t>();
                rep.ok = rj.at("status").get<std::string>() == "complete";
                if (!rj.at("final_performance").is_null())
                    rep.final_performance = rj.at("final_performance").get<double>();
                if (const json &cj = rj.at("convergence"); !cj.is_null())
                {
                    ConvergenceIndices ci;
                    ci.threshold = cj.at("threshold").get<double>();
                    if (!cj.at("loose_index").is_null())
                        ci.loose_index = cj.at("loose_index").get<std::size_t>();
                    if (!cj.at("tight_index").is_null())
                        ci.tight_index = cj.at("tight_index").get<std::size_t>();
                    rep.convergence = ci;
                }
                if (rj.contains("travel_times"))
                    for (const json &t : rj.at("travel_times"))
                        rep.travel_times.push_back(t.is_null() ? std::nullopt : std::optional<double>(t.get<double>()));
                if (rj.contains("error"))
                    rep.error = rj.at("error").get<std::string>();
                r.repetitions.push_back(std::move(rep));
            }
            aggregate(r);
            return r;
        }
        catch (const json::exception &e)
        {
            throw ValidationError(where + ": malformed cell result (" + e.what() + ")");
        }
    }

    inline std::string cell_file_name(const GridCell &c)
    {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "cell_a%02zu_b%02zu.json", c.alpha_index, c.beta_index);
        return buf;
    }

    /// header alpha,beta,mean_tt_s,std_tt_s,n; rows sorted by (alpha, beta).
    inline std::string emit_heatmap(std::vector<SweepCellResult> results)
    {
        std::sort(results.begin(), results.end(), [](const SweepCellResult &a, const SweepCellResult &b)
                  { return std::pair(a.cell.alpha, a.cell.beta) < std::pair(b.cell.alpha, b.cell.beta); });
        std::ostringstream out;
        out << "alpha,beta,mean_tt_s,std_tt_s,n\n";
        for (const auto &r : results)
            out << format_double(r.cell.alpha) << ',' << format_double(r.cell.beta) << ',' << format_double(r.mean) << ','
                << format_double(r.std) << ',' << r.n << '\n';
        return out.str();
    }

    struct SweepOptions
    {
        bool resume = true;
    };

    struct SweepOutcome
    {
        std::filesystem::path directory;
        std::vector<SweepCellResult> cells; // grid order
        std::size_t experiments_run = 0;    // (cell, repetition) pairs executed in this invocation
        std::size_t cells_skipped = 0;      // reused from an earlier invocation
    };

    inline std::filesystem::path sweep_directory(const SweepConfig &cfg, const std::filesystem::path &out_dir)
    {
        return out_dir / ("sweep-" + sweep_hash(cfg));
    }

    /// Runs every (cell, repetition), persisting one file per cell plus a manifest and the heatmap.
    /// With `resume`, cells whose file records a completed run are loaded instead of recomputed.
    inline SweepOutcome run_sweep(const SweepConfig &cfg, const std::filesystem::path &out_dir, SweepOptions options = {},
                                  ExperimentFn fn = run_and_summarize)
    {
        namespace fs = std::filesystem;
        using nlohmann::json;
        cfg.validate();
        const auto grid = enumerate_grid(cfg);

        SweepOutcome outcome;
        outcome.directory = sweep_directory(cfg, out_dir);
        const fs::path cells_dir = outcome.directory / "cells";
        fs::create_directories(cells_dir);
        json_detail::write_text(outcome.directory / "sweep_config.json", to_json(cfg).dump(2) + "\n");

        outcome.cells.resize(grid.size());
        std::vector<std::string> status(grid.size(), "pending");
        std::vector<std::size_t> todo;
        for (std::size_t c = 0; c < grid.size(); ++c)
        {
            const fs::path file = cells_dir / cell_file_name(grid[c]);
            if (options.resume && fs::exists(file))
            {
                SweepCellResult prev = cell_result_from_json(json_detail::parse(json_detail::read_text(file), file.string()), file.string());
                if (prev.complete() && prev.repetitions.size() == cfg.repetitions)
                {
                    outcome.cells[c] = std::move(prev);
                    status[c] = "complete";
                    ++outcome.cells_skipped;
                    continue;
                }
            }
            todo.push_back(c);
        }

        std::mutex manifest_mutex;
        auto write_manifest = [&]
        {
            json m;
            m["schema_version"] = kSweepSchemaVersion;
            m["sweep_hash"] = sweep_hash(cfg);
            m["cells_total"] = grid.size();
            m["experiments_total"] = grid.size() * cfg.repetitions;
            std::size_t done = 0;
            m["cells"] = json::array();
            for (std::size_t c = 0; c < grid.size(); ++c)
            {
                done += status[c] == "complete";
                m["cells"].push_back({{"alpha", grid[c].alpha},
                                      {"beta", grid[c].beta},
                                      {"status", status[c]},
                                      {"file", "cells/" + cell_file_name(grid[c])}});
            }
            m["cells_complete"] = done;
            json_detail::write_text(outcome.directory / "manifest.json", m.dump(2) + "\n");
        };
        {
            std::lock_guard lock(manifest_mutex);
            write_manifest();
        }

        std::atomic<std::size_t> next{0};
        std::atomic<std::size_t> runs{0};
        auto worker = [&]
        {
            for (std::size_t t = next++; t < todo.size(); t = next++)
            {
                const std::size_t c = todo[t];
                SweepCellResult r;
                r.cell = grid[c];
                for (std::size_t rep = 0; rep < cfg.repetitions; ++rep)
                {
                    const ExperimentConfig ec = cell_experiment(cfg, grid[c], rep);
                    RepetitionResult rr;
                    rr.repetition = rep;
                    rr.seed = ec.seed;
                    try
                    {
                        const ExperimentSummary s = fn(ec);
                        rr.final_performance = s.final_performance;
                        rr.convergence = s.convergence;
                        rr.travel_times = s.travel_times;
                        rr.ok = s.final_performance.has_value();
                        if (!rr.ok)
                            rr.error = "undefined-metric: final performance unavailable";
                    }
                    catch (const Error &e)
                    {
                        rr.error = std::string(to_string(e.category())) + ": " + e.what();
                    }
                    catch (const std::exception &e)
                    {
                        rr.error = std::string("internal: ") + e.what();
                    }
                    ++runs;
                    r.repetitions.push_back(std::move(rr));
                }
                aggregate(r);
                json_detail::write_text(cells_dir / cell_file_name(grid[c]), to_json(r).dump(2) + "\n");
                std::lock_guard lock(manifest_mutex);
                status[c] = r.complete() ? "complete" : "failed";
                outcome.cells[c] = std::move(r);
                write_manifest();
            }
        };

        const std::size_t threads = std::min(cfg.parallelism, std::max<std::size_t>(todo.size(), 1));
        if (threads <= 1)
            worker();
        else
        {
            std::vector<std::thread> pool;
            for (std::size_t i = 0; i < threads; ++i)
                pool.emplace_back(worker);
            for (auto &t : pool)
                t.join();
        }
        outcome.experiments_run = runs;
        json_detail::write_text(outcome.directory / "heatmap.csv", emit_heatmap(outcome.cells));
        return outcome;
    }

    /// Loads every cell file of a finished (or partial) sweep directory, in (alpha, beta) order.
    inline std::vector<SweepCellResult> load_sweep_cells(const std::filesystem::path &sweep_dir)
    {
        namespace fs = std::filesystem;
        const fs::path cells_dir = sweep_dir / "cells";
        if (!fs::is_directory(cells_dir))
            throw IoError("no cells directory under '" + sweep_dir.string() + "'");
        std::vector<fs::path> files;
        for (const auto &entry : fs::directory_iterator(cells_dir))
            if (entry.path().extension() == ".json")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        std::vector<SweepCellResult> out;
        for (const auto &f : files)
            out.push_back(cell_result_from_json(json_detail::parse(json_detail::read_text(f), f.string()), f.string()));
        std::sort(out.begin(), out.end(), [](const SweepCellResult &a, const SweepCellResult &b)
                  { return std::pair(a.cell.alpha, a.cell.beta) < std::pair(b.cell.alpha, b.cell.beta); });
        return out;
    }

    /// Episode-wise mean travel time over the repetitions, or nullopt if any repetition is
    /// incomplete or the series lengths differ.
    inline std::optional<std::vector<double>> mean_curve(const SweepCellResult &r)
    {
        if (r.repetitions.empty())
            return std::nullopt;
        const std::size_t len = r.repetitions.front().travel_times.size();
        std::vector<double> out(len, 0.0);
        for (const auto &rep : r.repetitions)
        {
            if (rep.travel_times.size() != len)
                return std::nullopt;
            for (std::size_t e = 0; e < len; ++e)
            {
                if (!rep.travel_times[e])
                    return std::nullopt;
                out[e] += *rep.travel_times[e];
            }
        }
        for (double &v : out)
            v /= static_cast<double>(r.repetitions.size());
        return out;
    }

    /// Cell with the minimal mean final performance; ties go to the smaller (alpha, beta).
    inline std::optional<SweepCellResult> best_cell(const std::vector<SweepCellResult> &cells)
    {
        std::optional<SweepCellResult> best;
        for (const auto &c : cells)
        {
            if (c.n == 0 || std::isnan(c.mean))
                continue;
            if (!best || c.mean < best->mean ||
                (c.mean == best->mean && std::pair(c.cell.alpha, c.cell.beta) < std::pair(best->cell.alpha, best->cell.beta)))
                best = c;
        }
        return best;
    }

} // namespace iacolight
