#pragma once

#include "iacolight/core/error.hpp"
#include "iacolight/core/text.hpp"

#include <algorithm>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace iacolight
{
    inline constexpr std::size_t kFinalPerformanceWindow = 20;

    struct EpisodeRecord
    {
        std::size_t episode = 0;
        std::optional<double> avg_travel_time_s; // missing when no vehicle entered
        double mean_extrinsic = 0.0;
        double mean_intrinsic = 0.0;
        double mean_shaped = 0.0;
        double epsilon = 0.0;
        std::size_t vehicles_entered = 0;
        std::size_t vehicles_exited = 0;

        friend bool operator==(const EpisodeRecord &, const EpisodeRecord &) = default;
    };

    struct EpisodeMetrics
    {
        std::vector<EpisodeRecord> episodes;

        std::vector<std::optional<double>> travel_times() const
        {
            std::vector<std::optional<double>> out;
            for (const auto &e : episodes)
                out.push_back(e.avg_travel_time_s);
            return out;
        }

        /// Travel-time series, or nullopt when any episode is missing its metric.
        std::optional<std::vector<double>> complete_travel_times() const
        {
            std::vector<double> out;
            for (const auto &e : episodes)
            {
                if (!e.avg_travel_time_s)
                    return std::nullopt;
                out.push_back(*e.avg_travel_time_s);
            }
            return out;
        }

        friend bool operator==(const EpisodeMetrics &, const EpisodeMetrics &) = default;
    };

    /// Mean of the last 20 episodes.
    inline double final_performance(std::span<const double> series)
    {
        if (series.size() < kFinalPerformanceWindow)
            throw InvalidInputError("final_performance: need at least 20 episodes, got " + std::to_string(series.size()));
        double total = 0.0;
        for (double v : series.last(kFinalPerformanceWindow))
            total += v;
        return total / static_cast<double>(kFinalPerformanceWindow);
    }

    struct ConvergenceIndices
    {
        std::optional<std::size_t> loose_index; // suffix max < 1.2 x threshold
        std::optional<std::size_t> tight_index; // suffix max < 1.1 x threshold
        double threshold = 0.0;

        friend bool operator==(const ConvergenceIndices &, const ConvergenceIndices &) = default;
    };

    /// Earliest episodes in [search_lo, search_hi] (0-based, inclusive, clipped to the series)
    /// from which every later episode stays below 1.2x / 1.1x the final performance.
    inline ConvergenceIndices convergence_indices(std::span<const double> series, std::size_t search_lo = 50, std::size_t search_hi = 100)
    {
        if (search_lo > search_hi)
            throw InvalidInputError("convergence_indices: empty search range");
        if (series.size() < search_hi || series.size() < kFinalPerformanceWindow || series.size() <= search_lo)
            throw InvalidInputError("convergence_indices: series of " + std::to_string(series.size()) +
                                    " episodes is too short for the search range");
        ConvergenceIndices out;
        out.threshold = final_performance(series);

        std::vector<double> suffix_max(series.size());
        double running = series.back();
        for (std::size_t i = series.size(); i-- > 0;)
        {
            running = std::max(running, series[i]);
            suffix_max[i] = running;
        }
        const std::size_t hi = std::min(search_hi, series.size() - 1);
        for (std::size_t ep = search_lo; ep <= hi; ++ep)
        {
            if (!out.loose_index && suffix_max[ep] < 1.2 * out.threshold)
                out.loose_index = ep;
            if (!out.tight_index && suffix_max[ep] < 1.1 * out.threshold)
                out.tight_index = ep;
        }
        return out;
    }

    inline std::string format_index(const std::optional<std::size_t> &i) { return i ? std::to_string(*i) : std::string("none"); }

    /// One row per episode: episode,avg_travel_time_s,mean_extrinsic,mean_intrinsic,epsilon
    inline std::string metrics_csv(const EpisodeMetrics &m)
    {
        std::ostringstream out;
        out << "episode,avg_travel_time_s,mean_extrinsic,mean_intrinsic,epsilon\n";
        for (const auto &e : m.episodes)
            out << e.episode << ',' << format_optional(e.avg_travel_time_s) << ',' << format_double(e.mean_extrinsic) << ','
                << format_double(e.mean_intrinsic) << ',' << format_double(e.epsilon) << '\n';
        return out.str();
    }

} // namespace iacolight
