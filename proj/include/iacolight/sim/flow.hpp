#pragma once

#include "iacolight/core/error.hpp"
#include "iacolight/sim/road_network.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace iacolight
{
    struct FlowEntry
    {
        double t = 0.0;
        std::vector<LinkId> route;

        friend bool operator==(const FlowEntry &, const FlowEntry &) = default;
    };

    struct FlowSpec
    {
        std::vector<FlowEntry> entries;

        std::size_t size() const noexcept { return entries.size(); }
        bool empty() const noexcept { return entries.empty(); }

        friend bool operator==(const FlowSpec &, const FlowSpec &) = default;
    };

    /// Stable sort by entry time.
    inline void normalize_flow(FlowSpec &flow)
    {
        std::stable_sort(flow.entries.begin(), flow.entries.end(),
                         [](const FlowEntry &a, const FlowEntry &b)
                         { return a.t < b.t; });
    }

    /// Checks entry times and that every route runs terminal -> ... -> terminal through legal turns.
    inline void validate_flow(const FlowSpec &flow, const RoadNetwork &net)
    {
        double last = 0.0;
        for (std::size_t i = 0; i < flow.entries.size(); ++i)
        {
            const FlowEntry &e = flow.entries[i];
            const std::string where = "flows[" + std::to_string(i) + "]";
            if (!std::isfinite(e.t) || e.t < 0.0)
                throw ValidationError("flow: " + where + ".t must be a finite non-negative time");
            if (e.t < last)
                throw ValidationError("flow: " + where + ".t is earlier than the previous entry");
            last = e.t;
            if (e.route.empty())
                throw ValidationError("flow: " + where + ".route is empty");
            for (std::size_t j = 0; j < e.route.size(); ++j)
                if (e.route[j] >= net.links().size())
                    throw ValidationError("flow: " + where + ".route[" + std::to_string(j) + "] references unknown link " +
                                          std::to_string(e.route[j]));
            if (net.is_intersection(net.link(e.route.front()).from))
                throw ValidationError("flow: " + where + ".route must start on a link leaving a terminal");
            if (net.is_intersection(net.link(e.route.back()).to))
                throw ValidationError("flow: " + where + ".route must end on a link entering a terminal");
            for (std::size_t j = 0; j + 1 < e.route.size(); ++j)
                if (!net.movement(e.route[j], e.route[j + 1]))
                    throw ValidationError("flow: " + where + ".route is not connected at position " + std::to_string(j));
        }
    }

} // namespace iacolight
