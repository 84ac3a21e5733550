#pragma once

#include "iacolight/sim/road_network.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace iacolight
{
    struct Phase
    {
        std::size_t id = 0;
        std::vector<std::pair<Side, LaneType>> green_movements;

        /// Lane mask over the 12 incoming lanes. Right turns are not part of any phase.
        std::array<bool, kLanesPerIntersection> lane_mask() const
        {
            std::array<bool, kLanesPerIntersection> mask{};
            for (const auto &[side, lane] : green_movements)
                mask[lane_index(side, lane)] = true;
            return mask;
        }
    };

    /// E-W straight, N-S straight, E-W left, N-S left.
    inline std::vector<Phase> default_phases()
    {
        return {
            Phase{0, {{Side::East, LaneType::Straight}, {Side::West, LaneType::Straight}}},
            Phase{1, {{Side::North, LaneType::Straight}, {Side::South, LaneType::Straight}}},
            Phase{2, {{Side::East, LaneType::Left}, {Side::West, LaneType::Left}}},
            Phase{3, {{Side::North, LaneType::Left}, {Side::South, LaneType::Left}}},
        };
    }

    enum class Interlock : std::uint8_t
    {
        Green,
        Yellow,
        AllRed,
    };

    struct SignalState
    {
        // Phase that is green, or that turns green once the interlock completes.
        std::size_t current_phase = 0;
        // Phase shown (as yellow) while the interlock runs.
        std::size_t previous_phase = 0;
        double phase_elapsed = 0.0;
        Interlock interlock = Interlock::Green;
        double interlock_remaining = 0.0;

        friend bool operator==(const SignalState &, const SignalState &) = default;
    };

} // namespace iacolight
