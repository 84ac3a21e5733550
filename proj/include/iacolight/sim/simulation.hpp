#pragma once

#include "iacolight/core/error.hpp"
#include "iacolight/sim/flow.hpp"
#include "iacolight/sim/road_network.hpp"
#include "iacolight/sim/signal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace iacolight
{
    struct SimConfig
    {
        double saturation_rate = 0.5; // vehicles per lane per second
        double yellow_s = 3.0;
        double all_red_s = 2.0;
        double tick_s = 1.0;
        std::size_t initial_phase = 0;
        bool record_events = false;

        void validate() const
        {
            if (!(saturation_rate > 0.0) || !std::isfinite(saturation_rate))
                throw InvalidConfigError("sim: saturation_rate must be positive");
            if (!(yellow_s > 0.0) || !(all_red_s >= 0.0) || !std::isfinite(yellow_s) || !std::isfinite(all_red_s))
                throw InvalidConfigError("sim: yellow_s must be positive and all_red_s non-negative");
            if (!(tick_s > 0.0) || !std::isfinite(tick_s))
                throw InvalidConfigError("sim: tick_s must be positive");
        }
    };

    enum class VehicleStatus : std::uint8_t
    {
        Traveling,
        Queued,
        Exited,
    };

    // Only vehicles that have entered are stored, so "pre-entry" is implicit.
    struct Vehicle
    {
        std::size_t id = 0;
        std::size_t flow_index = 0; // route lives in FlowSpec::entries[flow_index]
        std::size_t leg = 0;        // index into the route of the current link
        double entry_time = 0.0;
        std::optional<double> exit_time;
        VehicleStatus status = VehicleStatus::Traveling;
        double ready_time = 0.0;    // when Traveling: arrival time at the stop line
        std::size_t lane = 0;       // when Queued: intersection * 12 + lane index

        friend bool operator==(const Vehicle &, const Vehicle &) = default;
    };

    struct SimState
    {
        double clock = 0.0;
        std::vector<Vehicle> vehicles;
        std::vector<std::deque<std::size_t>> lane_queues;     // per intersection lane, FIFO, front = stop line
        std::vector<std::deque<std::size_t>> link_traveling;  // per link, ordered by ready_time
        std::vector<double> discharge_credit;                 // per intersection lane
        std::vector<SignalState> signals;
        std::size_t entered = 0;
        std::size_t exited = 0;
        std::size_t next_flow_entry = 0;

        std::size_t on_network() const noexcept { return entered - exited; }

        friend bool operator==(const SimState &, const SimState &) = default;
    };

    struct SignalEvent
    {
        std::size_t intersection = 0;
        double time = 0.0;
        Interlock from = Interlock::Green;
        Interlock to = Interlock::Green;
        std::size_t phase = 0;
    };

    struct DischargeEvent
    {
        std::size_t intersection = 0;
        std::size_t lane = 0;
        std::size_t vehicle = 0;
        double tick_start = 0.0;
        double tick_end = 0.0;
        Interlock interlock = Interlock::Green;
        std::size_t phase = 0;
    };

    /// Incoming-lane queue counts of intersection k (12 values, approach-major E, N, W, S).
    inline std::vector<std::size_t> queue_lengths(const SimState &state, std::size_t k)
    {
        if ((k + 1) * kLanesPerIntersection > state.lane_queues.size())
            throw InvalidInputError("queue_lengths: intersection " + std::to_string(k) + " out of range");
        std::vector<std::size_t> out(kLanesPerIntersection);
        for (std::size_t l = 0; l < kLanesPerIntersection; ++l)
            out[l] = state.lane_queues[k * kLanesPerIntersection + l].size();
        return out;
    }

    /// Negative mean queue length over the d entrances.
    inline double extrinsic_reward(std::span<const std::size_t> queues, std::size_t entrances)
    {
        if (entrances == 0)
            throw InvalidConfigError("extrinsic_reward: entrance count must be >= 1");
        const double total = static_cast<double>(std::accumulate(queues.begin(), queues.end(), std::size_t{0}));
        return -(total / static_cast<double>(entrances)) + 0.0; // + 0.0 turns -0 into +0
    }

    /// Mean travel time of exited vehicles. With `at_episode_end`, vehicles still on the
    /// network count with their elapsed time (clock - entry).
    inline double average_travel_time(const SimState &state, bool at_episode_end)
    {
        double total = 0.0;
        std::size_t count = 0;
        for (const Vehicle &v : state.vehicles)
        {
            if (v.exit_time)
            {
                total += *v.exit_time - v.entry_time;
                ++count;
            }
            else if (at_episode_end)
            {
                total += state.clock - v.entry_time;
                ++count;
            }
        }
        if (state.entered == 0 || count == 0)
            throw UndefinedMetricError("average_travel_time: no vehicles to average over");
        return total / static_cast<double>(count);
    }

    /// Point-queue simulation of a signalized grid.
    ///
    /// Vehicles traverse each link in its free-flow time and then join the FIFO queue of the
    /// lane that matches their next turn. Green lanes discharge at the saturation rate; the
    /// fractional discharge capacity is carried between ticks while the lane stays green and
    /// occupied. Right-turn lanes are never gated by the signal.
    class Simulation
    {
    public:
        Simulation(std::shared_ptr<const RoadNetwork> net, std::shared_ptr<const FlowSpec> flow, SimConfig cfg = {})
            : net_(std::move(net)), flow_(std::move(flow)), cfg_(cfg), phases_(default_phases())
        {
            if (!net_)
                throw InvalidConfigError("simulation: network is null");
            if (!flow_)
                flow_ = std::make_shared<const FlowSpec>();
            cfg_.validate();
            if (cfg_.initial_phase >= phases_.size())
                throw InvalidConfigError("simulation: initial_phase out of range");
            validate_flow(*flow_, *net_);
            for (const Phase &p : phases_)
                masks_.push_back(p.lane_mask());
            reset();
        }

        void reset()
        {
            const std::size_t n = net_->intersection_count();
            state_ = SimState{};
            state_.lane_queues.assign(n * kLanesPerIntersection, {});
            state_.link_traveling.assign(net_->links().size(), {});
            state_.discharge_credit.assign(n * kLanesPerIntersection, 0.0);
            SignalState init;
            init.current_phase = init.previous_phase = cfg_.initial_phase;
            state_.signals.assign(n, init);
            signal_events_.clear();
            discharge_events_.clear();
        }

        const SimState &state() const noexcept { return state_; }
        const RoadNetwork &network() const noexcept { return *net_; }
        const FlowSpec &flow() const noexcept { return *flow_; }
        const SimConfig &config() const noexcept { return cfg_; }
        std::size_t phase_count() const noexcept { return phases_.size(); }
        const std::vector<Phase> &phases() const noexcept { return phases_; }

        std::vector<std::size_t> queue_lengths(std::size_t k) const
        {
            if (k >= net_->intersection_count())
                throw InvalidInputError("queue_lengths: intersection " + std::to_string(k) + " out of range");
            return iacolight::queue_lengths(state_, k);
        }

        double average_travel_time(bool at_episode_end) const { return iacolight::average_travel_time(state_, at_episode_end); }

        const std::vector<SignalEvent> &signal_events() const noexcept { return signal_events_; }
        const std::vector<DischargeEvent> &discharge_events() const noexcept { return discharge_events_; }

        /// Whether lane l of intersection k may discharge right now.
        bool lane_is_green(std::size_t k, std::size_t l) const
        {
            if (l % kLanesPerApproach == static_cast<std::size_t>(LaneType::Right))
                return true;
            const SignalState &s = state_.signals[k];
            return s.interlock == Interlock::Green && masks_[s.current_phase][l];
        }

        /// Applies one phase request per intersection and advances the clock by dt.
        /// A request equal to the current phase keeps (or extends) its green; any other
        /// request starts yellow then all-red before the new phase turns green.
        void step(std::span<const std::size_t> joint_action, double dt)
        {
            const std::size_t n = net_->intersection_count();
            if (joint_action.size() != n)
                throw InvalidActionError("step: expected " + std::to_string(n) + " actions, got " +
                                         std::to_string(joint_action.size()));
            for (std::size_t a : joint_action)
                if (a >= phases_.size())
                    throw InvalidActionError("step: action " + std::to_string(a) + " is not a valid phase");
            if (!(dt > 0.0) || !std::isfinite(dt))
                throw InvalidInputError("step: dt must be positive");

            for (std::size_t k = 0; k < n; ++k)
                request_phase(k, joint_action[k]);

            const double start = state_.clock;
            const double end = start + dt;
            while (end - state_.clock > kTimeEps)
            {
                double h = std::min(cfg_.tick_s, end - state_.clock);
                for (const SignalState &s : state_.signals)
                    if (s.interlock != Interlock::Green)
                        h = std::min(h, s.interlock_remaining);
                tick(h);
            }
            state_.clock = end;
        }

    private:
        static constexpr double kTimeEps = 1e-9;

        void request_phase(std::size_t k, std::size_t phase)
        {
            SignalState &s = state_.signals[k];
            if (phase == s.current_phase)
                return;
            if (s.interlock == Interlock::Green)
            {
                s.previous_phase = s.current_phase;
                s.current_phase = phase;
                s.interlock = Interlock::Yellow;
                s.interlock_remaining = cfg_.yellow_s;
                s.phase_elapsed = 0.0;
                log_signal(k, Interlock::Green, Interlock::Yellow);
            }
            else
            {
                // Already clearing the intersection: retarget without restarting the interlock.
                s.current_phase = phase;
            }
        }

        void log_signal(std::size_t k, Interlock from, Interlock to)
        {
            if (cfg_.record_events)
                signal_events_.push_back(SignalEvent{k, state_.clock, from, to, state_.signals[k].current_phase});
        }

        void tick(double h)
        {
            const double t0 = state_.clock;
            const double t1 = t0 + h;
            discharge(t0, t1, h);
            admit(t1);
            arrive(t1);
            advance_signals(h);
            state_.clock = t1;
        }

        void discharge(double t0, double t1, double h)
        {
            const std::size_t n = net_->intersection_count();
            for (std::size_t k = 0; k < n; ++k)
            {
                for (std::size_t l = 0; l < kLanesPerIntersection; ++l)
                {
                    const std::size_t g = k * kLanesPerIntersection + l;
                    auto &queue = state_.lane_queues[g];
                    double &credit = state_.discharge_credit[g];
                    if (queue.empty() || !lane_is_green(k, l))
                    {
                        credit = 0.0;
                        continue;
                    }
                    credit += cfg_.saturation_rate * h;
                    auto count = static_cast<std::size_t>(std::floor(credit + kTimeEps));
                    count = std::min(count, queue.size());
                    for (std::size_t i = 0; i < count; ++i)
                    {
                        const std::size_t vid = queue.front();
                        queue.pop_front();
                        Vehicle &v = state_.vehicles[vid];
                        const auto &route = flow_->entries[v.flow_index].route;
                        ++v.leg;
                        const LinkId next = route[v.leg];
                        v.status = VehicleStatus::Traveling;
                        v.ready_time = t1 + net_->link(next).travel_time_s;
                        state_.link_traveling[next].push_back(vid);
                        if (cfg_.record_events)
                        {
                            const SignalState &s = state_.signals[k];
                            discharge_events_.push_back(DischargeEvent{k, l, vid, t0, t1, s.interlock, s.current_phase});
                        }
                    }
                    credit = queue.empty() ? 0.0 : std::max(0.0, credit - static_cast<double>(count));
                }
            }
        }

        void admit(double t1)
        {
            const auto &entries = flow_->entries;
            while (state_.next_flow_entry < entries.size() && entries[state_.next_flow_entry].t < t1)
            {
                const FlowEntry &e = entries[state_.next_flow_entry];
                Vehicle v;
                v.id = state_.vehicles.size();
                v.flow_index = state_.next_flow_entry;
                v.entry_time = e.t;
                v.ready_time = e.t + net_->link(e.route.front()).travel_time_s;
                state_.link_traveling[e.route.front()].push_back(v.id);
                state_.vehicles.push_back(std::move(v));
                ++state_.entered;
                ++state_.next_flow_entry;
            }
        }

        void arrive(double t1)
        {
            for (std::size_t li = 0; li < state_.link_traveling.size(); ++li)
            {
                auto &on_link = state_.link_traveling[li];
                while (!on_link.empty() && state_.vehicles[on_link.front()].ready_time <= t1 + kTimeEps)
                {
                    const std::size_t vid = on_link.front();
                    on_link.pop_front();
                    Vehicle &v = state_.vehicles[vid];
                    const auto &route = flow_->entries[v.flow_index].route;
                    if (v.leg + 1 == route.size())
                    {
                        v.status = VehicleStatus::Exited;
                        v.exit_time = v.ready_time;
                        ++state_.exited;
                        continue;
                    }
                    const Link &link = net_->link(li);
                    const auto turn = net_->movement(li, route[v.leg + 1]);
                    const std::size_t g = link.to * kLanesPerIntersection + lane_index(net_->approach_of(li), *turn);
                    v.status = VehicleStatus::Queued;
                    v.lane = g;
                    state_.lane_queues[g].push_back(vid);
                }
            }
        }

        void advance_signals(double h)
        {
            for (std::size_t k = 0; k < state_.signals.size(); ++k)
            {
                SignalState &s = state_.signals[k];
                if (s.interlock == Interlock::Green)
                {
                    s.phase_elapsed += h;
                    continue;
                }
                s.interlock_remaining -= h;
                if (s.interlock_remaining > kTimeEps)
                    continue;
                const double t1 = state_.clock + h;
                if (s.interlock == Interlock::Yellow && cfg_.all_red_s > 0.0)
                {
                    s.interlock = Interlock::AllRed;
                    s.interlock_remaining = cfg_.all_red_s;
                    if (cfg_.record_events)
                        signal_events_.push_back(SignalEvent{k, t1, Interlock::Yellow, Interlock::AllRed, s.current_phase});
                }
                else
                {
                    const Interlock from = s.interlock;
                    s.interlock = Interlock::Green;
                    s.interlock_remaining = 0.0;
                    s.phase_elapsed = 0.0;
                    s.previous_phase = s.current_phase;
                    if (cfg_.record_events)
                        signal_events_.push_back(SignalEvent{k, t1, from, Interlock::Green, s.current_phase});
                }
            }
        }

        std::shared_ptr<const RoadNetwork> net_;
        std::shared_ptr<const FlowSpec> flow_;
        SimConfig cfg_;
        std::vector<Phase> phases_;
        std::vector<std::array<bool, kLanesPerIntersection>> masks_;
        SimState state_;
        std::vector<SignalEvent> signal_events_;
        std::vector<DischargeEvent> discharge_events_;
    };

} // namespace iacolight
