#pragma once

#include "iacolight/core/error.hpp"
#include "iacolight/core/random.hpp"
#include "iacolight/experiment/config.hpp"
#include "iacolight/experiment/metrics.hpp"
#include "iacolight/ia/shaping.hpp"
#include "iacolight/io/network_io.hpp"
#include "iacolight/rl/agent.hpp"
#include "iacolight/sim/simulation.hpp"

#include <json.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace iacolight
{
    // Stream keys for derive_seed; each consumer of randomness gets its own stream.
    namespace seed_stream
    {
        inline constexpr std::uint64_t kNetworkInit = 1;
        inline constexpr std::uint64_t kExploration = 2;
        inline constexpr std::uint64_t kReplay = 3;
        inline constexpr std::uint64_t kFlow = 4;
    } // namespace seed_stream

    /// Thrown when training hits a numeric failure; carries the episodes completed so far.
    class ExperimentAborted : public Error
    {
    public:
        ExperimentAborted(const std::string &message, EpisodeMetrics partial)
            : Error(ErrorCategory::Numeric, message), partial_(std::move(partial))
        {
        }

        const EpisodeMetrics &partial() const noexcept { return partial_; }

    private:
        EpisodeMetrics partial_;
    };

    struct RunHooks
    {
        std::function<void(std::size_t episode, std::size_t step, const rl::Transition &)> on_transition;
        std::function<void(const EpisodeRecord &)> on_episode;
    };

    struct ExperimentResult
    {
        EpisodeMetrics metrics;
        std::optional<nn::ParamSet> params; // trained online parameters (DQN controller only)
    };

    inline std::shared_ptr<const RoadNetwork> make_network(const ExperimentConfig &cfg)
    {
        if (!cfg.network.roadnet_file.empty())
            return std::make_shared<const RoadNetwork>(load_roadnet(cfg.network.roadnet_file));
        return std::make_shared<const RoadNetwork>(build_grid(cfg.network.rows, cfg.network.cols, cfg.network.grid));
    }

    inline ArrivalProfile arrival_profile(const ExperimentConfig &cfg)
    {
        ArrivalProfile p;
        p.bin_width_s = cfg.flow.bin_width_s;
        p.mean_per_bin = {cfg.flow.mean_per_bin};
        p.std_per_bin = {cfg.flow.std_per_bin};
        p.duration_s = cfg.flow_duration();
        p.origin_weights = cfg.flow.origin_weights;
        p.destination_weights = cfg.flow.destination_weights;
        return p;
    }

    inline rl::Observation observe(const Simulation &sim, std::size_t k)
    {
        return rl::Observation{sim.queue_lengths(k), sim.state().signals[k].current_phase, sim.phase_count()};
    }

    inline nn::NodeFeatures observe_all(const Simulation &sim, double queue_cap)
    {
        nn::NodeFeatures out;
        for (std::size_t k = 0; k < sim.network().intersection_count(); ++k)
            out.push_back(rl::encode(observe(sim, k), queue_cap));
        return out;
    }

    /// Trains (or, for the fixed-time controller, just runs) one experiment.
    ///
    /// Each step: observe -> encode -> Q values -> epsilon-greedy joint action -> simulate dt ->
    /// extrinsic rewards -> reward memory -> intrinsic rewards -> shaped rewards -> store the
    /// transition -> one DQN update once the replay buffer holds a batch. The target network
    /// is synchronized every `target_sync_episodes` episodes.
    inline ExperimentResult run_experiment(const ExperimentConfig &cfg, const RunHooks &hooks = {})
    {
        cfg.validate();
        const auto net = make_network(cfg);
        const std::size_t agents = net->intersection_count();
        const nn::Neighborhoods nbrs = net->neighborhoods();
        const ia::IAConfig ia_cfg = cfg.effective_ia();
        const bool neutral_ia = ia_cfg.alpha == 0.0 && ia_cfg.beta == 0.0 && ia_cfg.alpha_per_agent.empty() && ia_cfg.beta_per_agent.empty();
        if (cfg.shaping_enabled && agents < 2 && !neutral_ia)
            throw InvalidConfigError("config: inequity aversion needs at least two intersections");

        const bool learning = cfg.controller == Controller::Dqn;
        auto policy = rl::AgentPolicyState::create(cfg.net_config(), derive_seed(cfg.seed, {seed_stream::kNetworkInit}), cfg.agent.adam);
        rl::ReplayBuffer<rl::Transition> replay(cfg.agent.replay_capacity);
        Rng explore_rng(derive_seed(cfg.seed, {seed_stream::kExploration}));
        Rng replay_rng(derive_seed(cfg.seed, {seed_stream::kReplay}));
        const rl::EpsilonSchedule schedule{cfg.agent.epsilon_start, cfg.agent.epsilon_end, cfg.agent.epsilon_decay_fraction,
                                           cfg.episodes * cfg.steps_per_episode};

        std::shared_ptr<const FlowSpec> fixed_flow;
        if (!cfg.flow.flow_file.empty())
            fixed_flow = std::make_shared<const FlowSpec>(load_flow(cfg.flow.flow_file, *net));
        else if (cfg.flow.mode == FlowMode::Replay)
            fixed_flow = std::make_shared<const FlowSpec>(generate_flow(arrival_profile(cfg), *net, derive_seed(cfg.seed, {seed_stream::kFlow, 0})));

        ExperimentResult result;
        std::size_t global_step = 0;
        std::vector<std::size_t> actions(agents, 0);
        std::vector<double> extrinsic(agents, 0.0);

        for (std::size_t ep = 0; ep < cfg.episodes; ++ep)
        {
            try
            {
                auto flow = fixed_flow ? fixed_flow
                                       : std::make_shared<const FlowSpec>(
                                             generate_flow(arrival_profile(cfg), *net, derive_seed(cfg.seed, {seed_stream::kFlow, ep})));
                Simulation sim(net, flow, cfg.sim);
                ia::SmoothedMemory memory(agents);
                nn::NodeFeatures features = observe_all(sim, cfg.agent.queue_cap);

                EpisodeRecord rec;
                rec.episode = ep;
                rec.epsilon = learning ? schedule.value(global_step) : 0.0;
                double sum_e = 0.0, sum_i = 0.0, sum_r = 0.0;

                for (std::size_t step = 0; step < cfg.steps_per_episode; ++step, ++global_step)
                {
                    if (learning)
                    {
                        const double eps = schedule.value(global_step);
                        const nn::NodeFeatures q = rl::q_values(policy, features, nbrs);
                        for (std::size_t k = 0; k < agents; ++k)
                            actions[k] = rl::select_action(q[k], eps, explore_rng);
                    }
                    else
                    {
                        const std::size_t phase = (step / cfg.fixed_time_phase_steps) % sim.phase_count();
                        std::fill(actions.begin(), actions.end(), phase);
                    }

                    sim.step(actions, cfg.dt_s);
                    nn::NodeFeatures next = observe_all(sim, cfg.agent.queue_cap);
                    for (std::size_t k = 0; k < agents; ++k)
                        extrinsic[k] = extrinsic_reward(sim.queue_lengths(k), net->entrances(k));

                    std::vector<double> intrinsic(agents, 0.0);
                    std::vector<double> rewards;
                    if (cfg.shaping_enabled)
                    {
                        memory = ia::update_memory(memory, extrinsic, ia_cfg);
                        if (agents >= 2)
                            intrinsic = ia::intrinsic_rewards(memory, ia_cfg, agents);
                        rewards = ia::shaped_rewards(extrinsic, intrinsic, ia_cfg);
                    }
                    else
                    {
                        rewards.resize(agents);
                        for (std::size_t k = 0; k < agents; ++k)
                            rewards[k] = ia_cfg.mix_e * extrinsic[k];
                    }

                    for (std::size_t k = 0; k < agents; ++k)
                    {
                        sum_e += extrinsic[k];
                        sum_i += intrinsic[k];
                        sum_r += rewards[k];
                    }

                    if (learning)
                    {
                        rl::Transition tr{features, actions, rewards, next};
                        if (hooks.on_transition)
                            hooks.on_transition(ep, step, tr);
                        replay.push(std::move(tr));
                        if (replay.size() >= cfg.agent.batch_size && global_step % cfg.agent.update_every_steps == 0)
                        {
                            const auto batch = replay.sample(cfg.agent.batch_size, replay_rng);
                            rl::dqn_update(policy, batch, nbrs, cfg.gamma, cfg.agent.lr);
                        }
                    }
                    features = std::move(next);
                }

                if (learning && (ep + 1) % cfg.agent.target_sync_episodes == 0)
                    rl::sync_target(policy);

                const double denom = static_cast<double>(cfg.steps_per_episode * agents);
                rec.mean_extrinsic = sum_e / denom;
                rec.mean_intrinsic = sum_i / denom;
                rec.mean_shaped = sum_r / denom;
                rec.vehicles_entered = sim.state().entered;
                rec.vehicles_exited = sim.state().exited;
                try
                {
                    rec.avg_travel_time_s = sim.average_travel_time(true);
                }
                catch (const UndefinedMetricError &)
                {
                    rec.avg_travel_time_s.reset();
                }
                result.metrics.episodes.push_back(rec);
                if (hooks.on_episode)
                    hooks.on_episode(rec);
            }
            catch (const NumericError &e)
            {
                throw ExperimentAborted(std::string("episode ") + std::to_string(ep) + ": " + e.what(), result.metrics);
            }
        }
        if (learning)
            result.params = std::move(policy.online);
        return result;
    }

    struct ExperimentSummary
    {
        std::string config_hash;
        std::size_t episodes = 0;
        std::optional<double> final_performance;
        std::optional<ConvergenceIndices> convergence;
        std::string status = "complete";
        std::string error;
        std::vector<std::optional<double>> travel_times; // per episode; not part of the JSON summary
    };

    /// Final performance and convergence indices, where the series is long and complete enough.
    inline ExperimentSummary summarize(const EpisodeMetrics &metrics, const ExperimentConfig &cfg)
    {
        ExperimentSummary s;
        s.config_hash = config_hash(cfg);
        s.episodes = metrics.episodes.size();
        s.travel_times = metrics.travel_times();
        const auto series = metrics.complete_travel_times();
        if (series && series->size() >= kFinalPerformanceWindow)
        {
            s.final_performance = final_performance(*series);
            if (series->size() >= cfg.convergence_search_hi && series->size() > cfg.convergence_search_lo)
                s.convergence = convergence_indices(*series, cfg.convergence_search_lo, cfg.convergence_search_hi);
        }
        return s;
    }

    inline nlohmann::json to_json(const ExperimentSummary &s)
    {
        using nlohmann::json;
        json j;
        j["config_hash"] = s.config_hash;
        j["episodes"] = s.episodes;
        j["final_performance"] = s.final_performance ? json(*s.final_performance) : json(nullptr);
        if (s.convergence)
        {
            auto idx = [](const std::optional<std::size_t> &i)
            { return i ? json(*i) : json(nullptr); };
            j["convergence"] = {{"threshold", s.convergence->threshold},
                                {"loose_index", idx(s.convergence->loose_index)},
                                {"tight_index", idx(s.convergence->tight_index)}};
        }
        else
            j["convergence"] = nullptr;
        j["status"] = s.status;
        if (!s.error.empty())
            j["error"] = s.error;
        return j;
    }

} // namespace iacolight
