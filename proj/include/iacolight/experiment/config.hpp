#pragma once

#include "iacolight/core/error.hpp"
#include "iacolight/core/text.hpp"
#include "iacolight/ia/shaping.hpp"
#include "iacolight/io/network_io.hpp"
#include "iacolight/nn/adam.hpp"
#include "iacolight/nn/q_network.hpp"
#include "iacolight/sim/road_network.hpp"
#include "iacolight/sim/simulation.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace iacolight
{
    inline constexpr int kConfigSchemaVersion = 1;

    enum class Controller
    {
        Dqn,
        FixedTime, // cycles the phases in order, holding each for fixed_time_phase_steps steps
    };

    enum class FlowMode
    {
        Resample, // fresh synthetic flow per episode, seeded by (seed, episode)
        Replay,   // one flow reused for every episode
    };

    struct NetworkSource
    {
        std::string roadnet_file; // when set, rows/cols/grid are ignored
        std::size_t rows = 4;
        std::size_t cols = 4;
        GridOptions grid;
    };

    struct FlowSource
    {
        std::string flow_file; // when set, the file is replayed every episode
        FlowMode mode = FlowMode::Resample;
        double bin_width_s = 300.0;
        double mean_per_bin = 526.63;
        double std_per_bin = 86.70;
        double duration_s = 0.0; // 0 means steps_per_episode * dt_s
        std::vector<double> origin_weights;
        std::vector<double> destination_weights;
    };

    struct AgentConfig
    {
        std::size_t hidden = 20;
        std::size_t gat_layers = 1;
        std::size_t heads = 5;
        double lr = 1e-3;
        std::size_t batch_size = 32;
        std::size_t replay_capacity = 10000;
        double epsilon_start = 0.8;
        double epsilon_end = 0.05;
        double epsilon_decay_fraction = 0.6;
        double queue_cap = 30.0;
        std::size_t target_sync_episodes = 1;
        std::size_t update_every_steps = 1;
        nn::AdamConfig adam;
    };

    struct ExperimentConfig
    {
        NetworkSource network;
        FlowSource flow;
        SimConfig sim;
        std::size_t episodes = 100;
        std::size_t steps_per_episode = 1440;
        double dt_s = 10.0;
        double gamma = 0.8; // discount; also the gamma of the reward memory decay
        ia::IAConfig ia;
        bool shaping_enabled = true;
        AgentConfig agent;
        Controller controller = Controller::Dqn;
        std::size_t fixed_time_phase_steps = 3;
        std::uint64_t seed = 0;
        std::size_t repetition = 0;
        std::size_t convergence_search_lo = 50;
        std::size_t convergence_search_hi = 100;

        double flow_duration() const { return flow.duration_s > 0.0 ? flow.duration_s : static_cast<double>(steps_per_episode) * dt_s; }

        nn::NetConfig net_config() const
        {
            nn::NetConfig n;
            n.input_dim = kLanesPerIntersection + 4;
            n.hidden = agent.hidden;
            n.gat_layers = agent.gat_layers;
            n.heads = agent.heads;
            n.actions = 4;
            return n;
        }

        ia::IAConfig effective_ia() const
        {
            ia::IAConfig c = ia;
            c.gamma = gamma;
            return c;
        }

        void validate() const
        {
            if (episodes < 1)
                throw InvalidConfigError("config: episodes must be >= 1");
            if (steps_per_episode < 1)
                throw InvalidConfigError("config: steps_per_episode must be >= 1");
            if (!(dt_s > 0.0) || !std::isfinite(dt_s))
                throw InvalidConfigError("config: dt_s must be positive");
            if (!(gamma >= 0.0 && gamma <= 1.0))
                throw InvalidConfigError("config: gamma must lie in [0, 1]");
            if (network.roadnet_file.empty() && (network.rows == 0 || network.cols == 0))
                throw InvalidConfigError("config: network rows and cols must be >= 1");
            if (agent.batch_size == 0 || agent.replay_capacity == 0 || agent.target_sync_episodes == 0 || agent.update_every_steps == 0)
                throw InvalidConfigError("config: batch_size, replay_capacity, target_sync_episodes and update_every_steps must be >= 1");
            if (!(agent.lr > 0.0) || !std::isfinite(agent.lr))
                throw InvalidConfigError("config: lr must be positive");
            for (double e : {agent.epsilon_start, agent.epsilon_end})
                if (!(e >= 0.0 && e <= 1.0))
                    throw InvalidConfigError("config: epsilon values must lie in [0, 1]");
            if (!(agent.epsilon_decay_fraction >= 0.0 && agent.epsilon_decay_fraction <= 1.0))
                throw InvalidConfigError("config: epsilon_decay_fraction must lie in [0, 1]");
            if (!(agent.queue_cap > 0.0))
                throw InvalidConfigError("config: queue_cap must be positive");
            if (fixed_time_phase_steps == 0)
                throw InvalidConfigError("config: fixed_time_phase_steps must be >= 1");
            if (convergence_search_lo > convergence_search_hi)
                throw InvalidConfigError("config: convergence search range is empty");
            sim.validate();
            effective_ia().validate();
            net_config().validate();
        }
    };

    inline std::string to_string(Controller c) { return c == Controller::Dqn ? "dqn" : "fixed_time"; }
    inline std::string to_string(FlowMode m) { return m == FlowMode::Resample ? "resample" : "replay"; }

    namespace config_detail
    {
        using nlohmann::json;

        /// Reads optional keys from a JSON object and rejects keys it was never asked about.
        class ObjectReader
        {
        public:
            ObjectReader(const json &obj, std::string where) : obj_(obj), where_(std::move(where))
            {
                if (!obj_.is_object())
                    throw InvalidConfigError(where_ + ": expected an object");
            }

            void get(const char *key, double &out)
            {
                if (const json *v = find(key))
                {
                    if (!v->is_number())
                        throw InvalidConfigError(path(key) + ": expected a number");
                    out = v->get<double>();
                }
            }

            void get(const char *key, std::size_t &out)
            {
                if (const json *v = find(key))
                {
                    // Documents built in memory hold signed integers; parsed ones are unsigned.
                    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
                        throw InvalidConfigError(path(key) + ": expected a non-negative integer");
                    out = v->get<std::size_t>();
                }
            }

            void get(const char *key, bool &out)
            {
                if (const json *v = find(key))
                {
                    if (!v->is_boolean())
                        throw InvalidConfigError(path(key) + ": expected true or false");
                    out = v->get<bool>();
                }
            }

            void get(const char *key, std::string &out)
            {
                if (const json *v = find(key))
                {
                    if (!v->is_string())
                        throw InvalidConfigError(path(key) + ": expected a string");
                    out = v->get<std::string>();
                }
            }

            void get(const char *key, std::vector<double> &out)
            {
                if (const json *v = find(key))
                {
                    if (!v->is_array())
                        throw InvalidConfigError(path(key) + ": expected an array of numbers");
                    out.clear();
                    for (const json &x : *v)
                    {
                        if (!x.is_number())
                            throw InvalidConfigError(path(key) + ": expected an array of numbers");
                        out.push_back(x.get<double>());
                    }
                }
            }

            const json *object(const char *key)
            {
                const json *v = find(key);
                if (v && !v->is_object())
                    throw InvalidConfigError(path(key) + ": expected an object");
                return v;
            }

            std::string path(const char *key) const { return where_ + "." + key; }

            void finish() const
            {
                for (auto it = obj_.begin(); it != obj_.end(); ++it)
                    if (!seen_.count(it.key()))
                        throw InvalidConfigError(where_ + ": unknown key '" + it.key() + "'");
            }

        private:
            const json *find(const char *key)
            {
                seen_.insert(key);
                auto it = obj_.find(key);
                return it == obj_.end() ? nullptr : &*it;
            }

            const json &obj_;
            std::string where_;
            std::set<std::string> seen_;
        };
    } // namespace config_detail

    inline nlohmann::json to_json(const ExperimentConfig &c)
    {
        using nlohmann::json;
        json j;
        j["schema_version"] = kConfigSchemaVersion;
        j["network"] = {{"roadnet_file", c.network.roadnet_file},
                        {"rows", c.network.rows},
                        {"cols", c.network.cols},
                        {"link_travel_time_s", c.network.grid.link_travel_time_s},
                        {"boundary_travel_time_s", c.network.grid.boundary_travel_time_s}};
        j["flow"] = {{"flow_file", c.flow.flow_file},
                     {"mode", to_string(c.flow.mode)},
                     {"bin_width_s", c.flow.bin_width_s},
                     {"mean_per_bin", c.flow.mean_per_bin},
                     {"std_per_bin", c.flow.std_per_bin},
                     {"duration_s", c.flow.duration_s},
                     {"origin_weights", c.flow.origin_weights},
                     {"destination_weights", c.flow.destination_weights}};
        j["sim"] = {{"saturation_rate", c.sim.saturation_rate},
                    {"yellow_s", c.sim.yellow_s},
                    {"all_red_s", c.sim.all_red_s},
                    {"tick_s", c.sim.tick_s},
                    {"initial_phase", c.sim.initial_phase}};
        j["episodes"] = c.episodes;
        j["steps_per_episode"] = c.steps_per_episode;
        j["dt_s"] = c.dt_s;
        j["gamma"] = c.gamma;
        j["ia"] = {{"alpha", c.ia.alpha},
                   {"beta", c.ia.beta},
                   {"lambda", c.ia.lambda},
                   {"mix_e", c.ia.mix_e},
                   {"mix_i", c.ia.mix_i},
                   {"alpha_per_agent", c.ia.alpha_per_agent},
                   {"beta_per_agent", c.ia.beta_per_agent}};
        j["shaping_enabled"] = c.shaping_enabled;
        j["agent"] = {{"hidden", c.agent.hidden},
                      {"gat_layers", c.agent.gat_layers},
                      {"heads", c.agent.heads},
                      {"lr", c.agent.lr},
                      {"batch_size", c.agent.batch_size},
                      {"replay_capacity", c.agent.replay_capacity},
                      {"epsilon_start", c.agent.epsilon_start},
                      {"epsilon_end", c.agent.epsilon_end},
                      {"epsilon_decay_fraction", c.agent.epsilon_decay_fraction},
                      {"queue_cap", c.agent.queue_cap},
                      {"target_sync_episodes", c.agent.target_sync_episodes},
                      {"update_every_steps", c.agent.update_every_steps},
                      {"adam_beta1", c.agent.adam.beta1},
                      {"adam_beta2", c.agent.adam.beta2},
                      {"adam_epsilon", c.agent.adam.epsilon}};
        j["controller"] = to_string(c.controller);
        j["fixed_time_phase_steps"] = c.fixed_time_phase_steps;
        j["seed"] = c.seed;
        j["repetition"] = c.repetition;
        j["convergence_search_lo"] = c.convergence_search_lo;
        j["convergence_search_hi"] = c.convergence_search_hi;
        return j;
    }

    /// Overlays the keys present in `j` onto `c`. Unknown keys are rejected.
    inline void apply_json(const nlohmann::json &j, ExperimentConfig &c, const std::string &where = "config")
    {
        using config_detail::ObjectReader;
        ObjectReader r(j, where);
        std::size_t schema = kConfigSchemaVersion;
        r.get("schema_version", schema);
        if (schema != static_cast<std::size_t>(kConfigSchemaVersion))
            throw InvalidConfigError(where + ": unsupported schema_version " + std::to_string(schema));

        if (const auto *n = r.object("network"))
        {
            ObjectReader s(*n, r.path("network"));
            s.get("roadnet_file", c.network.roadnet_file);
            s.get("rows", c.network.rows);
            s.get("cols", c.network.cols);
            s.get("link_travel_time_s", c.network.grid.link_travel_time_s);
            s.get("boundary_travel_time_s", c.network.grid.boundary_travel_time_s);
            s.finish();
        }
        if (const auto *f = r.object("flow"))
        {
            ObjectReader s(*f, r.path("flow"));
            s.get("flow_file", c.flow.flow_file);
            std::string mode = to_string(c.flow.mode);
            s.get("mode", mode);
            if (mode == "resample")
                c.flow.mode = FlowMode::Resample;
            else if (mode == "replay")
                c.flow.mode = FlowMode::Replay;
            else
                throw InvalidConfigError(s.path("mode") + ": expected 'resample' or 'replay'");
            s.get("bin_width_s", c.flow.bin_width_s);
            s.get("mean_per_bin", c.flow.mean_per_bin);
            s.get("std_per_bin", c.flow.std_per_bin);
            s.get("duration_s", c.flow.duration_s);
            s.get("origin_weights", c.flow.origin_weights);
            s.get("destination_weights", c.flow.destination_weights);
            s.finish();
        }
        if (const auto *m = r.object("sim"))
        {
            ObjectReader s(*m, r.path("sim"));
            s.get("saturation_rate", c.sim.saturation_rate);
            s.get("yellow_s", c.sim.yellow_s);
            s.get("all_red_s", c.sim.all_red_s);
            s.get("tick_s", c.sim.tick_s);
            s.get("initial_phase", c.sim.initial_phase);
            s.finish();
        }
        r.get("episodes", c.episodes);
        r.get("steps_per_episode", c.steps_per_episode);
        r.get("dt_s", c.dt_s);
        r.get("gamma", c.gamma);
        if (const auto *a = r.object("ia"))
        {
            ObjectReader s(*a, r.path("ia"));
            s.get("alpha", c.ia.alpha);
            s.get("beta", c.ia.beta);
            s.get("lambda", c.ia.lambda);
            s.get("mix_e", c.ia.mix_e);
            s.get("mix_i", c.ia.mix_i);
            s.get("alpha_per_agent", c.ia.alpha_per_agent);
            s.get("beta_per_agent", c.ia.beta_per_agent);
            s.finish();
        }
        r.get("shaping_enabled", c.shaping_enabled);
        if (const auto *a = r.object("agent"))
        {
            ObjectReader s(*a, r.path("agent"));
            s.get("hidden", c.agent.hidden);
            s.get("gat_layers", c.agent.gat_layers);
            s.get("heads", c.agent.heads);
            s.get("lr", c.agent.lr);
            s.get("batch_size", c.agent.batch_size);
            s.get("replay_capacity", c.agent.replay_capacity);
            s.get("epsilon_start", c.agent.epsilon_start);
            s.get("epsilon_end", c.agent.epsilon_end);
            s.get("epsilon_decay_fraction", c.agent.epsilon_decay_fraction);
            s.get("queue_cap", c.agent.queue_cap);
            s.get("target_sync_episodes", c.agent.target_sync_episodes);
            s.get("update_every_steps", c.agent.update_every_steps);
            s.get("adam_beta1", c.agent.adam.beta1);
            s.get("adam_beta2", c.agent.adam.beta2);
            s.get("adam_epsilon", c.agent.adam.epsilon);
            s.finish();
        }
        std::string controller = to_string(c.controller);
        r.get("controller", controller);
        if (controller == "dqn")
            c.controller = Controller::Dqn;
        else if (controller == "fixed_time")
            c.controller = Controller::FixedTime;
        else
            throw InvalidConfigError(r.path("controller") + ": expected 'dqn' or 'fixed_time'");
        r.get("fixed_time_phase_steps", c.fixed_time_phase_steps);
        std::size_t seed = static_cast<std::size_t>(c.seed);
        r.get("seed", seed);
        c.seed = seed;
        r.get("repetition", c.repetition);
        r.get("convergence_search_lo", c.convergence_search_lo);
        r.get("convergence_search_hi", c.convergence_search_hi);
        r.finish();
    }

    inline ExperimentConfig experiment_config_from_json(const nlohmann::json &j, const std::string &where = "config")
    {
        ExperimentConfig c;
        apply_json(j, c, where);
        c.validate();
        return c;
    }

    inline ExperimentConfig load_experiment_config(const std::filesystem::path &path)
    {
        const std::string text = json_detail::read_text(path);
        return experiment_config_from_json(json_detail::parse(text, path.string()), path.string());
    }

    /// Stable identifier of a configuration: FNV-1a over its canonical JSON form.
    inline std::string config_hash(const ExperimentConfig &c) { return to_hex(fnv1a64(to_json(c).dump())); }

} // namespace iacolight
