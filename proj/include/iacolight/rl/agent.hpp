#pragma once

#include "iacolight/core/error.hpp"
#include "iacolight/core/random.hpp"
#include "iacolight/nn/adam.hpp"
#include "iacolight/nn/q_network.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace iacolight::rl
{
    using nn::Neighborhoods;
    using nn::NodeFeatures;

    /// What one intersection sees: incoming-lane queue counts and the active phase.
    struct Observation
    {
        std::vector<std::size_t> queues; // 12 entries
        std::size_t phase = 0;
        std::size_t phase_count = 4;
    };

    /// Queue counts scaled by `queue_cap` (clamped to 1) followed by the phase one-hot.
    inline std::vector<double> encode(const Observation &obs, double queue_cap = 30.0)
    {
        if (!(queue_cap > 0.0))
            throw InvalidConfigError("encode: queue_cap must be positive");
        if (obs.phase >= obs.phase_count)
            throw InvalidInputError("encode: phase out of range");
        std::vector<double> out;
        out.reserve(obs.queues.size() + obs.phase_count);
        for (std::size_t q : obs.queues)
            out.push_back(std::min(1.0, static_cast<double>(q) / queue_cap));
        for (std::size_t p = 0; p < obs.phase_count; ++p)
            out.push_back(p == obs.phase ? 1.0 : 0.0);
        return out;
    }

    /// Greedy index with lowest-index tie-break.
    inline std::size_t argmax(std::span<const double> q)
    {
        if (q.empty())
            throw InvalidInputError("argmax: empty value vector");
        std::size_t best = 0;
        for (std::size_t i = 1; i < q.size(); ++i)
            if (q[i] > q[best])
                best = i;
        return best;
    }

    /// epsilon-greedy: one uniform draw decides explore vs exploit; exploring draws a second
    /// value for the uniform action.
    inline std::size_t select_action(std::span<const double> q, double epsilon, Rng &rng)
    {
        if (q.empty())
            throw InvalidInputError("select_action: empty value vector");
        if (!(epsilon >= 0.0 && epsilon <= 1.0))
            throw InvalidInputError("select_action: epsilon must lie in [0, 1]");
        if (rng.uniform01() < epsilon)
            return static_cast<std::size_t>(rng.below(q.size()));
        return argmax(q);
    }

    /// Linear decay from `start` to `end` over the first `decay_fraction` of `total_steps`.
    struct EpsilonSchedule
    {
        double start = 0.8;
        double end = 0.05;
        double decay_fraction = 0.6;
        std::size_t total_steps = 1;

        double value(std::size_t step) const
        {
            const auto decay_steps = static_cast<std::size_t>(std::floor(decay_fraction * static_cast<double>(total_steps)));
            if (decay_steps == 0 || step >= decay_steps)
                return end;
            return start + (end - start) * (static_cast<double>(step) / static_cast<double>(decay_steps));
        }
    };

    struct Transition
    {
        NodeFeatures state;
        std::vector<std::size_t> actions;
        std::vector<double> rewards;
        NodeFeatures next_state;

        friend bool operator==(const Transition &, const Transition &) = default;
    };

    /// Fixed-capacity FIFO ring buffer with uniform sampling (with replacement).
    template <typename T>
    class ReplayBuffer
    {
    public:
        explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity)
        {
            if (capacity_ == 0)
                throw InvalidConfigError("ReplayBuffer: capacity must be >= 1");
            items_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
        }

        void push(T item)
        {
            if (items_.size() < capacity_)
                items_.push_back(std::move(item));
            else
                items_[inserted_ % capacity_] = std::move(item);
            ++inserted_;
        }

        std::size_t size() const noexcept { return items_.size(); }
        std::size_t capacity() const noexcept { return capacity_; }
        std::size_t inserted() const noexcept { return inserted_; }
        bool empty() const noexcept { return items_.empty(); }

        /// Oldest-first element access.
        const T &at(std::size_t i) const
        {
            if (i >= items_.size())
                throw InvalidInputError("ReplayBuffer: index out of range");
            const std::size_t oldest = items_.size() < capacity_ ? 0 : inserted_ % capacity_;
            return items_[(oldest + i) % items_.size()];
        }

        std::vector<const T *> sample(std::size_t count, Rng &rng) const
        {
            if (items_.empty())
                throw InvalidInputError("ReplayBuffer: cannot sample from an empty buffer");
            std::vector<const T *> out;
            out.reserve(count);
            for (std::size_t i = 0; i < count; ++i)
                out.push_back(&items_[static_cast<std::size_t>(rng.below(items_.size()))]);
            return out;
        }

    private:
        std::size_t capacity_;
        std::size_t inserted_ = 0;
        std::vector<T> items_;
    };

    /// Online and target parameters of the shared network plus optimizer state.
    struct AgentPolicyState
    {
        nn::QNetwork net;
        nn::ParamSet online;
        nn::ParamSet target;
        nn::AdamState adam;
        nn::AdamConfig adam_config;

        static AgentPolicyState create(const nn::NetConfig &cfg, std::uint64_t seed, nn::AdamConfig adam_cfg = {})
        {
            nn::QNetwork net(cfg);
            nn::ParamSet p = net.init_params(seed);
            nn::AdamState st = nn::make_adam_state(p);
            return AgentPolicyState{std::move(net), p, p, std::move(st), adam_cfg};
        }

        std::size_t action_count() const noexcept { return net.config().actions; }
    };

    inline NodeFeatures q_values(const AgentPolicyState &policy, const NodeFeatures &features, const Neighborhoods &nbrs)
    {
        return policy.net.q_values(policy.online, features, nbrs);
    }

    inline void sync_target(AgentPolicyState &policy) { policy.target = policy.online; }

    /// One DQN step on the shared network.
    ///
    /// For every sample and agent k the target is r_k + gamma * max_a Q(s'_k, a; target),
    /// the loss is the mean squared TD error over (sample, agent) pairs, and one Adam step
    /// is applied to the online parameters. Returns the loss before the step.
    inline double dqn_update(AgentPolicyState &policy, std::span<const Transition *const> batch, const Neighborhoods &nbrs,
                             double gamma, double lr)
    {
        if (batch.empty())
            throw InvalidInputError("dqn_update: empty batch");
        if (!(gamma >= 0.0 && gamma <= 1.0))
            throw InvalidConfigError("dqn_update: gamma must lie in [0, 1]");
        const std::size_t agents = nbrs.size();
        const std::size_t actions = policy.action_count();
        const double scale = 1.0 / static_cast<double>(batch.size() * agents);

        nn::GradSet grads = policy.online.zeros_like();
        double loss = 0.0;
        for (const Transition *tr : batch)
        {
            if (tr->state.size() != agents || tr->next_state.size() != agents || tr->actions.size() != agents ||
                tr->rewards.size() != agents)
                throw ShapeError("dqn_update: transition does not have one entry per agent");
            const NodeFeatures next_q = policy.net.q_values(policy.target, tr->next_state, nbrs);
            const nn::QNetwork::Trace fwd = policy.net.forward(policy.online, tr->state, nbrs);
            NodeFeatures dq(agents, std::vector<double>(actions, 0.0));
            for (std::size_t k = 0; k < agents; ++k)
            {
                const std::size_t a = tr->actions[k];
                if (a >= actions)
                    throw InvalidActionError("dqn_update: stored action out of range");
                const double target = tr->rewards[k] + gamma * *std::max_element(next_q[k].begin(), next_q[k].end());
                const double diff = fwd.q[k][a] - target;
                loss += diff * diff;
                dq[k][a] = 2.0 * diff * scale;
            }
            policy.net.accumulate_gradients(policy.online, fwd, dq, grads);
        }
        loss *= scale;
        if (!std::isfinite(loss))
            throw NumericError("dqn_update: non-finite loss");
        nn::optimizer_step(policy.online, grads, policy.adam, lr, policy.adam_config);
        return loss;
    }

    inline double dqn_update(AgentPolicyState &policy, const std::vector<Transition> &batch, const Neighborhoods &nbrs, double gamma,
                             double lr)
    {
        std::vector<const Transition *> ptrs;
        ptrs.reserve(batch.size());
        for (const Transition &t : batch)
            ptrs.push_back(&t);
        return dqn_update(policy, std::span<const Transition *const>(ptrs), nbrs, gamma, lr);
    }

} // namespace iacolight::rl
