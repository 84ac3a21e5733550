#pragma once

#include "iacolight/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace iacolight::ia
{
    /// Inequity-aversion coefficients and the extrinsic/intrinsic mix.
    ///
    /// `alpha` weighs disadvantageous inequity (a peer's memory above one's own), `beta`
    /// advantageous inequity. Positive values punish, negative values reward. `mix_e` and
    /// `mix_i` are the weights of the final linear reward r = mix_e * e + mix_i * i.
    struct IAConfig
    {
        double alpha = 0.0;
        double beta = 0.0;
        double lambda = 0.5;
        double gamma = 0.8;
        double mix_e = 1.0;
        double mix_i = 1.0;
        // Optional per-agent coefficients; when non-empty they replace alpha / beta.
        std::vector<double> alpha_per_agent;
        std::vector<double> beta_per_agent;

        void validate() const
        {
            for (double v : {alpha, beta, lambda, gamma, mix_e, mix_i})
                if (!std::isfinite(v))
                    throw InvalidConfigError("ia: all coefficients must be finite");
            if (lambda < 0.0 || lambda > 1.0)
                throw InvalidConfigError("ia: lambda must lie in [0, 1]");
            if (gamma < 0.0 || gamma > 1.0)
                throw InvalidConfigError("ia: gamma must lie in [0, 1]");
            for (const auto *v : {&alpha_per_agent, &beta_per_agent})
                for (double x : *v)
                    if (!std::isfinite(x))
                        throw InvalidConfigError("ia: per-agent coefficients must be finite");
        }

        double alpha_for(std::size_t k) const { return alpha_per_agent.empty() ? alpha : alpha_per_agent.at(k); }
        double beta_for(std::size_t k) const { return beta_per_agent.empty() ? beta : beta_per_agent.at(k); }
    };

    /// Trace-decayed memory of each agent's extrinsic rewards; starts at zero.
    struct SmoothedMemory
    {
        std::vector<double> w;

        SmoothedMemory() = default;
        explicit SmoothedMemory(std::size_t agents) : w(agents, 0.0) {}

        std::size_t size() const noexcept { return w.size(); }

        friend bool operator==(const SmoothedMemory &, const SmoothedMemory &) = default;
    };

    /// w_t = gamma * lambda * w_{t-1} + e_t, elementwise.
    inline SmoothedMemory update_memory(const SmoothedMemory &mem, std::span<const double> extrinsic, const IAConfig &cfg)
    {
        if (extrinsic.size() != mem.w.size())
            throw ShapeError("update_memory: expected " + std::to_string(mem.w.size()) + " rewards, got " +
                             std::to_string(extrinsic.size()));
        const double decay = cfg.gamma * cfg.lambda;
        SmoothedMemory out(mem.w.size());
        for (std::size_t j = 0; j < mem.w.size(); ++j)
            out.w[j] = decay * mem.w[j] + extrinsic[j];
        return out;
    }

    /// Inequity-aversion term of every agent:
    ///   i_k = -alpha_k/(N-1) * sum_{j != k} max(w_j - w_k, 0)
    ///         - beta_k/(N-1)  * sum_{j != k} max(w_k - w_j, 0)
    /// Inequities are taken over all N agents, not only graph neighbors.
    inline std::vector<double> intrinsic_rewards(const SmoothedMemory &mem, const IAConfig &cfg, std::size_t agents)
    {
        if (agents < 2)
            throw InvalidConfigError("intrinsic_rewards: at least two agents are required");
        if (mem.w.size() != agents)
            throw ShapeError("intrinsic_rewards: memory has " + std::to_string(mem.w.size()) + " entries, expected " +
                             std::to_string(agents));
        if ((!cfg.alpha_per_agent.empty() && cfg.alpha_per_agent.size() != agents) ||
            (!cfg.beta_per_agent.empty() && cfg.beta_per_agent.size() != agents))
            throw ShapeError("intrinsic_rewards: per-agent coefficients must have one entry per agent");

        const double peers = static_cast<double>(agents - 1);
        std::vector<double> out(agents);
        for (std::size_t k = 0; k < agents; ++k)
        {
            double disadvantage = 0.0;
            double advantage = 0.0;
            for (std::size_t j = 0; j < agents; ++j)
            {
                if (j == k)
                    continue;
                disadvantage += std::max(mem.w[j] - mem.w[k], 0.0);
                advantage += std::max(mem.w[k] - mem.w[j], 0.0);
            }
            out[k] = -(cfg.alpha_for(k) / peers) * disadvantage - (cfg.beta_for(k) / peers) * advantage + 0.0;
        }
        return out;
    }

    /// r_k = mix_e * e_k + mix_i * i_k
    inline std::vector<double> shaped_rewards(std::span<const double> extrinsic, std::span<const double> intrinsic, const IAConfig &cfg)
    {
        if (extrinsic.size() != intrinsic.size())
            throw ShapeError("shaped_rewards: extrinsic and intrinsic lengths differ");
        std::vector<double> out(extrinsic.size());
        for (std::size_t k = 0; k < out.size(); ++k)
            out[k] = cfg.mix_e * extrinsic[k] + cfg.mix_i * intrinsic[k];
        return out;
    }

} // namespace iacolight::ia
