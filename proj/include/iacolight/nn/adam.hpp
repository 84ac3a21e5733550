#pragma once

#include "iacolight/core/error.hpp"
#include "iacolight/nn/params.hpp"

#include <cmath>
#include <cstdint>

namespace iacolight::nn
{
    struct AdamConfig
    {
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
    };

    struct AdamState
    {
        ParamSet m;
        ParamSet v;
        std::uint64_t t = 0;

        friend bool operator==(const AdamState &, const AdamState &) = default;
    };

    inline AdamState make_adam_state(const ParamSet &params) { return AdamState{params.zeros_like(), params.zeros_like(), 0}; }

    /// One bias-corrected Adam update. Gradients are checked before anything is mutated.
    inline void optimizer_step(ParamSet &params, const GradSet &grads, AdamState &state, double lr, const AdamConfig &cfg = {})
    {
        if (!params.congruent(grads) || !params.congruent(state.m) || !params.congruent(state.v))
            throw ShapeError("optimizer_step: parameters, gradients and moments are not congruent");
        if (!grads.all_finite())
            throw NumericError("optimizer_step: non-finite gradient");
        if (!std::isfinite(lr))
            throw NumericError("optimizer_step: non-finite learning rate");

        ++state.t;
        const double t = static_cast<double>(state.t);
        const double c1 = 1.0 - std::pow(cfg.beta1, t);
        const double c2 = 1.0 - std::pow(cfg.beta2, t);
        for (std::size_t i = 0; i < params.size(); ++i)
        {
            auto &p = params[i].data;
            const auto &g = grads[i].data;
            auto &m = state.m[i].data;
            auto &v = state.v[i].data;
            for (std::size_t k = 0; k < p.size(); ++k)
            {
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
                const double m_hat = m[k] / c1;
                const double v_hat = v[k] / c2;
                p[k] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
            }
        }
    }

} // namespace iacolight::nn
