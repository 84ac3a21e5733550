#pragma once

#include "iacolight/core/random.hpp"
#include "iacolight/nn/dense.hpp"
#include "iacolight/nn/gat.hpp"
#include "iacolight/nn/params.hpp"

#include <string>
#include <vector>

namespace iacolight::nn
{
    struct NetConfig
    {
        std::size_t input_dim = 16;
        std::size_t hidden = 20;   // u
        std::size_t gat_layers = 1; // L
        std::size_t heads = 5;
        std::size_t key_dim = 0;   // 0 means "same as hidden"
        std::size_t actions = 4;

        void validate() const
        {
            if (input_dim == 0 || hidden == 0 || heads == 0 || actions == 0)
                throw InvalidConfigError("network: input_dim, hidden, heads and actions must be >= 1");
        }

        std::size_t keys() const noexcept { return key_dim == 0 ? hidden : key_dim; }
    };

    /// Shared per-intersection Q network: embedding MLP -> L graph attention layers -> linear Q head.
    class QNetwork
    {
    public:
        struct Trace
        {
            std::vector<DenseTrace> embed;
            std::vector<GatTrace> gat;
            std::vector<DenseTrace> head;
            NodeFeatures q;
        };

        explicit QNetwork(NetConfig cfg = {}) : cfg_(cfg)
        {
            cfg_.validate();
            const std::size_t u = cfg_.hidden;
            const std::size_t kd = cfg_.keys();
            embed_ = DenseLayout{shape_.add("embed.weight", Matrix(u, cfg_.input_dim)), shape_.add("embed.bias", Matrix(u, 1)),
                                 Activation::Relu};
            for (std::size_t l = 0; l < cfg_.gat_layers; ++l)
            {
                GatLayout g;
                const std::string p = "gat" + std::to_string(l) + ".";
                for (std::size_t h = 0; h < cfg_.heads; ++h)
                {
                    const std::string hp = p + "head" + std::to_string(h) + ".";
                    g.heads.push_back(GatHeadLayout{shape_.add(hp + "target", Matrix(kd, u)), shape_.add(hp + "source", Matrix(kd, u)),
                                                    shape_.add(hp + "value", Matrix(u, u))});
                }
                g.bias = shape_.add(p + "bias", Matrix(u, 1));
                g.activation = Activation::Relu;
                gat_.push_back(std::move(g));
            }
            head_ = DenseLayout{shape_.add("q.weight", Matrix(cfg_.actions, u)), shape_.add("q.bias", Matrix(cfg_.actions, 1)),
                                Activation::Identity};
        }

        const NetConfig &config() const noexcept { return cfg_; }
        const DenseLayout &embed_layout() const noexcept { return embed_; }
        const std::vector<GatLayout> &gat_layouts() const noexcept { return gat_; }
        const DenseLayout &head_layout() const noexcept { return head_; }

        /// All-zero parameters with the right names and shapes.
        ParamSet zero_params() const { return shape_; }

        /// Glorot-uniform weights, zero biases.
        ParamSet init_params(std::uint64_t seed) const
        {
            Rng rng(seed);
            ParamSet p = shape_;
            for (std::size_t i = 0; i < p.size(); ++i)
                if (p[i].cols > 1)
                    p[i] = glorot(p[i].rows, p[i].cols, rng);
            return p;
        }

        void check(const ParamSet &params) const
        {
            if (params.size() != shape_.size())
                throw ShapeError("QNetwork: parameter set has " + std::to_string(params.size()) + " tensors, expected " +
                                 std::to_string(shape_.size()));
            for (std::size_t i = 0; i < params.size(); ++i)
                if (!params[i].same_shape(shape_[i]))
                    throw ShapeError("QNetwork: tensor '" + shape_.name(i) + "' has the wrong shape");
        }

        Trace forward(const ParamSet &params, const NodeFeatures &features, const Neighborhoods &nbrs) const
        {
            check(params);
            if (features.size() != nbrs.size())
                throw ShapeError("QNetwork: features and neighborhoods disagree on node count");
            Trace tr;
            const std::size_t n = features.size();
            tr.embed.resize(n);
            NodeFeatures h(n);
            for (std::size_t i = 0; i < n; ++i)
                h[i] = dense_forward(params, embed_, features[i], &tr.embed[i]);
            for (const GatLayout &g : gat_)
            {
                tr.gat.push_back(gat_forward(params, g, h, nbrs));
                h = tr.gat.back().output;
            }
            tr.head.resize(n);
            tr.q.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                tr.q[i] = dense_forward(params, head_, h[i], &tr.head[i]);
            return tr;
        }

        NodeFeatures q_values(const ParamSet &params, const NodeFeatures &features, const Neighborhoods &nbrs) const
        {
            return forward(params, features, nbrs).q;
        }

        /// Gradient of sum_i dq_i . q_i with respect to every parameter.
        GradSet backward(const ParamSet &params, const Trace &tr, const NodeFeatures &dq) const
        {
            GradSet g = shape_;
            accumulate_gradients(params, tr, dq, g);
            return g;
        }

        void accumulate_gradients(const ParamSet &params, const Trace &tr, const NodeFeatures &dq, GradSet &grads) const
        {
            check(params);
            const std::size_t n = tr.q.size();
            if (dq.size() != n || tr.embed.size() != n || tr.gat.size() != gat_.size())
                throw ShapeError("QNetwork: trace does not match the upstream gradient or network");
            NodeFeatures dh(n);
            for (std::size_t i = 0; i < n; ++i)
                dh[i] = dense_backward(params, head_, tr.head[i], dq[i], grads);
            for (std::size_t l = gat_.size(); l-- > 0;)
                dh = gat_backward(params, gat_[l], tr.gat[l], dh, grads);
            for (std::size_t i = 0; i < n; ++i)
                dense_backward(params, embed_, tr.embed[i], dh[i], grads);
        }

    private:
        NetConfig cfg_;
        ParamSet shape_;
        DenseLayout embed_;
        std::vector<GatLayout> gat_;
        DenseLayout head_;
    };

} // namespace iacolight::nn
