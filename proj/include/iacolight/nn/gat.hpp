#pragma once

#include "iacolight/nn/dense.hpp"
#include "iacolight/nn/params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace iacolight::nn
{
    using NodeFeatures = std::vector<std::vector<double>>;
    using Neighborhoods = std::vector<std::vector<std::size_t>>;

    struct GatHeadLayout
    {
        std::size_t target = 0; // key_dim x in
        std::size_t source = 0; // key_dim x in
        std::size_t value = 0;  // out x in
    };

    struct GatLayout
    {
        std::vector<GatHeadLayout> heads;
        std::size_t bias = 0; // out x 1
        Activation activation = Activation::Relu;
    };

    struct GatTrace
    {
        NodeFeatures input;
        // Attention support of each node: the node itself first, then its neighbors ascending.
        std::vector<std::vector<std::size_t>> members;
        std::vector<NodeFeatures> target, source, value; // [head][node]
        std::vector<std::vector<std::vector<double>>> attention; // [node][head][member]
        NodeFeatures pre;
        NodeFeatures output;
    };

    inline std::vector<std::vector<std::size_t>> attention_members(const Neighborhoods &nbrs)
    {
        const std::size_t n = nbrs.size();
        std::vector<std::vector<std::size_t>> out(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            std::vector<std::size_t> others;
            for (std::size_t j : nbrs[i])
            {
                if (j >= n)
                    throw ShapeError("gat: neighbor id " + std::to_string(j) + " out of range for " + std::to_string(n) + " nodes");
                if (j != i)
                    others.push_back(j);
            }
            std::sort(others.begin(), others.end());
            others.erase(std::unique(others.begin(), others.end()), others.end());
            out[i].push_back(i);
            out[i].insert(out[i].end(), others.begin(), others.end());
        }
        return out;
    }

    /// Multi-head graph attention.
    ///
    /// Per head h: score(i, j) = (Wt x_i) . (Ws x_j), softmax over j in N(i) with i itself,
    /// head output = sum_j a_ij (Wv x_j). Heads are averaged, a bias is added and the
    /// layer activation applied.
    inline GatTrace gat_forward(const ParamSet &params, const GatLayout &layer, const NodeFeatures &x, const Neighborhoods &nbrs)
    {
        if (layer.heads.empty())
            throw ShapeError("gat_forward: at least one head is required");
        if (nbrs.size() != x.size())
            throw ShapeError("gat_forward: neighborhoods must have one entry per node");
        const std::size_t n = x.size();
        const std::size_t heads = layer.heads.size();
        const Matrix &bias = params[layer.bias];
        const std::size_t out_dim = bias.rows;

        GatTrace tr;
        tr.input = x;
        tr.members = attention_members(nbrs);
        tr.target.resize(heads);
        tr.source.resize(heads);
        tr.value.resize(heads);
        tr.attention.assign(n, std::vector<std::vector<double>>(heads));
        tr.pre.assign(n, std::vector<double>(out_dim, 0.0));

        for (std::size_t h = 0; h < heads; ++h)
        {
            const GatHeadLayout &hl = layer.heads[h];
            if (params[hl.value].rows != out_dim)
                throw ShapeError("gat_forward: value projection rows must equal the bias size");
            if (params[hl.target].rows != params[hl.source].rows)
                throw ShapeError("gat_forward: target and source projections must share the key size");
            for (std::size_t i = 0; i < n; ++i)
            {
                tr.target[h].push_back(matvec(params[hl.target], x[i]));
                tr.source[h].push_back(matvec(params[hl.source], x[i]));
                tr.value[h].push_back(matvec(params[hl.value], x[i]));
            }
        }

        const double inv_heads = 1.0 / static_cast<double>(heads);
        for (std::size_t i = 0; i < n; ++i)
        {
            const auto &mem = tr.members[i];
            for (std::size_t h = 0; h < heads; ++h)
            {
                std::vector<double> a(mem.size());
                double hi = -std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < mem.size(); ++k)
                {
                    a[k] = dot(tr.target[h][i], tr.source[h][mem[k]]);
                    hi = std::max(hi, a[k]);
                }
                double z = 0.0;
                for (double &v : a)
                {
                    v = std::exp(v - hi);
                    z += v;
                }
                for (double &v : a)
                    v /= z;
                for (std::size_t k = 0; k < mem.size(); ++k)
                {
                    const auto &vj = tr.value[h][mem[k]];
                    const double w = a[k] * inv_heads;
                    for (std::size_t d = 0; d < out_dim; ++d)
                        tr.pre[i][d] += w * vj[d];
                }
                tr.attention[i][h] = std::move(a);
            }
            for (std::size_t d = 0; d < out_dim; ++d)
                tr.pre[i][d] += bias.data[d];
        }

        tr.output.assign(n, std::vector<double>(out_dim));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d < out_dim; ++d)
                tr.output[i][d] = activate(layer.activation, tr.pre[i][d]);
        return tr;
    }

    /// Accumulates parameter gradients into `grads`; returns d(input) per node.
    inline NodeFeatures gat_backward(const ParamSet &params, const GatLayout &layer, const GatTrace &tr, const NodeFeatures &d_out,
                                     GradSet &grads)
    {
        const std::size_t n = tr.input.size();
        const std::size_t heads = layer.heads.size();
        if (d_out.size() != n || tr.target.size() != heads)
            throw ShapeError("gat_backward: trace does not match layer");
        const std::size_t out_dim = params[layer.bias].rows;
        const std::size_t in_dim = n == 0 ? 0 : tr.input[0].size();
        const double inv_heads = 1.0 / static_cast<double>(heads);

        NodeFeatures d_pre(n, std::vector<double>(out_dim));
        Matrix &db = grads[layer.bias];
        for (std::size_t i = 0; i < n; ++i)
        {
            if (d_out[i].size() != out_dim)
                throw ShapeError("gat_backward: upstream gradient has the wrong width");
            for (std::size_t d = 0; d < out_dim; ++d)
            {
                d_pre[i][d] = d_out[i][d] * activate_grad(layer.activation, tr.pre[i][d]);
                db.data[d] += d_pre[i][d];
            }
        }

        NodeFeatures d_in(n, std::vector<double>(in_dim, 0.0));
        for (std::size_t h = 0; h < heads; ++h)
        {
            const std::size_t key_dim = params[layer.heads[h].target].rows;
            NodeFeatures dt(n, std::vector<double>(key_dim, 0.0));
            NodeFeatures ds(n, std::vector<double>(key_dim, 0.0));
            NodeFeatures dv(n, std::vector<double>(out_dim, 0.0));
            for (std::size_t i = 0; i < n; ++i)
            {
                const auto &mem = tr.members[i];
                const auto &a = tr.attention[i][h];
                // d(head output_i) = d_pre_i / heads
                std::vector<double> da(mem.size());
                double weighted = 0.0;
                for (std::size_t k = 0; k < mem.size(); ++k)
                {
                    const std::size_t j = mem[k];
                    double g = 0.0;
                    for (std::size_t d = 0; d < out_dim; ++d)
                    {
                        const double dho = d_pre[i][d] * inv_heads;
                        g += dho * tr.value[h][j][d];
                        dv[j][d] += a[k] * dho;
                    }
                    da[k] = g;
                    weighted += a[k] * g;
                }
                for (std::size_t k = 0; k < mem.size(); ++k)
                {
                    const std::size_t j = mem[k];
                    const double de = a[k] * (da[k] - weighted);
                    if (de == 0.0)
                        continue;
                    for (std::size_t c = 0; c < key_dim; ++c)
                    {
                        dt[i][c] += de * tr.source[h][j][c];
                        ds[j][c] += de * tr.target[h][i][c];
                    }
                }
            }
            const GatHeadLayout &hl = layer.heads[h];
            for (std::size_t i = 0; i < n; ++i)
            {
                outer_acc(grads[hl.target], dt[i], tr.input[i]);
                outer_acc(grads[hl.source], ds[i], tr.input[i]);
                outer_acc(grads[hl.value], dv[i], tr.input[i]);
                matvec_transposed_acc(params[hl.target], dt[i], d_in[i]);
                matvec_transposed_acc(params[hl.source], ds[i], d_in[i]);
                matvec_transposed_acc(params[hl.value], dv[i], d_in[i]);
            }
        }
        return d_in;
    }

} // namespace iacolight::nn
