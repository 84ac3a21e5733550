#pragma once

#include "iacolight/nn/params.hpp"

#include <span>
#include <vector>

namespace iacolight::nn
{
    enum class Activation
    {
        Identity,
        Relu,
    };

    inline double activate(Activation a, double x) noexcept
    {
        return a == Activation::Relu ? (x > 0.0 ? x : 0.0) : x;
    }

    inline double activate_grad(Activation a, double pre) noexcept
    {
        return a == Activation::Relu ? (pre > 0.0 ? 1.0 : 0.0) : 1.0;
    }

    /// Indices of a fully connected layer's tensors inside a ParamSet.
    struct DenseLayout
    {
        std::size_t weight = 0; // out x in
        std::size_t bias = 0;   // out x 1
        Activation activation = Activation::Relu;
    };

    struct DenseTrace
    {
        std::vector<double> input;
        std::vector<double> pre;
    };

    /// out = activation(W in + b)
    inline std::vector<double> dense_forward(const ParamSet &params, const DenseLayout &layer, std::span<const double> input,
                                             DenseTrace *trace = nullptr)
    {
        const Matrix &w = params[layer.weight];
        const Matrix &b = params[layer.bias];
        if (b.rows != w.rows || b.cols != 1)
            throw ShapeError("dense_forward: bias shape does not match weight rows");
        std::vector<double> pre = matvec(w, input);
        for (std::size_t i = 0; i < pre.size(); ++i)
            pre[i] += b.data[i];
        std::vector<double> out(pre.size());
        for (std::size_t i = 0; i < pre.size(); ++i)
            out[i] = activate(layer.activation, pre[i]);
        if (trace)
        {
            trace->input.assign(input.begin(), input.end());
            trace->pre = std::move(pre);
        }
        return out;
    }

    /// Accumulates dW, db into `grads` and returns d(input).
    inline std::vector<double> dense_backward(const ParamSet &params, const DenseLayout &layer, const DenseTrace &trace,
                                              std::span<const double> d_out, GradSet &grads)
    {
        const Matrix &w = params[layer.weight];
        if (trace.pre.size() != w.rows || trace.input.size() != w.cols || d_out.size() != w.rows)
            throw ShapeError("dense_backward: trace does not match layer shape");
        std::vector<double> d_pre(w.rows);
        for (std::size_t i = 0; i < w.rows; ++i)
            d_pre[i] = d_out[i] * activate_grad(layer.activation, trace.pre[i]);
        outer_acc(grads[layer.weight], d_pre, trace.input);
        Matrix &db = grads[layer.bias];
        for (std::size_t i = 0; i < w.rows; ++i)
            db.data[i] += d_pre[i];
        std::vector<double> d_in(w.cols, 0.0);
        matvec_transposed_acc(w, d_pre, d_in);
        return d_in;
    }

} // namespace iacolight::nn
