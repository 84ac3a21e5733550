#pragma once

#include "iacolight/core/error.hpp"
#include "iacolight/core/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace iacolight::nn
{
    /// Row-major dense matrix of doubles. Bias vectors are stored as (n x 1).
    struct Matrix
    {
        std::size_t rows = 0;
        std::size_t cols = 0;
        std::vector<double> data;

        Matrix() = default;
        Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

        double &operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
        double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

        std::size_t size() const noexcept { return data.size(); }
        bool same_shape(const Matrix &o) const noexcept { return rows == o.rows && cols == o.cols; }

        friend bool operator==(const Matrix &, const Matrix &) = default;
    };

    /// y = W x (W: out x in).
    inline std::vector<double> matvec(const Matrix &w, std::span<const double> x)
    {
        if (x.size() != w.cols)
            throw ShapeError("matvec: input has " + std::to_string(x.size()) + " entries, expected " + std::to_string(w.cols));
        std::vector<double> y(w.rows, 0.0);
        for (std::size_t r = 0; r < w.rows; ++r)
        {
            const double *row = &w.data[r * w.cols];
            double acc = 0.0;
            for (std::size_t c = 0; c < w.cols; ++c)
                acc += row[c] * x[c];
            y[r] = acc;
        }
        return y;
    }

    /// dx += W^T dy.
    inline void matvec_transposed_acc(const Matrix &w, std::span<const double> dy, std::span<double> dx)
    {
        for (std::size_t r = 0; r < w.rows; ++r)
        {
            const double g = dy[r];
            if (g == 0.0)
                continue;
            const double *row = &w.data[r * w.cols];
            for (std::size_t c = 0; c < w.cols; ++c)
                dx[c] += row[c] * g;
        }
    }

    /// dW += dy x^T.
    inline void outer_acc(Matrix &dw, std::span<const double> dy, std::span<const double> x)
    {
        for (std::size_t r = 0; r < dw.rows; ++r)
        {
            const double g = dy[r];
            if (g == 0.0)
                continue;
            double *row = &dw.data[r * dw.cols];
            for (std::size_t c = 0; c < dw.cols; ++c)
                row[c] += g * x[c];
        }
    }

    inline double dot(std::span<const double> a, std::span<const double> b)
    {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            acc += a[i] * b[i];
        return acc;
    }

    /// Named, ordered collection of parameter tensors. Gradient sets use the same type.
    class ParamSet
    {
    public:
        std::size_t add(std::string name, Matrix value)
        {
            if (std::find(names_.begin(), names_.end(), name) != names_.end())
                throw ShapeError("ParamSet: duplicate tensor name '" + name + "'");
            names_.push_back(std::move(name));
            values_.push_back(std::move(value));
            return values_.size() - 1;
        }

        std::size_t size() const noexcept { return values_.size(); }
        Matrix &operator[](std::size_t i) { return values_[i]; }
        const Matrix &operator[](std::size_t i) const { return values_[i]; }
        const std::string &name(std::size_t i) const { return names_.at(i); }

        std::size_t index_of(const std::string &name) const
        {
            auto it = std::find(names_.begin(), names_.end(), name);
            if (it == names_.end())
                throw ShapeError("ParamSet: no tensor named '" + name + "'");
            return static_cast<std::size_t>(it - names_.begin());
        }

        std::size_t scalar_count() const noexcept
        {
            std::size_t n = 0;
            for (const Matrix &m : values_)
                n += m.size();
            return n;
        }

        ParamSet zeros_like() const
        {
            ParamSet out;
            out.names_ = names_;
            for (const Matrix &m : values_)
                out.values_.emplace_back(m.rows, m.cols, 0.0);
            return out;
        }

        /// Same names, same order, same shapes.
        bool congruent(const ParamSet &o) const
        {
            if (names_ != o.names_)
                return false;
            for (std::size_t i = 0; i < values_.size(); ++i)
                if (!values_[i].same_shape(o.values_[i]))
                    return false;
            return true;
        }

        bool all_finite() const
        {
            for (const Matrix &m : values_)
                for (double v : m.data)
                    if (!std::isfinite(v))
                        return false;
            return true;
        }

        bool all_zero() const
        {
            for (const Matrix &m : values_)
                for (double v : m.data)
                    if (v != 0.0)
                        return false;
            return true;
        }

        void fill(double v)
        {
            for (Matrix &m : values_)
                std::fill(m.data.begin(), m.data.end(), v);
        }

        friend bool operator==(const ParamSet &, const ParamSet &) = default;

    private:
        std::vector<std::string> names_;
        std::vector<Matrix> values_;
    };

    using GradSet = ParamSet;

    /// Glorot-uniform weights.
    inline Matrix glorot(std::size_t rows, std::size_t cols, Rng &rng)
    {
        Matrix m(rows, cols);
        const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (double &v : m.data)
            v = rng.uniform(-limit, limit);
        return m;
    }

} // namespace iacolight::nn
