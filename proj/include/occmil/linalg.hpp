#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "occmil/error.hpp"

namespace occmil {

using DVec = std::vector<double>;

// Dense row-major matrix. Layer weights are stored input x output, so the
// forward map is W^T x + b.
struct DMat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DMat() = default;
    DMat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    bool same_shape(const DMat& o) const { return rows == o.rows && cols == o.cols; }
};

inline double dot(const DVec& a, const DVec& b) {
    if (a.size() != b.size()) {
        fail(ErrorCode::DimMismatch,
             "dot: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const DVec& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

inline bool all_finite(const DVec& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// W^T x (weights input x output).
inline DVec matvec_t(const DMat& W, const DVec& x) {
    if (W.rows != x.size()) {
        fail(ErrorCode::DimMismatch, "matvec: input length " + std::to_string(x.size()) +
                                         " vs weight rows " + std::to_string(W.rows));
    }
    DVec out(W.cols, 0.0);
    for (std::size_t i = 0; i < W.rows; ++i) {
        const double xi = x[i];
        const double* row = &W.data[i * W.cols];
        for (std::size_t j = 0; j < W.cols; ++j) out[j] += row[j] * xi;
    }
    return out;
}

// W^T x + b.
inline DVec affine(const DMat& W, const DVec& b, const DVec& x) {
    if (W.cols != b.size()) {
        fail(ErrorCode::DimMismatch, "affine: bias length " + std::to_string(b.size()) +
                                         " vs weight cols " + std::to_string(W.cols));
    }
    DVec out = matvec_t(W, x);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += b[j];
    return out;
}

// Shift-invariant softmax; entries in (0,1], sums to 1.
inline DVec softmax_stable(const DVec& v) {
    if (v.empty()) fail(ErrorCode::EmptyInput, "softmax of empty vector");
    const double m = *std::max_element(v.begin(), v.end());
    DVec out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

enum class Activation { ReLU, Tanh, Sigmoid };

// Two-branch form; never overflows for large |x|.
inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline DVec activate(Activation kind, const DVec& v) {
    DVec out(v.size());
    switch (kind) {
        case Activation::ReLU:
            for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(0.0, v[i]);
            break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
            break;
    }
    return out;
}

}  // namespace occmil
