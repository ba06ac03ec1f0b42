#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "tnm/common.hpp"

namespace tnm {

/// Node value vector: length d at the input layer, D at hidden layers.
using FeatureVector = std::vector<double>;

/// Rank-4 weight tensor, row-major flat storage.
///
/// Index formula: ((m * n_dim + n) * o_dim + o) * p_dim + p. The first
/// axis (m) indexes the output vector; the remaining three are contracted
/// against the node's three inputs.
struct WeightTensor4 {
    std::array<int, 4> dims{0, 0, 0, 0};  // m, n, o, p
    std::vector<double> values;

    WeightTensor4() = default;
    WeightTensor4(int m, int n, int o, int p, double fill = 0.0)
        : dims{m, n, o, p},
          values(static_cast<std::size_t>(m) * n * o * p, fill) {}

    int m_dim() const { return dims[0]; }
    int n_dim() const { return dims[1]; }
    int o_dim() const { return dims[2]; }
    int p_dim() const { return dims[3]; }
    std::size_t size() const { return values.size(); }

    std::size_t index(int m, int n, int o, int p) const {
        return ((static_cast<std::size_t>(m) * dims[1] + n) * dims[2] + o) *
                   dims[3] +
               p;
    }
    double at(int m, int n, int o, int p) const { return values[index(m, n, o, p)]; }
    double& at(int m, int n, int o, int p) { return values[index(m, n, o, p)]; }

    bool operator==(const WeightTensor4&) const = default;
};

namespace detail {

inline void require_length(const FeatureVector& v, int expected, const char* axis) {
    if (static_cast<int>(v.size()) != expected) {
        throw ShapeError(std::string("contract3: input on axis '") + axis +
                         "' has length " + std::to_string(v.size()) +
                         ", tensor expects " + std::to_string(expected));
    }
}

}  // namespace detail

/// Pre-activation contraction of one tree node:
/// out[m] = sum_{n,o,p} w[m,n,o,p] * a[n] * b[o] * c[p].
inline FeatureVector contract3(const WeightTensor4& w, const FeatureVector& a,
                               const FeatureVector& b, const FeatureVector& c) {
    detail::require_length(a, w.n_dim(), "n");
    detail::require_length(b, w.o_dim(), "o");
    detail::require_length(c, w.p_dim(), "p");

    FeatureVector out(w.m_dim(), 0.0);
    const double* wp = w.values.data();
    for (int m = 0; m < w.m_dim(); ++m) {
        double acc_m = 0.0;
        for (int n = 0; n < w.n_dim(); ++n) {
            const double an = a[n];
            for (int o = 0; o < w.o_dim(); ++o) {
                const double ab = an * b[o];
                double dot = 0.0;
                for (int p = 0; p < w.p_dim(); ++p) dot += wp[p] * c[p];
                wp += w.p_dim();
                acc_m += ab * dot;
            }
        }
        out[m] = acc_m;
    }
    return out;
}

/// Elementwise tanh. Rejects non-finite input.
inline FeatureVector activation(const FeatureVector& x) {
    FeatureVector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!is_finite(x[i]))
            throw Error("activation: non-finite input at index " + std::to_string(i));
        out[i] = std::tanh(x[i]);
    }
    return out;
}

/// Derivative of tanh expressed in the post-activation value: 1 - post^2.
inline FeatureVector activation_derivative(const FeatureVector& post) {
    FeatureVector out(post.size());
    for (std::size_t i = 0; i < post.size(); ++i) out[i] = 1.0 - post[i] * post[i];
    return out;
}

/// Gradients of contract3 with respect to the tensor and all three inputs.
struct Contract3Gradients {
    WeightTensor4 grad_w;
    FeatureVector grad_a, grad_b, grad_c;
};

namespace detail {

/// Accumulating backward kernel shared by the public op and the model's
/// backward pass. Null gradient pointers skip the corresponding output.
inline void contract3_backward_acc(const WeightTensor4& w, const FeatureVector& a,
                                   const FeatureVector& b, const FeatureVector& c,
                                   const FeatureVector& upstream,
                                   WeightTensor4* grad_w, FeatureVector* grad_a,
                                   FeatureVector* grad_b, FeatureVector* grad_c) {
    const int M = w.m_dim(), N = w.n_dim(), O = w.o_dim(), P = w.p_dim();
    const double* wp = w.values.data();
    double* gwp = grad_w ? grad_w->values.data() : nullptr;
    for (int m = 0; m < M; ++m) {
        const double um = upstream[m];
        for (int n = 0; n < N; ++n) {
            const double uan = um * a[n];
            double acc_n = 0.0;  // sum_o b[o] * dot_c
            for (int o = 0; o < O; ++o) {
                const double uab = uan * b[o];
                const std::size_t base = ((static_cast<std::size_t>(m) * N + n) * O + o) * P;
                double dot_c = 0.0;  // sum_p w[m,n,o,p] c[p]
                for (int p = 0; p < P; ++p) {
                    const double wv = wp[base + p];
                    dot_c += wv * c[p];
                    if (gwp) gwp[base + p] += uab * c[p];
                    if (grad_c) (*grad_c)[p] += uab * wv;
                }
                acc_n += b[o] * dot_c;
                if (grad_b) (*grad_b)[o] += uan * dot_c;
            }
            if (grad_a) (*grad_a)[n] += um * acc_n;
        }
    }
}

}  // namespace detail

/// Exact gradients of the pre-activation contraction:
/// grad_w[m,n,o,p] = u[m] a[n] b[o] c[p]; grad_a[n] = sum_{m,o,p} u[m] w[m,n,o,p] b[o] c[p];
/// grad_b and grad_c analogous.
inline Contract3Gradients contract3_backward(const WeightTensor4& w,
                                             const FeatureVector& a,
                                             const FeatureVector& b,
                                             const FeatureVector& c,
                                             const FeatureVector& upstream) {
    detail::require_length(a, w.n_dim(), "n");
    detail::require_length(b, w.o_dim(), "o");
    detail::require_length(c, w.p_dim(), "p");
    detail::require_length(upstream, w.m_dim(), "m");

    Contract3Gradients g;
    g.grad_w = WeightTensor4(w.m_dim(), w.n_dim(), w.o_dim(), w.p_dim());
    g.grad_a.assign(a.size(), 0.0);
    g.grad_b.assign(b.size(), 0.0);
    g.grad_c.assign(c.size(), 0.0);
    detail::contract3_backward_acc(w, a, b, c, upstream, &g.grad_w, &g.grad_a,
                                   &g.grad_b, &g.grad_c);
    return g;
}

}  // namespace tnm
