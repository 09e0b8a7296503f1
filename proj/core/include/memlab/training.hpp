#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "matrix.hpp"
#include "network.hpp"
#include "rng.hpp"

namespace memlab {

/// ℓ(ŷ, y) = (ln(d) − ŷy)₊ : hinge loss with target margin ln(d).
template <typename T>
T hinge_loss(T yhat, T y, T target_margin) {
    const T v = target_margin - yhat * y;
    return v > T(0) ? v : T(0);
}

template <typename T>
T target_margin_for(const Dataset<T>& data) {
    return static_cast<T>(std::log(static_cast<double>(data.d)));
}

/// Hinge keyed by the input dimension. d < 2 would make the target ≤ 0.
inline double scaled_hinge(double yhat, double y, std::size_t d) {
    detail::require(d >= 2, "scaled_hinge: d must be >= 2");
    return hinge_loss(yhat, y, std::log(static_cast<double>(d)));
}

/// η = m·ln(d)/d.
inline double default_step_size(std::size_t m, std::size_t d) {
    detail::require(m >= 1, "default_step_size: m must be >= 1");
    detail::require(d >= 2, "default_step_size: d must be >= 2");
    return static_cast<double>(m) * std::log(static_cast<double>(d)) / static_cast<double>(d);
}

/// paper: every example contributes (the all-hinges-active event); exact: the
/// true subgradient, contributions only where the hinge is strictly positive.
/// A margin equal to the target exactly counts as inactive in both views.
enum class GradientMode { paper, exact };

template <typename T>
struct GradStepResult {
    DenseMatrix<T> G;           // q×d
    T eta = 0;
    std::size_t active_count = 0;
    DenseMatrix<T> W_plus;      // W + eta·G
};

namespace detail {

/// Shared batched assembly: G = Cᵀ·X with C[i,j] = cᵢ·aⱼ·σ'(⟨wⱼ,xᵢ⟩) and
/// cᵢ = yᵢ/(m√q) (masked by hinge activity in exact mode, zeroed for a held
/// out index). Returns the active-hinge count alongside.
template <typename T>
std::size_t assemble_gradient(const Network<T>& net, const Dataset<T>& data, GradientMode mode,
                              std::ptrdiff_t skip_index, DenseMatrix<T>& G_out) {
    require(data.d == net.d, "gradient: dimension mismatch");
    const std::size_t m = data.m, q = net.q;
    G_out = DenseMatrix<T>(q, net.d);
    if (m == 0) return 0;
    const T target = target_margin_for(data);
    const T scale = T(1) / (static_cast<T>(m) * static_cast<T>(std::sqrt(static_cast<double>(q))));
    DenseMatrix<T> C = matmul_bt(data.inputs, net.W);  // preactivations, scaled in place below
    std::size_t active = 0;
    for (std::size_t i = 0; i < m; ++i) {
        T* row = C.row(i);
        const T h = output_from_preactivations(net, row);
        const bool is_active = data.labels[i] * h < target;
        active += is_active;
        T c = data.labels[i] * scale;
        if (mode == GradientMode::exact && !is_active) c = T(0);
        if (static_cast<std::ptrdiff_t>(i) == skip_index) c = T(0);
        for (std::size_t j = 0; j < q; ++j)
            row[j] = c * net.a[j] * net.activation.derivative(row[j]);
    }
    const DenseMatrix<T> Ct = transpose(C);
    matmul_accumulate(Ct, data.inputs, G_out);
    return active;
}

} // namespace detail

/// Gⁱ = (1/(m√q)) yᵢ diag(a) σ'(Wxᵢ) xᵢᵀ (zero in exact mode if the hinge is
/// inactive). Rank ≤ 1 by construction.
template <typename T>
DenseMatrix<T> per_example_gradient(const Network<T>& net, const Dataset<T>& data, std::size_t i,
                                    GradientMode mode) {
    detail::require(i < data.m, "per_example_gradient: index out of range");
    detail::require(data.d == net.d, "per_example_gradient: dimension mismatch");
    const std::size_t q = net.q, d = net.d;
    DenseMatrix<T> G(q, d);
    DenseVector<T> x(d);
    for (std::size_t k = 0; k < d; ++k) x[k] = data.inputs(i, k);
    const DenseVector<T> pre = matvec(net.W, x);
    if (mode == GradientMode::exact) {
        const T h = output_from_preactivations(net, pre.data());
        if (!(data.labels[i] * h < target_margin_for(data))) return G;
    }
    const T c = data.labels[i] /
                (static_cast<T>(data.m) * static_cast<T>(std::sqrt(static_cast<double>(q))));
    for (std::size_t j = 0; j < q; ++j) {
        const T s = c * net.a[j] * net.activation.derivative(pre[j]);
        T* row = G.row(j);
        for (std::size_t k = 0; k < d; ++k) row[k] = s * x[k];
    }
    return G;
}

template <typename T>
DenseMatrix<T> full_gradient(const Network<T>& net, const Dataset<T>& data, GradientMode mode) {
    DenseMatrix<T> G;
    detail::assemble_gradient(net, data, mode, -1, G);
    return G;
}

template <typename T>
std::size_t count_active_hinges(const Network<T>& net, const Dataset<T>& data) {
    const DenseVector<T> marg = margins(net, data);
    const T target = target_margin_for(data);
    std::size_t n = 0;
    for (std::size_t i = 0; i < data.m; ++i) n += (marg[i] < target);
    return n;
}

/// G̃: the gradient sum without example hold_out, keeping the 1/m
/// normalization (m−1 terms over m).
template <typename T>
DenseMatrix<T> leave_one_out_gradient(const Network<T>& net, const Dataset<T>& data,
                                      std::size_t hold_out, GradientMode mode) {
    detail::require(hold_out < data.m, "leave_one_out_gradient: index out of range");
    DenseMatrix<T> G;
    detail::assemble_gradient(net, data, mode, static_cast<std::ptrdiff_t>(hold_out), G);
    return G;
}

/// W⁺ = W + ηG. The input network is not modified.
template <typename T>
GradStepResult<T> gradient_step(const Network<T>& net, const Dataset<T>& data, T eta,
                                GradientMode mode) {
    detail::require(eta >= T(0), "gradient_step: eta must be nonnegative");
    GradStepResult<T> r;
    r.eta = eta;
    r.active_count = detail::assemble_gradient(net, data, mode, -1, r.G);
    r.W_plus = net.W;
    for (std::size_t i = 0; i < r.W_plus.a.size(); ++i) r.W_plus.a[i] += eta * r.G.a[i];
    return r;
}

/// L(W) = (1/m) ∑ ℓ(h_W(xᵢ), yᵢ).
template <typename T>
T empirical_loss(const Network<T>& net, const Dataset<T>& data) {
    detail::require(data.m > 0, "empirical_loss: empty dataset");
    const T target = target_margin_for(data);
    const DenseMatrix<T> P = matmul_bt(data.inputs, net.W);
    CompensatedSum<T> acc;
    for (std::size_t i = 0; i < data.m; ++i)
        acc.add(hinge_loss(output_from_preactivations(net, P.row(i)), data.labels[i], target));
    return acc.value() / static_cast<T>(data.m);
}

/// Central-difference gradient of L; the descent-direction contract is
/// FD ≈ −G. Requires smoothness at every sampled preactivation: for kinked
/// activations every ⟨wⱼ,xᵢ⟩ must sit further than 10h from a breakpoint.
/// Entry (j,k) perturbs only preactivation column j, so the loss is
/// re-evaluated incrementally from cached preactivations.
template <typename T>
DenseMatrix<T> finite_diff_gradient(const Network<T>& net, const Dataset<T>& data, T h) {
    detail::require(data.d == net.d, "finite_diff_gradient: dimension mismatch");
    detail::require(h > T(0), "finite_diff_gradient: h must be positive");
    const std::size_t m = data.m, q = net.q, d = net.d;
    const T target = target_margin_for(data);
    const DenseMatrix<T> P = matmul_bt(data.inputs, net.W);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < q; ++j)
            for (double bp : net.activation.breakpoints)
                if (std::abs(static_cast<double>(P(i, j)) - bp) <= 10.0 * static_cast<double>(h))
                    throw std::runtime_error(
                        "finite_diff_gradient: preactivation (i=" + std::to_string(i) +
                        ", j=" + std::to_string(j) + ") within 10h of an activation breakpoint");

    std::vector<T> h_base(m);
    for (std::size_t i = 0; i < m; ++i) h_base[i] = output_from_preactivations(net, P.row(i));
    const T inv_sqrt_q = T(1) / static_cast<T>(std::sqrt(static_cast<double>(q)));

    DenseMatrix<T> FD(q, d);
    for (std::size_t j = 0; j < q; ++j) {
        for (std::size_t k = 0; k < d; ++k) {
            CompensatedSum<T> lp, lm;
            for (std::size_t i = 0; i < m; ++i) {
                const T pre = P(i, j);
                const T shift = h * data.inputs(i, k);
                const T base_term = net.a[j] * net.activation.value(pre);
                const T hp = h_base[i] + (net.a[j] * net.activation.value(pre + shift) - base_term) * inv_sqrt_q;
                const T hm = h_base[i] + (net.a[j] * net.activation.value(pre - shift) - base_term) * inv_sqrt_q;
                lp.add(hinge_loss(hp, data.labels[i], target));
                lm.add(hinge_loss(hm, data.labels[i], target));
            }
            FD(j, k) = (lp.value() - lm.value()) / (T(2) * h * static_cast<T>(m));
        }
    }
    return FD;
}

} // namespace memlab
