#pragma once

#include <cmath>
#include <cstddef>

#include "activation.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace memlab {

/// h_W(x) = (1/√q) ∑ aᵢ σ(⟨wᵢ, x⟩); no bias terms anywhere.
template <typename T>
struct Network {
    std::size_t q = 0;
    std::size_t d = 0;
    DenseMatrix<T> W;      // q×d, rows wᵢ (orthonormal when freshly initialized)
    DenseVector<T> a;      // ±1 output signs
    Activation activation;
};

template <typename T>
T forward(const Network<T>& net, const DenseVector<T>& x) {
    detail::require(x.dim() == net.d, "forward: dimension mismatch");
    CompensatedSum<T> acc;
    for (std::size_t j = 0; j < net.q; ++j)
        acc.add(net.a[j] * net.activation.value(dot(net.W.row(j), x.data(), net.d)));
    return acc.value() / static_cast<T>(std::sqrt(static_cast<double>(net.q)));
}

/// Activation reduction of one precomputed preactivation row (length q).
template <typename T>
T output_from_preactivations(const Network<T>& net, const T* pre) {
    CompensatedSum<T> acc;
    for (std::size_t j = 0; j < net.q; ++j) acc.add(net.a[j] * net.activation.value(pre[j]));
    return acc.value() / static_cast<T>(std::sqrt(static_cast<double>(net.q)));
}

/// yᵢ · h(xᵢ) for the whole dataset; preactivations go through the blocked
/// A·Bᵀ kernel, the q-reductions are compensated.
template <typename T>
DenseVector<T> margins(const Network<T>& net, const Dataset<T>& data) {
    detail::require(data.d == net.d, "margins: dimension mismatch");
    DenseVector<T> r(data.m);
    if (data.m == 0) return r;
    const DenseMatrix<T> P = matmul_bt(data.inputs, net.W);  // m×q
    for (std::size_t i = 0; i < data.m; ++i)
        r[i] = data.labels[i] * output_from_preactivations(net, P.row(i));
    return r;
}

} // namespace memlab
