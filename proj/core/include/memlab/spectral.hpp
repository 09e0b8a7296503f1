#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "matrix.hpp"
#include "rng.hpp"

namespace memlab {

struct SpectralNormError : std::runtime_error {
    double last_value;
    std::size_t iterations;
    SpectralNormError(double v, std::size_t it)
        : std::runtime_error("spectral_norm: no convergence after " + std::to_string(it) +
                             " iterations, last iterate " + std::to_string(v)),
          last_value(v),
          iterations(it) {}
};

struct SpectralResult {
    double value = 0;
    std::size_t iterations = 0;
};

namespace detail {

/// Power iteration on a symmetric PSD matrix. Start vector is all-ones
/// normalized (deterministic); the Cauchy stop |λ_k − λ_{k−1}| ≤ tol·λ_k
/// matches a relative tolerance on the dominant eigenvalue. If the iterate
/// lands in the null space, restart from a seeded deterministic vector.
template <typename T>
SpectralResult power_iteration_sym(const DenseMatrix<T>& S, double tol, std::size_t max_iter) {
    const std::size_t n = S.rows;
    DenseVector<T> v(n, T(1) / static_cast<T>(std::sqrt(static_cast<double>(n))));
    double lam = 0;
    std::uint64_t restarts = 0;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        DenseVector<T> u = matvec(S, v);
        double nu = 0;
        for (std::size_t i = 0; i < n; ++i) nu += static_cast<double>(u[i]) * static_cast<double>(u[i]);
        nu = std::sqrt(nu);
        if (nu == 0) {
            // v is in the null space; deterministic re-jitter and continue.
            RngStream js = derive_stream(0x5eedbeef, ++restarts);
            double norm2 = 0;
            for (std::size_t i = 0; i < n; ++i) {
                v[i] = static_cast<T>(js.next_gauss());
                norm2 += static_cast<double>(v[i]) * static_cast<double>(v[i]);
            }
            if (norm2 == 0 || restarts > 3) return {0.0, it};
            const T inv = static_cast<T>(1.0 / std::sqrt(norm2));
            for (std::size_t i = 0; i < n; ++i) v[i] *= inv;
            continue;
        }
        const T inv = static_cast<T>(1.0 / nu);
        for (std::size_t i = 0; i < n; ++i) v[i] = u[i] * inv;
        if (std::abs(nu - lam) <= tol * nu) return {nu, it};
        lam = nu;
    }
    throw SpectralNormError(std::sqrt(std::max(lam, 0.0)), max_iter);
}

} // namespace detail

/// Largest singular value of A to relative tolerance tol, via power iteration
/// on the smaller Gram matrix (AAᵀ if rows ≤ cols, else AᵀA).
template <typename T>
SpectralResult spectral_norm_full(const DenseMatrix<T>& A, double tol = 1e-8,
                                  std::size_t max_iter = 0) {
    detail::require(A.rows > 0 && A.cols > 0, "spectral_norm: empty matrix");
    detail::require(tol > 0, "spectral_norm: tol must be positive");
    if (max_iter == 0) max_iter = 10 * std::max(A.rows, A.cols);
    if (frobenius_norm(A) == T(0)) return {0.0, 0};
    DenseMatrix<T> S = (A.rows <= A.cols) ? gram_aat(A) : gram_aat(transpose(A));
    SpectralResult r = detail::power_iteration_sym(S, tol, max_iter);
    r.value = std::sqrt(std::max(r.value, 0.0));
    return r;
}

template <typename T>
double spectral_norm(const DenseMatrix<T>& A, double tol = 1e-8, std::size_t max_iter = 0) {
    return spectral_norm_full(A, tol, max_iter).value;
}

} // namespace memlab
