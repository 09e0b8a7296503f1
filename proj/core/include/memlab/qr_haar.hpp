#pragma once

#include <cmath>
#include <cstddef>
#include <limits>

#include "matrix.hpp"

namespace memlab {

namespace detail {

/// Elementary reflector for a row segment (a, x[0..n)): computes beta, tau and
/// overwrites x with the scaled tail v (v0 = 1 implicit), LAPACK larfg-style.
template <typename T>
void make_reflector(T& a, T* x, std::size_t n, T& beta, T& tau) {
    T xnorm2 = 0;
    for (std::size_t i = 0; i < n; ++i) xnorm2 += x[i] * x[i];
    if (xnorm2 == T(0)) {
        beta = a;
        tau = T(0);
        return;
    }
    const T mu = std::sqrt(a * a + xnorm2);
    beta = (a >= T(0)) ? -mu : mu;
    tau = (beta - a) / beta;
    const T inv = T(1) / (a - beta);
    for (std::size_t i = 0; i < n; ++i) x[i] *= inv;
    a = beta;
}

/// y[r×nb] = X[r×len] · Vᵀ[len×nb], row stride ldx; V rows are reflectors.
template <typename T>
void panel_xvt(const T* X, std::size_t ldx, std::size_t r, const T* V, std::size_t ldv,
               std::size_t nb, std::size_t len, T* Y) {
    for (std::size_t i = 0; i < r; ++i) {
        const T* xi = X + i * ldx;
        T* yi = Y + i * nb;
        std::size_t j = 0;
        for (; j + 4 <= nb; j += 4) {
            const T* v0 = V + j * ldv;
            const T* v1 = V + (j + 1) * ldv;
            const T* v2 = V + (j + 2) * ldv;
            const T* v3 = V + (j + 3) * ldv;
            T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
            for (std::size_t k = 0; k < len; ++k) {
                const T xv = xi[k];
                s0 += xv * v0[k];
                s1 += xv * v1[k];
                s2 += xv * v2[k];
                s3 += xv * v3[k];
            }
            yi[j] = s0;
            yi[j + 1] = s1;
            yi[j + 2] = s2;
            yi[j + 3] = s3;
        }
        for (; j < nb; ++j) yi[j] = dot(V + j * ldv, xi, len);
    }
}

/// X[r×len] -= Y[r×nb] · V[nb×len], row stride ldx.
template <typename T>
void panel_sub_yv(T* X, std::size_t ldx, std::size_t r, const T* Y, const T* V, std::size_t ldv,
                  std::size_t nb, std::size_t len) {
    for (std::size_t i = 0; i < r; ++i) {
        T* xi = X + i * ldx;
        const T* yi = Y + i * nb;
        for (std::size_t j = 0; j < nb; ++j) {
            const T c = yi[j];
            if (c == T(0)) continue;
            const T* vj = V + j * ldv;
            for (std::size_t k = 0; k < len; ++k) xi[k] -= c * vj[k];
        }
    }
}

} // namespace detail

/// Orthonormal rows from a full-row-rank q×d matrix (q ≤ d) via blocked
/// Householder LQ with the diagonal sign correction: with Gaussian input the
/// output is Haar on the Stiefel manifold. Throws on rank deficiency.
template <typename T>
DenseMatrix<T> orthonormal_rows(const DenseMatrix<T>& G) {
    const std::size_t q = G.rows, d = G.cols;
    detail::require(q >= 1 && q <= d, "orthonormal_rows: need 1 <= q <= d");

    constexpr std::size_t NB = 32;
    DenseMatrix<T> F = G;                       // factored in place: L + reflector tails
    std::vector<T> tau(q), sign(q);
    std::vector<T> V(NB * d), Tm(NB * NB), Y;
    std::vector<T> w(NB);

    // rank guard scale: a pivot below d·eps·(max row norm) means the row was
    // (numerically) a combination of the rows above it
    T scale = 0;
    for (std::size_t i = 0; i < q; ++i)
        scale = std::max(scale, std::sqrt(dot(G.row(i), G.row(i), d)));
    const T pivot_floor = static_cast<T>(d) * std::numeric_limits<T>::epsilon() * scale;

    for (std::size_t k0 = 0; k0 < q; k0 += NB) {
        const std::size_t nb = std::min(NB, q - k0);
        const std::size_t len = d - k0;

        // Factor the panel (level 2 within its own rows).
        for (std::size_t j = 0; j < nb; ++j) {
            const std::size_t k = k0 + j;
            T beta;
            detail::make_reflector(F(k, k), F.row(k) + k + 1, d - k - 1, beta, tau[k]);
            if (std::abs(beta) <= pivot_floor)
                throw std::invalid_argument("orthonormal_rows: rank-deficient input");
            sign[k] = (beta > T(0)) ? T(1) : T(-1);
            if (tau[k] != T(0)) {
                const T* v = F.row(k) + k + 1;
                for (std::size_t r = k + 1; r < k0 + nb; ++r) {
                    T* xr = F.row(r);
                    T c = xr[k] + dot(v, xr + k + 1, d - k - 1);
                    c *= tau[k];
                    xr[k] -= c;
                    for (std::size_t t = 0; t < d - k - 1; ++t) xr[k + 1 + t] -= c * v[t];
                }
            }
        }

        // Materialize V (unit diagonal, explicit zeros) over columns [k0, d).
        std::fill(V.begin(), V.begin() + nb * len, T(0));
        for (std::size_t j = 0; j < nb; ++j) {
            V[j * len + j] = T(1);
            const std::size_t k = k0 + j;
            const T* src = F.row(k) + k + 1;
            for (std::size_t t = 0; t < d - k - 1; ++t) V[j * len + j + 1 + t] = src[t];
        }

        // T factor of the forward product H_{k0}···H_{k0+nb-1} = I − VᵀTV.
        std::fill(Tm.begin(), Tm.begin() + nb * nb, T(0));
        Tm[0] = tau[k0];
        for (std::size_t j = 1; j < nb; ++j) {
            const T* vj = V.data() + j * len;
            for (std::size_t i = 0; i < j; ++i) w[i] = dot(V.data() + i * len, vj, len);
            for (std::size_t i = 0; i < j; ++i) {
                T s = 0;
                for (std::size_t t = i; t < j; ++t) s += Tm[i * nb + t] * w[t];
                Tm[i * nb + j] = -tau[k0 + j] * s;
            }
            Tm[j * nb + j] = tau[k0 + j];
        }

        // Trailing rows: F2 ← F2 · (I − VᵀTV).
        const std::size_t r = q - (k0 + nb);
        if (r > 0) {
            Y.resize(r * nb);
            T* F2 = F.row(k0 + nb) + k0;
            detail::panel_xvt(F2, d, r, V.data(), len, nb, len, Y.data());
            for (std::size_t i = 0; i < r; ++i) {
                T* yi = Y.data() + i * nb;
                T tmp[NB];
                for (std::size_t j = 0; j < nb; ++j) {
                    T s = 0;
                    for (std::size_t t = 0; t <= j; ++t) s += yi[t] * Tm[t * nb + j];
                    tmp[j] = s;
                }
                for (std::size_t j = 0; j < nb; ++j) yi[j] = tmp[j];
            }
            detail::panel_sub_yv(F2, d, r, Y.data(), V.data(), len, nb, len);
        }
    }

    // Backward accumulation of W = E_q · H_{q-1}···H_0, one panel block
    // Pᵀ = I − VᵀTᵀV at a time; rows/columns below k0 are untouched by
    // construction, so each update runs on the trailing window only.
    DenseMatrix<T> W(q, d);
    for (std::size_t i = 0; i < q; ++i) W(i, i) = T(1);

    std::size_t nblocks = (q + NB - 1) / NB;
    for (std::size_t b = nblocks; b-- > 0;) {
        const std::size_t k0 = b * NB;
        const std::size_t nb = std::min(NB, q - k0);
        const std::size_t len = d - k0;
        const std::size_t r = q - k0;

        std::fill(V.begin(), V.begin() + nb * len, T(0));
        for (std::size_t j = 0; j < nb; ++j) {
            V[j * len + j] = T(1);
            const std::size_t k = k0 + j;
            const T* src = F.row(k) + k + 1;
            for (std::size_t t = 0; t < d - k - 1; ++t) V[j * len + j + 1 + t] = src[t];
        }
        std::fill(Tm.begin(), Tm.begin() + nb * nb, T(0));
        Tm[0] = tau[k0];
        for (std::size_t j = 1; j < nb; ++j) {
            const T* vj = V.data() + j * len;
            for (std::size_t i = 0; i < j; ++i) w[i] = dot(V.data() + i * len, vj, len);
            for (std::size_t i = 0; i < j; ++i) {
                T s = 0;
                for (std::size_t t = i; t < j; ++t) s += Tm[i * nb + t] * w[t];
                Tm[i * nb + j] = -tau[k0 + j] * s;
            }
            Tm[j * nb + j] = tau[k0 + j];
        }

        Y.resize(r * nb);
        T* Wsub = W.row(k0) + k0;
        detail::panel_xvt(Wsub, d, r, V.data(), len, nb, len, Y.data());
        // Y ← Y · Tᵀ (T upper triangular, so Tᵀ lower).
        for (std::size_t i = 0; i < r; ++i) {
            T* yi = Y.data() + i * nb;
            T tmp[NB];
            for (std::size_t j = 0; j < nb; ++j) {
                T s = 0;
                for (std::size_t t = j; t < nb; ++t) s += yi[t] * Tm[j * nb + t];
                tmp[j] = s;
            }
            for (std::size_t j = 0; j < nb; ++j) yi[j] = tmp[j];
        }
        detail::panel_sub_yv(Wsub, d, r, Y.data(), V.data(), len, nb, len);
    }

    for (std::size_t k = 0; k < q; ++k) {
        if (sign[k] < T(0)) {
            T* row = W.row(k);
            for (std::size_t j = 0; j < d; ++j) row[j] = -row[j];
        }
    }
    return W;
}

/// Deterministic orthonormal initializer: the first q rows of I_d.
template <typename T>
DenseMatrix<T> basis_rows(std::size_t q, std::size_t d) {
    detail::require(q >= 1 && q <= d, "basis_rows: need 1 <= q <= d");
    DenseMatrix<T> W(q, d);
    for (std::size_t i = 0; i < q; ++i) W(i, i) = T(1);
    return W;
}

} // namespace memlab
