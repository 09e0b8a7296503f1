#pragma once

#include <cstddef>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace memlab {

/// Row-major dense matrix. Kernels below assume contiguous rows.
template <typename T>
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> a;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), a(r * c, fill) {}

    T* row(std::size_t i) { return a.data() + i * cols; }
    const T* row(std::size_t i) const { return a.data() + i * cols; }
    T& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    T operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    bool all_finite() const {
        for (T v : a)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
        return m;
    }
};

template <typename T>
struct DenseVector {
    std::vector<T> a;

    DenseVector() = default;
    explicit DenseVector(std::size_t n, T fill = T(0)) : a(n, fill) {}
    DenseVector(std::initializer_list<T> init) : a(init) {}

    std::size_t dim() const { return a.size(); }
    T& operator[](std::size_t i) { return a[i]; }
    T operator[](std::size_t i) const { return a[i]; }
    T* data() { return a.data(); }
    const T* data() const { return a.data(); }
};

namespace detail {

inline void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

} // namespace detail

template <typename T>
T dot(const T* x, const T* y, std::size_t n) {
    T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        s0 += x[k] * y[k];
        s1 += x[k + 1] * y[k + 1];
        s2 += x[k + 2] * y[k + 2];
        s3 += x[k + 3] * y[k + 3];
    }
    for (; k < n; ++k) s0 += x[k] * y[k];
    return (s0 + s1) + (s2 + s3);
}

template <typename T>
DenseVector<T> matvec(const DenseMatrix<T>& A, const DenseVector<T>& x) {
    detail::require(A.cols == x.dim(), "matvec: dimension mismatch");
    DenseVector<T> r(A.rows);
    for (std::size_t i = 0; i < A.rows; ++i) r[i] = dot(A.row(i), x.data(), A.cols);
    return r;
}

template <typename T>
DenseMatrix<T> rank1_accumulate(const DenseMatrix<T>& A, T s, const DenseVector<T>& u,
                                const DenseVector<T>& v) {
    detail::require(A.rows == u.dim() && A.cols == v.dim(), "rank1_accumulate: dimension mismatch");
    DenseMatrix<T> r = A;
    for (std::size_t i = 0; i < r.rows; ++i) {
        const T su = s * u[i];
        T* ri = r.row(i);
        for (std::size_t j = 0; j < r.cols; ++j) ri[j] += su * v[j];
    }
    return r;
}

template <typename T>
void rank1_update_inplace(DenseMatrix<T>& A, T s, const T* u, const T* v) {
    for (std::size_t i = 0; i < A.rows; ++i) {
        const T su = s * u[i];
        T* ri = A.row(i);
        for (std::size_t j = 0; j < A.cols; ++j) ri[j] += su * v[j];
    }
}

template <typename T>
DenseVector<T> row_norms_squared(const DenseMatrix<T>& A) {
    detail::require(A.rows > 0 && A.cols > 0, "row_norms_squared: empty matrix");
    DenseVector<T> r(A.rows);
    for (std::size_t i = 0; i < A.rows; ++i) r[i] = dot(A.row(i), A.row(i), A.cols);
    return r;
}

template <typename T>
T frobenius_norm(const DenseMatrix<T>& A) {
    T s = 0;
    for (T v : A.a) s += v * v;
    return std::sqrt(s);
}

/// C += A * B with A m×k, B k×n. Blocked i-k-j; the k-blocking keeps the
/// active B panel resident in cache, the inner j loop is stride-1.
template <typename T>
void matmul_accumulate(const DenseMatrix<T>& A, const DenseMatrix<T>& B, DenseMatrix<T>& C) {
    detail::require(A.cols == B.rows && C.rows == A.rows && C.cols == B.cols,
                    "matmul_accumulate: dimension mismatch");
    const std::size_t m = A.rows, k = A.cols, n = B.cols;
    constexpr std::size_t KB = 256, IB = 64;
    for (std::size_t k0 = 0; k0 < k; k0 += KB) {
        const std::size_t k1 = std::min(k0 + KB, k);
        for (std::size_t i0 = 0; i0 < m; i0 += IB) {
            const std::size_t i1 = std::min(i0 + IB, m);
            for (std::size_t i = i0; i < i1; ++i) {
                T* ci = C.row(i);
                const T* ai = A.row(i);
                for (std::size_t kk = k0; kk < k1; ++kk) {
                    const T aik = ai[kk];
                    const T* bk = B.row(kk);
                    for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
                }
            }
        }
    }
}

template <typename T>
DenseMatrix<T> matmul(const DenseMatrix<T>& A, const DenseMatrix<T>& B) {
    DenseMatrix<T> C(A.rows, B.cols);
    matmul_accumulate(A, B, C);
    return C;
}

/// C = A * Bᵀ with A m×k, B n×k. Tiled over B rows with 4-wide independent
/// accumulator chains so the k-reductions pipeline.
template <typename T>
DenseMatrix<T> matmul_bt(const DenseMatrix<T>& A, const DenseMatrix<T>& B) {
    detail::require(A.cols == B.cols, "matmul_bt: dimension mismatch");
    const std::size_t m = A.rows, n = B.rows, k = A.cols;
    DenseMatrix<T> C(m, n);
    constexpr std::size_t JB = 48;
    for (std::size_t j0 = 0; j0 < n; j0 += JB) {
        const std::size_t j1 = std::min(j0 + JB, n);
        for (std::size_t i = 0; i < m; ++i) {
            const T* ai = A.row(i);
            T* ci = C.row(i);
            std::size_t j = j0;
            for (; j + 4 <= j1; j += 4) {
                const T* b0 = B.row(j);
                const T* b1 = B.row(j + 1);
                const T* b2 = B.row(j + 2);
                const T* b3 = B.row(j + 3);
                T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const T av = ai[kk];
                    s0 += av * b0[kk];
                    s1 += av * b1[kk];
                    s2 += av * b2[kk];
                    s3 += av * b3[kk];
                }
                ci[j] = s0;
                ci[j + 1] = s1;
                ci[j + 2] = s2;
                ci[j + 3] = s3;
            }
            for (; j < j1; ++j) ci[j] = dot(ai, B.row(j), k);
        }
    }
    return C;
}

/// S = A * Aᵀ, exploiting symmetry (lower triangle computed, then mirrored).
template <typename T>
DenseMatrix<T> gram_aat(const DenseMatrix<T>& A) {
    const std::size_t n = A.rows, k = A.cols;
    DenseMatrix<T> S(n, n);
    constexpr std::size_t JB = 48;
    for (std::size_t j0 = 0; j0 < n; j0 += JB) {
        const std::size_t j1 = std::min(j0 + JB, n);
        for (std::size_t i = j0; i < n; ++i) {
            const T* ai = A.row(i);
            T* si = S.row(i);
            const std::size_t jhi = std::min(j1, i + 1);
            std::size_t j = j0;
            for (; j + 4 <= jhi; j += 4) {
                const T* b0 = A.row(j);
                const T* b1 = A.row(j + 1);
                const T* b2 = A.row(j + 2);
                const T* b3 = A.row(j + 3);
                T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const T av = ai[kk];
                    s0 += av * b0[kk];
                    s1 += av * b1[kk];
                    s2 += av * b2[kk];
                    s3 += av * b3[kk];
                }
                si[j] = s0;
                si[j + 1] = s1;
                si[j + 2] = s2;
                si[j + 3] = s3;
            }
            for (; j < jhi; ++j) si[j] = dot(ai, A.row(j), k);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) S(i, j) = S(j, i);
    return S;
}

/// Cache-blocked out-of-place transpose.
template <typename T>
DenseMatrix<T> transpose(const DenseMatrix<T>& A) {
    DenseMatrix<T> B(A.cols, A.rows);
    constexpr std::size_t TB = 32;
    for (std::size_t i0 = 0; i0 < A.rows; i0 += TB) {
        const std::size_t i1 = std::min(i0 + TB, A.rows);
        for (std::size_t j0 = 0; j0 < A.cols; j0 += TB) {
            const std::size_t j1 = std::min(j0 + TB, A.cols);
            for (std::size_t i = i0; i < i1; ++i)
                for (std::size_t j = j0; j < j1; ++j) B(j, i) = A(i, j);
        }
    }
    return B;
}

/// Neumaier-compensated sum; used in the activation reductions where a plain
/// left-to-right sum would leave ~1e-10 of noise in the leave-one-out
/// decomposition identity at q ~ 2000.
template <typename T>
struct CompensatedSum {
    T sum = 0;
    T comp = 0;

    void add(T v) {
        const T t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }
    T value() const { return sum + comp; }
};

} // namespace memlab
