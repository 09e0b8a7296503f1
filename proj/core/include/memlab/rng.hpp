#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "matrix.hpp"

namespace memlab {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

/// SplitMix64 output mix (Vigna). Stateless; the generator below advances
/// state by kGolden and runs this on the result.
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Deterministic stream: identical (seed, stream_id) yields the identical
/// sequence. Gaussians come from Box-Muller in double and are cast by callers
/// that want lower precision, so single-precision runs replay the same draws.
struct RngStream {
    std::uint64_t state = 0;
    std::uint64_t origin = 0;   // initial state, the base for substreams
    std::uint64_t stream_id = 0;
    bool has_cached_gauss = false;
    double cached_gauss = 0;

    std::uint64_t next_u64() { return splitmix64_mix(state += kGolden); }

    /// Uniform in (0,1]; never 0, so log() below is safe.
    double next_unit_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    /// Uniform in [0,1).
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double next_gauss() {
        if (has_cached_gauss) {
            has_cached_gauss = false;
            return cached_gauss;
        }
        const double r = std::sqrt(-2.0 * std::log(next_unit_pos()));
        const double t = 2.0 * std::numbers::pi * next_unit();
        cached_gauss = r * std::sin(t);
        has_cached_gauss = true;
        return r * std::cos(t);
    }

    /// +1 or -1, uniform.
    int next_sign() { return (next_u64() >> 63) ? 1 : -1; }

    /// Unbiased uniform integer in [0, n). Rejection on the biased tail.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t(0) - ~std::uint64_t(0) % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    /// Decorrelated child stream; derived from the stream's initial state so
    /// the substream layout does not depend on how much was consumed.
    RngStream substream(std::uint64_t role) const {
        RngStream s;
        s.state = splitmix64_mix(origin ^ ((role + 1) * kGolden));
        s.origin = s.state;
        s.stream_id = stream_id;
        return s;
    }
};

/// One SplitMix64 mixing step of (seed XOR replicate·golden). Distinct
/// replicates give decorrelated streams; replicate-level parallelism cannot
/// change any drawn value.
inline RngStream derive_stream(std::uint64_t seed, std::uint64_t replicate) {
    RngStream s;
    s.state = splitmix64_mix(seed ^ (replicate * kGolden));
    s.origin = s.state;
    s.stream_id = replicate;
    return s;
}

enum class SignMode { iid, balanced };

/// Output signs a. iid: independent uniform. balanced: exactly ⌊q/2⌋ entries
/// are −1, placed by a seeded Fisher-Yates shuffle, so |∑aᵢ| ≤ 1.
template <typename T>
DenseVector<T> sample_signs(RngStream& rng, std::size_t q, SignMode mode) {
    detail::require(q >= 1, "sample_signs: q must be >= 1");
    DenseVector<T> a(q);
    if (mode == SignMode::iid) {
        for (std::size_t i = 0; i < q; ++i) a[i] = static_cast<T>(rng.next_sign());
        return a;
    }
    for (std::size_t i = 0; i < q; ++i) a[i] = (i < q / 2) ? T(-1) : T(1);
    for (std::size_t i = q - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i + 1));
        std::swap(a.a[i], a.a[j]);
    }
    return a;
}

template <typename T>
struct Dataset {
    std::size_t m = 0;
    std::size_t d = 0;
    DenseMatrix<T> inputs;     // m×d, rows xᵢ ~ N(0, I_d)
    std::vector<T> labels;     // ±1
};

/// Inputs and labels come from independent substreams of rng, so the same
/// stream produces the same x-rows regardless of label consumption and vice
/// versa.
template <typename T>
Dataset<T> sample_dataset(RngStream& rng, std::size_t m, std::size_t d) {
    detail::require(d >= 1, "sample_dataset: d must be >= 1");
    Dataset<T> ds;
    ds.m = m;
    ds.d = d;
    ds.inputs = DenseMatrix<T>(m, d);
    ds.labels.resize(m);
    RngStream xs = rng.substream(0);
    RngStream ys = rng.substream(1);
    for (std::size_t i = 0; i < m; ++i) {
        T* row = ds.inputs.row(i);
        for (std::size_t j = 0; j < d; ++j) row[j] = static_cast<T>(xs.next_gauss());
    }
    for (std::size_t i = 0; i < m; ++i) ds.labels[i] = static_cast<T>(ys.next_sign());
    return ds;
}

/// q×d matrix of iid standard Gaussians (the raw material for Haar rows).
template <typename T>
DenseMatrix<T> sample_gaussian_matrix(RngStream& rng, std::size_t q, std::size_t d) {
    DenseMatrix<T> g(q, d);
    for (auto& v : g.a) v = static_cast<T>(rng.next_gauss());
    return g;
}

} // namespace memlab
