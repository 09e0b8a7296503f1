#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "matrix.hpp"

namespace memlab {

struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Hermite rule for ∫ e^{-t²} f(t) dt: Newton iteration on the
/// normalized Hermite recurrence, so intermediate values stay O(1) and the
/// rule is stable well past n = 256.
inline QuadRule gauss_hermite(std::size_t n) {
    detail::require(n >= 1, "gauss_hermite: need n >= 1");
    constexpr double PIM4 = 0.7511255444649425;  // pi^(-1/4)
    constexpr int MAXIT = 16;
    QuadRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const std::size_t m = (n + 1) / 2;
    double z = 0, pp = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        else if (i == 1)
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * r.nodes[0];
        else if (i == 3)
            z = 1.91 * z - 0.91 * r.nodes[1];
        else
            z = 2.0 * z - r.nodes[i - 2];
        int it = 0;
        for (; it < MAXIT; ++it) {
            double p1 = PIM4, p2 = 0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        if (it == MAXIT) throw std::runtime_error("gauss_hermite: Newton iteration stalled");
        r.nodes[i] = z;
        r.nodes[n - 1 - i] = -z;
        r.weights[i] = 2.0 / (pp * pp);
        r.weights[n - 1 - i] = r.weights[i];
    }
    if (n % 2 == 1) r.nodes[m - 1] = 0.0;  // exact center for odd rules
    return r;
}

/// Gauss-Legendre rule on [-1, 1].
inline QuadRule gauss_legendre(std::size_t n) {
    detail::require(n >= 1, "gauss_legendre: need n >= 1");
    QuadRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const std::size_t m = (n + 1) / 2;
    for (std::size_t i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-15) break;
        }
        r.nodes[i] = -z;
        r.nodes[n - 1 - i] = z;
        r.weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        r.weights[n - 1 - i] = r.weights[i];
    }
    return r;
}

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) * 0.3989422804014326779;  // 1/sqrt(2*pi)
}

/// E f(X), X ~ N(0,1). Breakpoint-free integrands use Gauss-Hermite with the
/// weight change f(√2 t)/√π. With breakpoints the integral runs piecewise
/// against the explicit normal density: Gauss-Legendre panels of width ≤ 1
/// covering [-12, 12] (tail mass < 2e-33), split at every breakpoint, so a
/// kink never sits inside a panel. Symmetric activations keep node symmetry,
/// which cancels odd integrands to float accuracy.
inline double normal_expectation(const std::function<double(double)>& f,
                                 const std::vector<double>& breakpoints, std::size_t order) {
    detail::require(order >= 16, "normal_expectation: need order >= 16");
    CompensatedSum<double> acc;
    if (breakpoints.empty()) {
        const QuadRule gh = gauss_hermite(order);
        constexpr double inv_sqrt_pi = 0.5641895835477562869;
        const double s = std::numbers::sqrt2;
        for (std::size_t i = 0; i < gh.nodes.size(); ++i)
            acc.add(gh.weights[i] * inv_sqrt_pi * f(s * gh.nodes[i]));
        return acc.value();
    }
    constexpr double B = 12.0;
    std::vector<double> edges{-B};
    for (double b : breakpoints)
        if (b > -B && b < B) edges.push_back(b);
    edges.push_back(B);
    std::sort(edges.begin(), edges.end());
    const QuadRule gl = gauss_legendre(std::min<std::size_t>(std::max<std::size_t>(order, 16), 64));
    for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
        const double lo = edges[e], hi = edges[e + 1];
        if (hi <= lo) continue;
        const std::size_t panels = static_cast<std::size_t>(std::ceil(hi - lo));
        const double h = (hi - lo) / static_cast<double>(panels);
        for (std::size_t p = 0; p < panels; ++p) {
            const double a = lo + h * static_cast<double>(p);
            const double c = a + 0.5 * h, half = 0.5 * h;
            for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
                const double x = c + half * gl.nodes[i];
                acc.add(half * gl.weights[i] * f(x) * normal_pdf(x));
            }
        }
    }
    return acc.value();
}

} // namespace memlab
