#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "quadrature.hpp"

namespace memlab {

enum class ActKind { abs_value, smoothed_abs, relu };

/// Activation family. abs is the reference case; smoothed_abs(ε) is its
/// smooth surrogate (offset by −ε so σ(0)=0); relu is carried as a negative
/// control because its derivative is not centered under N(0,1).
struct Activation {
    ActKind kind = ActKind::abs_value;
    double epsilon = 0;                 // smoothed_abs only
    double lipschitz_bound = 1;         // sup |σ'|
    double second_derivative_bound = 0; // per twice-differentiable piece
    std::vector<double> breakpoints;    // where second differentiability fails

    static Activation make_abs() {
        Activation a;
        a.kind = ActKind::abs_value;
        a.breakpoints = {0.0};
        return a;
    }
    static Activation make_smoothed_abs(double eps) {
        detail::require(eps > 0, "smoothed_abs: epsilon must be positive");
        Activation a;
        a.kind = ActKind::smoothed_abs;
        a.epsilon = eps;
        a.second_derivative_bound = 1.0 / eps;  // σ''(z) = ε²/(z²+ε²)^{3/2}, max at 0
        return a;
    }
    static Activation make_relu() {
        Activation a;
        a.kind = ActKind::relu;
        a.breakpoints = {0.0};
        return a;
    }

    /// (σ(z), σ'(z)). sign(0) := 0 for abs, keeping σ' odd pointwise.
    template <typename T>
    std::pair<T, T> value_and_derivative(T z) const {
        switch (kind) {
            case ActKind::abs_value:
                return {z < T(0) ? -z : z, z > T(0) ? T(1) : (z < T(0) ? T(-1) : T(0))};
            case ActKind::smoothed_abs: {
                const T e = static_cast<T>(epsilon);
                const T r = std::sqrt(z * z + e * e);
                return {r - e, z / r};
            }
            case ActKind::relu:
                return {z > T(0) ? z : T(0), z > T(0) ? T(1) : T(0)};
        }
        return {T(0), T(0)};
    }

    template <typename T>
    T value(T z) const {
        return value_and_derivative(z).first;
    }
    template <typename T>
    T derivative(T z) const {
        return value_and_derivative(z).second;
    }

    std::string name() const {
        switch (kind) {
            case ActKind::abs_value: return "abs";
            case ActKind::smoothed_abs: {
                char buf[48];
                std::snprintf(buf, sizeof buf, "smoothed_abs(%g)", epsilon);
                return buf;
            }
            case ActKind::relu: return "relu";
        }
        return "?";
    }
};

struct CenteredDerivative {
    double value = 0;
    bool valid = false;
};

/// E σ'(X), X ~ N(0,1); the activation is usable for the one-step experiment
/// only when this vanishes. Quadrature splits at the breakpoints so the kink
/// of abs/relu never degrades the estimate.
inline CenteredDerivative check_centered_derivative(const Activation& act,
                                                    std::size_t quad_order = 64) {
    const double v = normal_expectation(
        [&act](double z) { return act.derivative(z); }, act.breakpoints, quad_order);
    return {v, std::abs(v) <= 1e-8};
}

/// E (σ'(X))², the predicted margin coefficient.
inline double expected_sq_derivative(const Activation& act, std::size_t quad_order = 64) {
    return normal_expectation(
        [&act](double z) {
            const double s = act.derivative(z);
            return s * s;
        },
        act.breakpoints, quad_order);
}

} // namespace memlab
