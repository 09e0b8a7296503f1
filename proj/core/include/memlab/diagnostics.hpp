#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "matrix.hpp"
#include "network.hpp"
#include "spectral.hpp"
#include "training.hpp"

namespace memlab {

struct PrestepCheck {
    double max_abs_h = 0;
    double ratio = 0;  // max |h| / sqrt(ln d)
};

/// Output magnitude before the step: the one-step argument needs
/// max |h_W(xᵢ)| small next to ln(d).
template <typename T>
PrestepCheck prestep_output_check(const Network<T>& net, const Dataset<T>& data) {
    PrestepCheck r;
    if (data.m == 0) return r;
    const DenseVector<T> marg = margins(net, data);
    for (std::size_t i = 0; i < data.m; ++i)
        r.max_abs_h = std::max(r.max_abs_h, std::abs(static_cast<double>(marg[i])));
    r.ratio = r.max_abs_h / std::sqrt(std::log(static_cast<double>(data.d)));
    return r;
}

/// η·‖M‖ for M ∈ {G, G̃}; compared against the frozen bound 2.
template <typename T>
double spectral_check(const DenseMatrix<T>& M, double eta, double tol = 1e-6) {
    return eta * spectral_norm(M, tol);
}

struct RowNormSection {
    double row_norm_min = 0;          // min over i of ‖wᵢ+ηg̃ᵢ‖²
    double row_norm_max = 0;
    double row_norm_mean = 0;
    double row_norm_lower_bound = 0;  // 1 − 1/√d
    double row_norm_upper_bound = 0;  // 1 + m·ln²(d)·‖σ'‖²∞/(dq), before slack
    double gtilde_row_norm_max = 0;   // max over i of ‖ηg̃ᵢ‖²
    double gtilde_row_norm_bound = 0; // m·ln²(d)·‖σ'‖²∞/(dq)
    double deviation = 0;             // the 1/√d slack added to both bounds
    bool rows_pass = false;
    bool gtilde_pass = false;
};

/// Per-row squared norms of W+ηG̃ and ηG̃ against the concentration bounds
/// with their 1/√d deviation slack.
template <typename T>
RowNormSection row_norm_check(const DenseMatrix<T>& W, const DenseMatrix<T>& Gtilde, double eta,
                              std::size_t m, std::size_t d, std::size_t q, double sup_deriv) {
    detail::require(W.rows == Gtilde.rows && W.cols == Gtilde.cols && W.rows == q && W.cols == d,
                    "row_norm_check: dimension mismatch");
    RowNormSection s;
    const double logd = std::log(static_cast<double>(d));
    s.deviation = 1.0 / std::sqrt(static_cast<double>(d));
    s.gtilde_row_norm_bound = static_cast<double>(m) * logd * logd * sup_deriv * sup_deriv /
                              (static_cast<double>(d) * static_cast<double>(q));
    s.row_norm_lower_bound = 1.0 - s.deviation;
    s.row_norm_upper_bound = 1.0 + s.gtilde_row_norm_bound;
    s.row_norm_min = std::numeric_limits<double>::infinity();
    double sum = 0;
    for (std::size_t i = 0; i < q; ++i) {
        const T* wi = W.row(i);
        const T* gi = Gtilde.row(i);
        double wn = 0, gn = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const double wv = static_cast<double>(wi[j]) + eta * static_cast<double>(gi[j]);
            const double gv = eta * static_cast<double>(gi[j]);
            wn += wv * wv;
            gn += gv * gv;
        }
        s.row_norm_min = std::min(s.row_norm_min, wn);
        s.row_norm_max = std::max(s.row_norm_max, wn);
        s.gtilde_row_norm_max = std::max(s.gtilde_row_norm_max, gn);
        sum += wn;
    }
    s.row_norm_mean = sum / static_cast<double>(q);
    s.rows_pass = s.row_norm_min >= s.row_norm_lower_bound &&
                  s.row_norm_max <= s.row_norm_upper_bound + s.deviation;
    s.gtilde_pass = s.gtilde_row_norm_max <= s.gtilde_row_norm_bound + s.deviation;
    return s;
}

struct DecompositionTriple {
    std::size_t hold_out = 0;
    double base_term = 0;   // h at W+ηG̃, evaluated on x_hold
    double self_term = 0;   // y·(h at W+ηG − h at W+ηG̃) via the rank-1 formula
    double predicted = 0;   // ln(d)·E(σ'(X))²
    double identity_residual = 0;  // |y·h_{W+ηG}(x) − (y·base + self)|
};

/// Leave-one-out decomposition of one example's post-step margin. The full
/// and held-out gradients are assembled by independent passes, so the
/// residual genuinely measures G = G̃ + G^hold in float arithmetic.
template <typename T>
DecompositionTriple margin_decomposition(const Network<T>& net0, const Dataset<T>& data, T eta,
                                         std::size_t hold_out,
                                         GradientMode mode = GradientMode::exact) {
    detail::require(hold_out < data.m, "margin_decomposition: index out of range");
    const std::size_t q = net0.q, d = net0.d;
    DecompositionTriple t;
    t.hold_out = hold_out;
    t.predicted = std::log(static_cast<double>(d)) * expected_sq_derivative(net0.activation);
    if (eta == T(0)) {
        DenseVector<T> x(d);
        for (std::size_t k = 0; k < d; ++k) x[k] = data.inputs(hold_out, k);
        t.base_term = static_cast<double>(forward(net0, x));
        return t;
    }

    const DenseMatrix<T> G = full_gradient(net0, data, mode);
    const DenseMatrix<T> Gt = leave_one_out_gradient(net0, data, hold_out, mode);

    DenseVector<T> x(d);
    for (std::size_t k = 0; k < d; ++k) x[k] = data.inputs(hold_out, k);
    const T y = data.labels[hold_out];

    Network<T> plus = net0;
    plus.W = net0.W;
    for (std::size_t i = 0; i < plus.W.a.size(); ++i) plus.W.a[i] += eta * G.a[i];
    Network<T> tilde = net0;
    tilde.W = net0.W;
    for (std::size_t i = 0; i < tilde.W.a.size(); ++i) tilde.W.a[i] += eta * Gt.a[i];

    const T h_plus = forward(plus, x);
    t.base_term = static_cast<double>(forward(tilde, x));

    // self term from the rank-1 identity: the held-out example shifts
    // preactivation j by η·c·aⱼ·σ'(⟨wⱼ,x⟩)·‖x‖².
    const DenseVector<T> pre0 = matvec(net0.W, x);
    const DenseVector<T> pre_plus = matvec(plus.W, x);
    T c = y / (static_cast<T>(data.m) * static_cast<T>(std::sqrt(static_cast<double>(q))));
    if (mode == GradientMode::exact) {
        const T h0 = output_from_preactivations(net0, pre0.data());
        if (!(y * h0 < target_margin_for(data))) c = T(0);
    }
    const T xx = dot(x.data(), x.data(), d);
    CompensatedSum<T> self;
    for (std::size_t j = 0; j < q; ++j) {
        const T corr = eta * c * net0.a[j] * net0.activation.derivative(pre0[j]) * xx;
        self.add(net0.a[j] *
                 (net0.activation.value(pre_plus[j]) - net0.activation.value(pre_plus[j] - corr)));
    }
    t.self_term = static_cast<double>(y) * static_cast<double>(self.value()) /
                  std::sqrt(static_cast<double>(q));
    t.identity_residual = std::abs(static_cast<double>(y) * static_cast<double>(h_plus) -
                                   (static_cast<double>(y) * t.base_term + t.self_term));
    return t;
}

struct OrliczEstimate {
    int p = 2;
    double t_hat = 0;
    std::size_t n_samples = 0;
};

/// Empirical Ψ_p norm: infimum over t of mean(exp(|xᵢ|ᵖ/tᵖ)) ≤ 2, by
/// bisection to relative width 1e-6. The upper bracket max|x|/(ln 2)^{1/p}
/// satisfies the criterion by construction.
inline OrliczEstimate orlicz_norm_estimate(const std::vector<double>& samples, int p) {
    detail::require(p == 1 || p == 2, "orlicz_norm_estimate: p must be 1 or 2");
    detail::require(samples.size() >= 100, "orlicz_norm_estimate: need at least 100 samples");
    OrliczEstimate e;
    e.p = p;
    e.n_samples = samples.size();
    std::vector<double> pow_abs(samples.size());
    double max_abs = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double a = std::abs(samples[i]);
        max_abs = std::max(max_abs, a);
        pow_abs[i] = (p == 1) ? a : a * a;
    }
    if (max_abs == 0) return e;  // criterion holds for every t
    const double ln2 = std::log(2.0);
    double lo = 1e-12;
    double hi = max_abs / ((p == 1) ? ln2 : std::sqrt(ln2));
    const auto criterion_holds = [&](double tcand) {
        const double tp = (p == 1) ? tcand : tcand * tcand;
        double mean = 0;
        for (double v : pow_abs) {
            mean += std::exp(v / tp);
            if (!std::isfinite(mean)) return false;
        }
        return mean / static_cast<double>(pow_abs.size()) <= 2.0;
    };
    while (hi - lo > 1e-6 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (criterion_holds(mid))
            hi = mid;
        else
            lo = mid;
    }
    e.t_hat = hi;
    return e;
}

/// Fraction of samples with |x| ≥ t.
inline double tail_exceedance(const std::vector<double>& samples, double t) {
    detail::require(t >= 0, "tail_exceedance: t must be nonnegative");
    if (samples.empty()) return 0;
    std::size_t n = 0;
    for (double v : samples) n += (std::abs(v) >= t);
    return static_cast<double>(n) / static_cast<double>(samples.size());
}

// Frozen empirical thresholds standing in for the unnamed universal constants;
// calibrated by pilot runs, recorded next to every measured value.
inline constexpr double kPrestepRatioBound = 6.0;       // max|h| / √ln d
inline constexpr double kSpectralBound = 2.0;           // ‖ηG̃‖
inline constexpr double kDecompIdentityTol = 1e-10;
inline constexpr double kSelfOverPredictedLo = 0.6;
inline constexpr double kSelfOverPredictedHi = 1.4;
inline constexpr double kBaseOverSqrtLogdBound = 6.0;   // |base| / √ln d

struct LemmaCheck {
    std::string name;
    double measured = 0;
    double threshold_lo = -std::numeric_limits<double>::infinity();
    double threshold_hi = std::numeric_limits<double>::infinity();
    bool pass = false;
};

/// One replicate's measured lemma quantities, their bounds, and pass flags.
struct LemmaReport {
    double max_pre_h = 0;
    double pre_h_over_sqrtlogd = 0;
    double spec_norm_eta_G = 0;
    double spec_norm_eta_Gtilde = 0;
    RowNormSection row_norms;
    std::vector<DecompositionTriple> decomposition;
    std::vector<LemmaCheck> checks;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

} // namespace memlab
