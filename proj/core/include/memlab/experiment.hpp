#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "diagnostics.hpp"
#include "matrix.hpp"
#include "network.hpp"
#include "qr_haar.hpp"
#include "rng.hpp"
#include "spectral.hpp"
#include "training.hpp"

namespace memlab {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class InitMode { haar, basis };
enum class Precision { double_precision, single_precision };

inline const char* to_string(SignMode m) { return m == SignMode::iid ? "iid" : "balanced"; }
inline const char* to_string(InitMode m) { return m == InitMode::haar ? "haar" : "basis"; }
inline const char* to_string(GradientMode m) { return m == GradientMode::paper ? "paper" : "exact"; }
inline const char* to_string(Precision p) {
    return p == Precision::double_precision ? "double" : "single";
}

struct ExperimentConfig {
    std::size_t d = 2048;
    std::size_t q = 2048;
    std::optional<std::size_t> m;   // exactly one of m / alpha before resolution
    std::optional<double> alpha;    // m = ⌊alpha·d·q/ln⁴(d)⌋
    Activation activation = Activation::make_abs();
    SignMode sign_mode = SignMode::iid;
    InitMode init = InitMode::haar;
    std::uint64_t seed = 1;
    std::size_t replicates = 1;
    GradientMode gradient_mode = GradientMode::exact;
    Precision precision = Precision::double_precision;
    std::optional<double> eta_override;

    // filled by resolve_config
    bool resolved = false;
    std::size_t m_resolved = 0;
    double eta = 0;
    bool assumption_m_ok = false;       // m ≤ dq/ln⁴(d)
    bool assumption_q_logd_ok = false;  // q ≥ ln⁴(d)
    bool assumption_q_le_d_ok = false;  // q ≤ d
    bool activation_valid = false;      // |E σ'(X)| ≤ 1e-8
};

/// Validates sizes, resolves alpha to m and the step size η = m·ln(d)/d
/// (unless overridden), and records which theorem assumptions hold at these
/// sizes. Idempotent.
inline ExperimentConfig resolve_config(const ExperimentConfig& raw) {
    if (raw.resolved) return raw;
    ExperimentConfig c = raw;
    if (c.d < 2) throw ConfigError("config: d must be >= 2");
    if (c.q < 1) throw ConfigError("config: q must be >= 1");
    if (c.q > c.d) throw ConfigError("config: q <= d required (orthonormal rows need q <= d)");
    if (c.replicates < 1) throw ConfigError("config: replicates must be >= 1");
    if (c.m.has_value() == c.alpha.has_value())
        throw ConfigError("config: exactly one of m / alpha must be given");
    const double logd = std::log(static_cast<double>(c.d));
    const double log4 = logd * logd * logd * logd;
    if (c.alpha) {
        if (*c.alpha <= 0) throw ConfigError("config: alpha must be positive");
        c.m_resolved = static_cast<std::size_t>(
            std::floor(*c.alpha * static_cast<double>(c.d) * static_cast<double>(c.q) / log4));
    } else {
        c.m_resolved = *c.m;
    }
    if (c.m_resolved < 1) throw ConfigError("config: resolved m must be >= 1");
    if (c.eta_override && *c.eta_override < 0) throw ConfigError("config: eta must be >= 0");
    c.eta = c.eta_override ? *c.eta_override
                           : static_cast<double>(c.m_resolved) * logd / static_cast<double>(c.d);
    c.assumption_m_ok =
        static_cast<double>(c.m_resolved) <=
        static_cast<double>(c.d) * static_cast<double>(c.q) / log4;
    c.assumption_q_logd_ok = static_cast<double>(c.q) >= log4;
    c.assumption_q_le_d_ok = c.q <= c.d;
    c.activation_valid = check_centered_derivative(c.activation).valid;
    c.m = c.m_resolved;
    c.resolved = true;
    return c;
}

namespace detail {

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

inline std::string config_hash(const ExperimentConfig& cfg) {
    const ExperimentConfig c = resolve_config(cfg);
    std::string s;
    s += "d=" + std::to_string(c.d);
    s += ";q=" + std::to_string(c.q);
    s += ";m=" + std::to_string(c.m_resolved);
    s += ";eta=" + detail::format_double(c.eta);
    s += ";act=" + c.activation.name();
    s += ";sign=" + std::string(to_string(c.sign_mode));
    s += ";init=" + std::string(to_string(c.init));
    s += ";grad=" + std::string(to_string(c.gradient_mode));
    s += ";precision=" + std::string(to_string(c.precision));
    s += ";seed=" + std::to_string(c.seed);
    s += ";replicates=" + std::to_string(c.replicates);
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(s)));
    return buf;
}

/// One CSV row. Numeric diagnostics are NaN when error is nonempty.
struct ReplicateRow {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::size_t replicate = 0;
    std::size_t d = 0, q = 0, m = 0;
    double eta = 0;
    std::string activation, sign_mode, gradient_mode;
    double memorization_rate = 0;
    double min_margin = 0;
    double mean_margin = 0;
    double margin_over_logd = 0;
    std::size_t active_count = 0;
    double max_pre_h = 0;
    double pre_h_ratio = 0;
    double spec_norm_eta_G = 0;
    double row_norm_max = 0;
    double gtilde_row_norm_max = 0;
    double runtime_ms = 0;
    std::string error;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<ReplicateRow> rows;
    std::vector<LemmaReport> reports;  // parallel to rows; empty report on error

    bool all_checks_pass() const {
        for (const auto& r : rows)
            if (!r.error.empty()) return false;
        for (const auto& rep : reports)
            if (!rep.all_pass()) return false;
        return !rows.empty();
    }
};

struct RunOptions {
    std::size_t threads = 1;
    bool allow_invalid_activation = false;
    std::size_t decomposition_holds = 5;
};

namespace detail {

/// Deterministic spread of hold-out indices: {0, m/4, m/2, 3m/4, m−1},
/// deduplicated, capped at n_holds. The last index doubles as the
/// leave-one-out example for the row-norm and spectral G̃ diagnostics.
inline std::vector<std::size_t> hold_out_indices(std::size_t m, std::size_t n_holds) {
    std::vector<std::size_t> h;
    if (m == 0 || n_holds == 0) return h;
    const std::size_t cands[5] = {0, m / 4, m / 2, (3 * m) / 4, m - 1};
    for (std::size_t c : cands) {
        bool seen = false;
        for (std::size_t p : h) seen |= (p == c);
        if (!seen) h.push_back(c);
        if (h.size() == n_holds) break;
    }
    return h;
}

template <typename T>
void run_replicate(const ExperimentConfig& cfg, std::size_t r, std::size_t n_holds,
                   const std::string& hash, ReplicateRow& row, LemmaReport& rep) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t d = cfg.d, q = cfg.q, m = cfg.m_resolved;
    const double logd = std::log(static_cast<double>(d));
    const double sqrt_q = std::sqrt(static_cast<double>(q));
    const double esig2 = expected_sq_derivative(cfg.activation);
    const T eta = static_cast<T>(cfg.eta);

    RngStream stream = derive_stream(cfg.seed, r);
    RngStream ws = stream.substream(0);
    RngStream ss = stream.substream(1);
    RngStream datas = stream.substream(2);

    Network<T> net;
    net.q = q;
    net.d = d;
    net.activation = cfg.activation;
    if (cfg.init == InitMode::haar) {
        DenseMatrix<T> g = sample_gaussian_matrix<T>(ws, q, d);
        net.W = orthonormal_rows(g);
    } else {
        net.W = basis_rows<T>(q, d);
    }
    net.a = sample_signs<T>(ss, q, cfg.sign_mode);
    const Dataset<T> data = sample_dataset<T>(datas, m, d);

    // Preactivations and pre-step outputs.
    DenseMatrix<T> P = matmul_bt(data.inputs, net.W);  // m×q
    std::vector<T> h0(m);
    for (std::size_t i = 0; i < m; ++i) h0[i] = output_from_preactivations(net, P.row(i));
    rep.max_pre_h = 0;
    for (std::size_t i = 0; i < m; ++i)
        rep.max_pre_h = std::max(rep.max_pre_h, std::abs(static_cast<double>(h0[i])));
    rep.pre_h_over_sqrtlogd = rep.max_pre_h / std::sqrt(logd);

    std::vector<bool> active(m);
    std::size_t active_count = 0;
    for (std::size_t i = 0; i < m; ++i) {
        active[i] = static_cast<double>(data.labels[i]) * static_cast<double>(h0[i]) < logd;
        active_count += active[i];
    }

    // Per-example gradient coefficients; σ' rows of the hold-out examples are
    // saved before P is scaled in place.
    const std::vector<std::size_t> holds = hold_out_indices(m, std::max<std::size_t>(1, n_holds));
    const std::size_t h_last = m - 1;
    std::vector<std::vector<T>> u_hold(holds.size(), std::vector<T>(q));
    std::vector<T> u_last(q);
    for (std::size_t k = 0; k < holds.size(); ++k) {
        const T* prow = P.row(holds[k]);
        for (std::size_t j = 0; j < q; ++j) u_hold[k][j] = net.activation.derivative(prow[j]);
    }
    {
        const T* prow = P.row(h_last);
        for (std::size_t j = 0; j < q; ++j) u_last[j] = net.activation.derivative(prow[j]);
    }
    const T scale = T(1) / (static_cast<T>(m) * static_cast<T>(sqrt_q));
    std::vector<T> coeff(m);
    for (std::size_t i = 0; i < m; ++i) {
        coeff[i] = data.labels[i] * scale;
        if (cfg.gradient_mode == GradientMode::exact && !active[i]) coeff[i] = T(0);
    }
    for (std::size_t i = 0; i < m; ++i) {
        T* prow = P.row(i);
        const T c = coeff[i];
        for (std::size_t j = 0; j < q; ++j)
            prow[j] = c * net.a[j] * net.activation.derivative(prow[j]);
    }
    DenseMatrix<T> G(q, d);
    {
        DenseMatrix<T> Ct = transpose(P);
        P = DenseMatrix<T>();  // free before the second m×q buffer appears
        matmul_accumulate(Ct, data.inputs, G);
    }

    // Hold-out geometry needed after G is consumed.
    std::vector<T> x_last(d);
    for (std::size_t k = 0; k < d; ++k) x_last[k] = data.inputs(h_last, k);
    const T xx_last = dot(x_last.data(), x_last.data(), d);
    DenseVector<T> Gx(q);
    {
        DenseVector<T> xv(d);
        for (std::size_t k = 0; k < d; ++k) xv[k] = x_last[k];
        Gx = matvec(G, xv);
    }
    const DenseVector<T> rowG2 = row_norms_squared(G);
    const T c_last = coeff[h_last];

    // The step, post-step margins.
    for (std::size_t i = 0; i < net.W.a.size(); ++i) net.W.a[i] += eta * G.a[i];
    DenseMatrix<T> P_plus = matmul_bt(data.inputs, net.W);
    std::vector<double> marg(m);
    double min_margin = std::numeric_limits<double>::infinity();
    double sum_margin = 0;
    std::size_t memorized = 0;
    for (std::size_t i = 0; i < m; ++i) {
        marg[i] = static_cast<double>(data.labels[i]) *
                  static_cast<double>(output_from_preactivations(net, P_plus.row(i)));
        min_margin = std::min(min_margin, marg[i]);
        sum_margin += marg[i];
        memorized += (marg[i] > 0);
    }
    const double mean_margin = sum_margin / static_cast<double>(m);

    // Row norms of W+ηG̃ and ηG̃ without materializing G̃: the held-out
    // example enters row j as the rank-1 piece t_j·x with t_j = c·aⱼ·σ'ⱼ.
    const DenseVector<T> rowWp2 = row_norms_squared(net.W);
    RowNormSection rn;
    rn.deviation = 1.0 / std::sqrt(static_cast<double>(d));
    rn.gtilde_row_norm_bound = static_cast<double>(m) * logd * logd *
                               cfg.activation.lipschitz_bound * cfg.activation.lipschitz_bound /
                               (static_cast<double>(d) * static_cast<double>(q));
    rn.row_norm_lower_bound = 1.0 - rn.deviation;
    rn.row_norm_upper_bound = 1.0 + rn.gtilde_row_norm_bound;
    rn.row_norm_min = std::numeric_limits<double>::infinity();
    double rn_sum = 0;
    const double eta_d = cfg.eta;
    for (std::size_t j = 0; j < q; ++j) {
        const double tj = eta_d * static_cast<double>(c_last) * static_cast<double>(net.a[j]) *
                          static_cast<double>(u_last[j]);
        const double wj2 = static_cast<double>(rowWp2[j]) -
                           2.0 * tj * static_cast<double>(P_plus(h_last, j)) +
                           tj * tj * static_cast<double>(xx_last);
        const double gj2 = eta_d * eta_d * static_cast<double>(rowG2[j]) -
                           2.0 * eta_d * eta_d * static_cast<double>(c_last) *
                               static_cast<double>(net.a[j]) * static_cast<double>(u_last[j]) *
                               static_cast<double>(Gx[j]) +
                           tj * tj * static_cast<double>(xx_last);
        rn.row_norm_min = std::min(rn.row_norm_min, wj2);
        rn.row_norm_max = std::max(rn.row_norm_max, wj2);
        rn.gtilde_row_norm_max = std::max(rn.gtilde_row_norm_max, gj2);
        rn_sum += wj2;
    }
    rn.row_norm_mean = rn_sum / static_cast<double>(q);
    rn.rows_pass = rn.row_norm_min >= rn.row_norm_lower_bound &&
                   rn.row_norm_max <= rn.row_norm_upper_bound + rn.deviation;
    rn.gtilde_pass = rn.gtilde_row_norm_max <= rn.gtilde_row_norm_bound + rn.deviation;
    rep.row_norms = rn;

    // Decomposition triples from the post-step preactivation rows.
    rep.decomposition.clear();
    for (std::size_t k = 0; k < holds.size(); ++k) {
        const std::size_t hk = holds[k];
        DecompositionTriple tri;
        tri.hold_out = hk;
        tri.predicted = logd * esig2;
        const T* xk = data.inputs.row(hk);
        const T xxk = dot(xk, xk, d);
        const T ck = coeff[hk];
        const T* pk = P_plus.row(hk);
        CompensatedSum<T> base, self;
        for (std::size_t j = 0; j < q; ++j) {
            const T corr = eta * ck * net.a[j] * u_hold[k][j] * xxk;
            const T tilde_val = net.activation.value(pk[j] - corr);
            base.add(net.a[j] * tilde_val);
            self.add(net.a[j] * (net.activation.value(pk[j]) - tilde_val));
        }
        const double y = static_cast<double>(data.labels[hk]);
        tri.base_term = static_cast<double>(base.value()) / sqrt_q;
        tri.self_term = y * static_cast<double>(self.value()) / sqrt_q;
        tri.identity_residual = std::abs(marg[hk] - (y * tri.base_term + tri.self_term));
        rep.decomposition.push_back(tri);
    }
    P_plus = DenseMatrix<T>();

    // Spectral bounds: ‖ηG‖ first, then G is turned into G̃ in place.
    rep.spec_norm_eta_G = spectral_check(G, eta_d, 1e-6);
    {
        std::vector<T> su(q);
        for (std::size_t j = 0; j < q; ++j) su[j] = net.a[j] * u_last[j];
        rank1_update_inplace(G, -c_last, su.data(), x_last.data());
    }
    rep.spec_norm_eta_Gtilde = spectral_check(G, eta_d, 1e-6);
    G = DenseMatrix<T>();

    // Pass/fail flags with their frozen thresholds.
    rep.checks.clear();
    auto push_check = [&rep](std::string name, double measured, double lo, double hi) {
        LemmaCheck c;
        c.name = std::move(name);
        c.measured = measured;
        c.threshold_lo = lo;
        c.threshold_hi = hi;
        c.pass = measured >= lo && measured <= hi;
        rep.checks.push_back(c);
    };
    const double inf = std::numeric_limits<double>::infinity();
    push_check("prestep_ratio", rep.pre_h_over_sqrtlogd, -inf, kPrestepRatioBound);
    push_check("spectral_eta_gtilde", rep.spec_norm_eta_Gtilde, -inf, kSpectralBound);
    push_check("row_norm_min", rn.row_norm_min, rn.row_norm_lower_bound, inf);
    push_check("row_norm_max", rn.row_norm_max, -inf, rn.row_norm_upper_bound + rn.deviation);
    push_check("gtilde_row_norm_max", rn.gtilde_row_norm_max, -inf,
               rn.gtilde_row_norm_bound + rn.deviation);
    double max_resid = 0, worst_base = 0;
    for (const auto& tri : rep.decomposition) {
        max_resid = std::max(max_resid, tri.identity_residual);
        worst_base = std::max(worst_base, std::abs(tri.base_term));
    }
    push_check("decomposition_identity", max_resid, -inf, kDecompIdentityTol);
    if (!cfg.eta_override) {
        // Calibrated intervals presume the prescribed step size, and the self
        // term is only predicted for examples that contributed to the step.
        double worst_ratio = 1.0;
        for (const auto& tri : rep.decomposition) {
            if (!active[tri.hold_out]) continue;
            const double ratio = tri.self_term / tri.predicted;
            if (std::abs(ratio - 1.0) > std::abs(worst_ratio - 1.0)) worst_ratio = ratio;
        }
        push_check("self_over_predicted", worst_ratio, kSelfOverPredictedLo, kSelfOverPredictedHi);
        push_check("decomposition_base", worst_base / std::sqrt(logd), -inf,
                   kBaseOverSqrtLogdBound);
    }

    row.config_hash = hash;
    row.seed = cfg.seed;
    row.replicate = r;
    row.d = d;
    row.q = q;
    row.m = m;
    row.eta = cfg.eta;
    row.activation = cfg.activation.name();
    row.sign_mode = to_string(cfg.sign_mode);
    row.gradient_mode = to_string(cfg.gradient_mode);
    row.memorization_rate = static_cast<double>(memorized) / static_cast<double>(m);
    row.min_margin = min_margin;
    row.mean_margin = mean_margin;
    row.margin_over_logd = mean_margin / (logd * esig2);
    row.active_count = active_count;
    row.max_pre_h = rep.max_pre_h;
    row.pre_h_ratio = rep.pre_h_over_sqrtlogd;
    row.spec_norm_eta_G = rep.spec_norm_eta_G;
    row.row_norm_max = rn.row_norm_max;
    row.gtilde_row_norm_max = rn.gtilde_row_norm_max;
    row.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

template <typename T>
ExperimentResult run_experiment_t(const ExperimentConfig& cfg, const RunOptions& opts) {
    ExperimentResult res;
    res.config = cfg;
    res.rows.resize(cfg.replicates);
    res.reports.resize(cfg.replicates);
    const std::string hash = config_hash(cfg);

    const auto work = [&](std::size_t r) {
        try {
            run_replicate<T>(cfg, r, opts.decomposition_holds, hash, res.rows[r], res.reports[r]);
        } catch (const std::exception& e) {
            ReplicateRow& row = res.rows[r];
            row = ReplicateRow{};
            row.config_hash = hash;
            row.seed = cfg.seed;
            row.replicate = r;
            row.d = cfg.d;
            row.q = cfg.q;
            row.m = cfg.m_resolved;
            row.eta = cfg.eta;
            row.activation = cfg.activation.name();
            row.sign_mode = to_string(cfg.sign_mode);
            row.gradient_mode = to_string(cfg.gradient_mode);
            const double nan = std::numeric_limits<double>::quiet_NaN();
            row.memorization_rate = row.min_margin = row.mean_margin = row.margin_over_logd = nan;
            row.max_pre_h = row.pre_h_ratio = row.spec_norm_eta_G = row.row_norm_max =
                row.gtilde_row_norm_max = row.runtime_ms = nan;
            std::string msg = e.what();
            for (char& ch : msg)
                if (ch == ',' || ch == '\n') ch = ';';
            row.error = msg;
            res.reports[r] = LemmaReport{};
        }
    };

    const std::size_t nthreads = std::min(std::max<std::size_t>(opts.threads, 1), cfg.replicates);
    if (nthreads <= 1) {
        for (std::size_t r = 0; r < cfg.replicates; ++r) work(r);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (std::size_t t = 0; t < nthreads; ++t)
            pool.emplace_back([&] {
                for (std::size_t r = next.fetch_add(1); r < cfg.replicates; r = next.fetch_add(1))
                    work(r);
            });
        for (auto& th : pool) th.join();
    }
    return res;
}

} // namespace detail

/// Runs the resolved config: per replicate, derive the stream, sample
/// (W, a, dataset), run the pre-step checks, take the single gradient step,
/// and measure margins plus every lemma diagnostic. Deterministic given the
/// config; a failed replicate becomes a row with an error marker.
inline ExperimentResult run_experiment(const ExperimentConfig& raw, const RunOptions& opts = {}) {
    const ExperimentConfig cfg = resolve_config(raw);
    if (!cfg.activation_valid && !opts.allow_invalid_activation)
        throw ConfigError("config: activation fails the centered-derivative condition; pass "
                          "allow-invalid-activation to run it as a control");
    if (cfg.precision == Precision::double_precision)
        return detail::run_experiment_t<double>(cfg, opts);
    return detail::run_experiment_t<float>(cfg, opts);
}

/// Grid of configs, rows in grid × replicate order.
inline std::vector<ExperimentResult> sweep(const std::vector<ExperimentConfig>& grid,
                                           const RunOptions& opts = {}) {
    std::vector<ExperimentResult> out;
    out.reserve(grid.size());
    for (const auto& cfg : grid) out.push_back(run_experiment(cfg, opts));
    return out;
}

} // namespace memlab
