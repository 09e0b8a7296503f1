#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "memlab/diagnostics.hpp"
#include "memlab/qr_haar.hpp"
#include "memlab/rng.hpp"
#include "memlab/training.hpp"

using memlab::Activation;
using memlab::Dataset;
using memlab::DenseMatrix;
using memlab::DenseVector;
using memlab::GradientMode;
using memlab::Network;

namespace {

Network<double> haar_net(std::uint64_t seed, std::size_t q, std::size_t d, Activation act) {
    memlab::RngStream stream = memlab::derive_stream(seed, 0);
    memlab::RngStream ws = stream.substream(0);
    memlab::RngStream ss = stream.substream(1);
    Network<double> net;
    net.q = q;
    net.d = d;
    net.W = memlab::orthonormal_rows(memlab::sample_gaussian_matrix<double>(ws, q, d));
    net.a = memlab::sample_signs<double>(ss, q, memlab::SignMode::balanced);
    net.activation = act;
    return net;
}

Dataset<double> sampled_data(std::uint64_t seed, std::size_t m, std::size_t d) {
    memlab::RngStream stream = memlab::derive_stream(seed, 0);
    memlab::RngStream ds = stream.substream(2);
    return memlab::sample_dataset<double>(ds, m, d);
}

std::vector<double> gauss_samples(std::uint64_t seed, std::size_t n) {
    memlab::RngStream s = memlab::derive_stream(seed, 0);
    std::vector<double> v(n);
    for (auto& x : v) x = s.next_gauss();
    return v;
}

} // namespace

TEST_CASE("frozen diagnostic thresholds") {
    CHECK(memlab::kPrestepRatioBound == 6.0);
    CHECK(memlab::kSpectralBound == 2.0);
    CHECK(memlab::kDecompIdentityTol == 1e-10);
    CHECK(memlab::kSelfOverPredictedLo == 0.6);
    CHECK(memlab::kSelfOverPredictedHi == 1.4);
    CHECK(memlab::kBaseOverSqrtLogdBound == 6.0);
}

TEST_CASE("prestep output check hand values") {
    Network<double> net;
    net.q = 1;
    net.d = 2;
    net.W = DenseMatrix<double>(1, 2);
    net.W(0, 0) = 1;
    net.a = DenseVector<double>{1.0};
    net.activation = Activation::make_abs();

    Dataset<double> data;
    data.m = 2;
    data.d = 2;
    data.inputs = DenseMatrix<double>(2, 2);
    data.inputs(0, 0) = 0.25;
    data.inputs(1, 0) = -0.5;
    data.labels = {1.0, 1.0};

    const auto r = memlab::prestep_output_check(net, data);
    CHECK(r.max_abs_h == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.ratio == doctest::Approx(0.5 / std::sqrt(std::log(2.0))).epsilon(1e-15));

    Dataset<double> empty;
    empty.m = 0;
    empty.d = 2;
    empty.inputs = DenseMatrix<double>(0, 2);
    const auto z = memlab::prestep_output_check(net, empty);
    CHECK(z.max_abs_h == 0.0);
    CHECK(z.ratio == 0.0);
}

TEST_CASE("spectral check scales the norm by eta") {
    DenseMatrix<double> M(2, 2);
    M(0, 0) = 3;
    M(1, 1) = -4;
    CHECK(memlab::spectral_check(M, 0.5) == doctest::Approx(2.0).epsilon(1e-5));
    CHECK(memlab::spectral_check(M, 0.0) == 0.0);

    DenseMatrix<double> R(2, 2);  // rank 1: power iteration is exact in one step
    R(0, 1) = 3;
    R(1, 1) = 4;
    CHECK(memlab::spectral_check(R, 0.5, 1e-12) == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("spectral check respects the per-example triangle inequality") {
    const auto net = haar_net(51, 6, 12, Activation::make_abs());
    const auto data = sampled_data(52, 8, 12);
    const double eta = 0.7;
    const auto G = memlab::full_gradient(net, data, GradientMode::paper);
    double sum_norms = 0;
    for (std::size_t i = 0; i < data.m; ++i) {
        const auto Gi = memlab::per_example_gradient(net, data, i, GradientMode::paper);
        sum_norms += memlab::spectral_check(Gi, eta, 1e-9);
    }
    CHECK(memlab::spectral_check(G, eta, 1e-9) <= sum_norms + 1e-9);
}

TEST_CASE("row norm check on an untouched orthonormal frame") {
    const std::size_t q = 8, d = 32, m = 5;
    const auto net = haar_net(53, q, d, Activation::make_abs());
    const DenseMatrix<double> zero(q, d);
    const auto s = memlab::row_norm_check(net.W, zero, 1.0, m, d, q, 1.0);

    const double logd = std::log(static_cast<double>(d));
    const double bound = static_cast<double>(m) * logd * logd / (static_cast<double>(d) * q);
    CHECK(s.deviation == doctest::Approx(1.0 / std::sqrt(32.0)).epsilon(1e-15));
    CHECK(s.gtilde_row_norm_bound == doctest::Approx(bound).epsilon(1e-15));
    CHECK(s.row_norm_lower_bound == doctest::Approx(1.0 - s.deviation).epsilon(1e-15));
    CHECK(s.row_norm_upper_bound == doctest::Approx(1.0 + bound).epsilon(1e-15));

    CHECK(s.row_norm_min == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.row_norm_max == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.row_norm_mean == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.gtilde_row_norm_max == 0.0);
    CHECK(s.rows_pass);
    CHECK(s.gtilde_pass);
}

TEST_CASE("row norm check flags rows outside the band") {
    const std::size_t d = 4;
    DenseMatrix<double> zero(1, d);

    DenseMatrix<double> big(1, d);
    big(0, 0) = 2.0;  // squared norm 4 > 1 + ln²4/4 + 1/2
    const auto hi = memlab::row_norm_check(big, zero, 1.0, 1, d, 1, 1.0);
    CHECK_FALSE(hi.rows_pass);
    CHECK(hi.gtilde_pass);

    DenseMatrix<double> small(1, d);
    small(0, 0) = 0.5;  // squared norm 0.25 < 1 − 1/2
    const auto lo = memlab::row_norm_check(small, zero, 1.0, 1, d, 1, 1.0);
    CHECK_FALSE(lo.rows_pass);

    DenseMatrix<double> unit(1, d);
    unit(0, 0) = 1.0;
    DenseMatrix<double> spike(1, d);
    spike(0, 1) = 3.0;  // ‖ηg̃‖² = 9 over a bound below 1
    const auto gt = memlab::row_norm_check(unit, spike, 1.0, 1, d, 1, 1.0);
    CHECK_FALSE(gt.gtilde_pass);

    CHECK_THROWS_AS(
        (void)memlab::row_norm_check(unit, DenseMatrix<double>(2, d), 1.0, 1, d, 1, 1.0),
        std::invalid_argument);
}

TEST_CASE("margin decomposition identity on a small instance") {
    const std::size_t q = 8, d = 16, m = 10;
    const auto net = haar_net(55, q, d, Activation::make_abs());
    const auto data = sampled_data(56, m, d);
    const double eta = memlab::default_step_size(m, d);
    for (std::size_t hold : {0ul, 3ul, 9ul}) {
        const auto t = memlab::margin_decomposition(net, data, eta, hold, GradientMode::exact);
        CHECK(t.hold_out == hold);
        CHECK(t.identity_residual <= 1e-12);
        CHECK(t.predicted ==
              doctest::Approx(std::log(16.0) *
                              memlab::expected_sq_derivative(net.activation))
                  .epsilon(1e-12));
    }
    CHECK_THROWS_AS(
        (void)memlab::margin_decomposition(net, data, eta, m, GradientMode::exact),
        std::invalid_argument);
}

TEST_CASE("margin decomposition at eta zero reduces to the raw output") {
    const auto net = haar_net(57, 4, 8, Activation::make_abs());
    const auto data = sampled_data(58, 5, 8);
    DenseVector<double> x(8);
    for (std::size_t k = 0; k < 8; ++k) x[k] = data.inputs(2, k);
    const auto t = memlab::margin_decomposition(net, data, 0.0, 2, GradientMode::exact);
    CHECK(t.self_term == 0.0);
    CHECK(t.identity_residual == 0.0);
    CHECK(t.base_term == doctest::Approx(memlab::forward(net, x)).epsilon(1e-15));
}

TEST_CASE("margin decomposition modes agree when every hinge is active") {
    const std::size_t q = 8, d = 16, m = 6;
    const auto net = haar_net(59, q, d, Activation::make_abs());
    Dataset<double> data = sampled_data(60, m, d);
    for (auto& v : data.inputs.a) v *= 0.1;  // margins shrink inside the hinge
    REQUIRE(memlab::count_active_hinges(net, data) == m);
    const double eta = 0.3;
    for (std::size_t hold = 0; hold < m; ++hold) {
        const auto te = memlab::margin_decomposition(net, data, eta, hold, GradientMode::exact);
        const auto tp = memlab::margin_decomposition(net, data, eta, hold, GradientMode::paper);
        CHECK(te.base_term == tp.base_term);
        CHECK(te.self_term == tp.self_term);
    }
}

TEST_CASE("margin decomposition zeroes the self term for an inactive hold-out") {
    const std::size_t q = 4, d = 8;
    const auto net = haar_net(61, q, d, Activation::make_abs());
    Dataset<double> data = sampled_data(62, 3, d);
    // blow up one example so its margin clears ln d; its exact-mode
    // per-example gradient vanishes, hence G = G̃ and self = 0
    DenseVector<double> x(d);
    for (std::size_t k = 0; k < d; ++k) x[k] = data.inputs(1, k);
    const double h1 = memlab::forward(net, x);
    REQUIRE(h1 != 0.0);
    const double scale = 10.0 * std::log(static_cast<double>(d)) / std::abs(h1);
    for (std::size_t k = 0; k < d; ++k) data.inputs(1, k) *= scale;
    data.labels[1] = h1 > 0 ? 1.0 : -1.0;

    const auto t = memlab::margin_decomposition(net, data, 0.5, 1, GradientMode::exact);
    CHECK(t.self_term == 0.0);
    CHECK(t.identity_residual <= 1e-13);
}

TEST_CASE("orlicz estimate closed forms on constant samples") {
    const std::vector<double> c(200, 3.0);
    const auto p2 = memlab::orlicz_norm_estimate(c, 2);
    CHECK(p2.t_hat == doctest::Approx(3.0 / std::sqrt(std::log(2.0))).epsilon(1e-5));
    CHECK(p2.p == 2);
    CHECK(p2.n_samples == 200);
    const auto p1 = memlab::orlicz_norm_estimate(c, 1);
    CHECK(p1.t_hat == doctest::Approx(3.0 / std::log(2.0)).epsilon(1e-5));
}

TEST_CASE("orlicz estimate is positively homogeneous") {
    const auto v = gauss_samples(63, 2000);
    std::vector<double> scaled(v);
    for (auto& x : scaled) x *= 2.5;
    const auto base = memlab::orlicz_norm_estimate(v, 2);
    const auto twice = memlab::orlicz_norm_estimate(scaled, 2);
    CHECK(twice.t_hat == doctest::Approx(2.5 * base.t_hat).epsilon(1e-5));
}

TEST_CASE("orlicz estimate edge cases") {
    const std::vector<double> zeros(150, 0.0);
    CHECK(memlab::orlicz_norm_estimate(zeros, 2).t_hat == 0.0);
    CHECK_THROWS_AS((void)memlab::orlicz_norm_estimate(std::vector<double>(99, 1.0), 2),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)memlab::orlicz_norm_estimate(std::vector<double>(150, 1.0), 3),
                    std::invalid_argument);
}

TEST_CASE("orlicz estimate matches the gaussian subgaussian norm") {
    // E exp(X²/t²) = 2 at t² = 8/3 for X ~ N(0,1)
    const auto v = gauss_samples(64, 1000000);
    const auto e = memlab::orlicz_norm_estimate(v, 2);
    const double target = std::sqrt(8.0 / 3.0);
    CHECK(std::abs(e.t_hat - target) / target <= 0.05);
}

TEST_CASE("subgaussian norm of rademacher sums grows like sqrt n") {
    // Hoeffding: ‖Σⁿε‖_Ψ₂ ≍ √n, so quadrupling n should double t̂
    memlab::RngStream s = memlab::derive_stream(65, 0);
    const auto sample_sums = [&s](std::size_t n, std::size_t reps) {
        std::vector<double> sums(reps, 0.0);
        for (auto& v : sums) {
            double acc = 0;
            for (std::size_t k = 0; k < n; ++k) acc += s.next_sign();
            v = acc;
        }
        return sums;
    };
    const auto t1 = memlab::orlicz_norm_estimate(sample_sums(1000, 2000), 2).t_hat;
    const auto t4 = memlab::orlicz_norm_estimate(sample_sums(4000, 2000), 2).t_hat;
    CHECK(t4 / t1 >= 1.7);
    CHECK(t4 / t1 <= 2.3);
}

TEST_CASE("tail exceedance hand values") {
    const std::vector<double> v{-1.0, 0.5, 2.0};
    CHECK(memlab::tail_exceedance(v, 1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(memlab::tail_exceedance(v, 0.0) == 1.0);
    CHECK(memlab::tail_exceedance(v, 5.0) == 0.0);
    CHECK(memlab::tail_exceedance({}, 1.0) == 0.0);
    CHECK_THROWS_AS((void)memlab::tail_exceedance(v, -1.0), std::invalid_argument);
}

TEST_CASE("tail exceedance of normals matches erfc") {
    const auto v = gauss_samples(66, 1000000);
    const double frac = memlab::tail_exceedance(v, 3.0);
    CHECK(frac == doctest::Approx(std::erfc(3.0 / std::sqrt(2.0))).epsilon(0.2));
    CHECK(std::abs(frac - 0.0026998) <= 5e-4);
}

TEST_CASE("lemma report aggregates pass flags") {
    memlab::LemmaReport rep;
    CHECK(rep.all_pass());
    rep.checks.push_back({"a", 1.0, 0.0, 2.0, true});
    CHECK(rep.all_pass());
    rep.checks.push_back({"b", 3.0, 0.0, 2.0, false});
    CHECK_FALSE(rep.all_pass());
}
