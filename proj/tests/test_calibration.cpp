// Seed-level calibration sweep behind the frozen diagnostic thresholds.
// Slow: 20 single-replicate runs at d=4096; kept out of the default label.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "memlab/experiment.hpp"

TEST_CASE("frozen thresholds hold across 20 seeds at calibration scale") {
    const double sqrt_logd = std::sqrt(std::log(4096.0));
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        CAPTURE(seed);
        memlab::ExperimentConfig c;
        c.d = 4096;
        c.q = 1024;
        c.m = 1000;
        c.sign_mode = memlab::SignMode::balanced;
        c.seed = seed;
        c.replicates = 1;
        const auto r = memlab::run_experiment(c);
        REQUIRE(r.rows.size() == 1);
        REQUIRE(r.rows[0].error.empty());
        const auto& row = r.rows[0];
        const auto& rep = r.reports[0];

        CHECK(row.pre_h_ratio <= memlab::kPrestepRatioBound);
        CHECK(rep.row_norms.rows_pass);
        CHECK(rep.row_norms.gtilde_pass);
        CHECK(rep.spec_norm_eta_Gtilde <= memlab::kSpectralBound);

        REQUIRE(rep.decomposition.size() == 5);
        for (const auto& tri : rep.decomposition) {
            CAPTURE(tri.hold_out);
            CHECK(tri.identity_residual <= memlab::kDecompIdentityTol);
            const double ratio = tri.self_term / tri.predicted;
            CHECK(ratio >= memlab::kSelfOverPredictedLo);
            CHECK(ratio <= memlab::kSelfOverPredictedHi);
            CHECK(std::abs(tri.base_term) <= memlab::kBaseOverSqrtLogdBound * sqrt_logd);
        }
    }
}
