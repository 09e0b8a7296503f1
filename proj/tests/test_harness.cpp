#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "config_io.hpp"
#include "memlab/csv.hpp"
#include "memlab/experiment.hpp"
#include "memlab/svg.hpp"
#include "support/default_preset.hpp"
#include "support/xml_check.hpp"

using json = nlohmann::json;
using memlab::ConfigError;
using memlab::CsvError;
using memlab::ExperimentConfig;
using memlab::PlotError;
using memlab::ReplicateRow;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig c;
    c.d = 64;
    c.q = 32;
    c.m = 40;
    c.seed = 7;
    c.replicates = 2;
    return c;
}

} // namespace

TEST_CASE("resolve_config fills m and eta from alpha") {
    ExperimentConfig c = testsupport::default_preset();
    const auto r = memlab::resolve_config(c);
    CHECK(r.m_resolved == 1241);
    CHECK(r.eta == doctest::Approx(1241.0 * std::log(2048.0) / 2048.0).epsilon(1e-15));
    CHECK(r.assumption_m_ok);
    CHECK_FALSE(r.assumption_q_logd_ok);  // 2048 < ln^4(2048): the flag must say so
    CHECK(r.assumption_q_le_d_ok);
    CHECK(r.activation_valid);
    CHECK(r.resolved);
    CHECK(*r.m == 1241);

    ExperimentConfig small;
    small.d = 4;
    small.q = 4;
    small.alpha = 1.0;
    CHECK(memlab::resolve_config(small).m_resolved == 4);
}

TEST_CASE("resolve_config honors an explicit m") {
    ExperimentConfig c;
    c.d = 2048;
    c.q = 2048;
    c.m = 1237;
    const auto r = memlab::resolve_config(c);
    CHECK(r.m_resolved == 1237);
    CHECK(r.eta == doctest::Approx(1237.0 * std::log(2048.0) / 2048.0).epsilon(1e-15));
}

TEST_CASE("resolve_config is idempotent") {
    ExperimentConfig c = tiny_config();
    const auto once = memlab::resolve_config(c);
    const auto twice = memlab::resolve_config(once);
    CHECK(once.m_resolved == twice.m_resolved);
    CHECK(once.eta == twice.eta);
    CHECK(memlab::config_hash(once) == memlab::config_hash(twice));
}

TEST_CASE("resolve_config rejects malformed sizes") {
    auto expect_throw = [](auto mutate) {
        ExperimentConfig c = tiny_config();
        mutate(c);
        CHECK_THROWS_AS((void)memlab::resolve_config(c), ConfigError);
    };
    expect_throw([](ExperimentConfig& c) { c.d = 1; });
    expect_throw([](ExperimentConfig& c) { c.q = 0; });
    expect_throw([](ExperimentConfig& c) { c.q = c.d + 1; });
    expect_throw([](ExperimentConfig& c) { c.replicates = 0; });
    expect_throw([](ExperimentConfig& c) { c.alpha = 1.0; });   // both m and alpha
    expect_throw([](ExperimentConfig& c) { c.m.reset(); });     // neither
    expect_throw([](ExperimentConfig& c) {
        c.m.reset();
        c.alpha = -2.0;
    });
    expect_throw([](ExperimentConfig& c) {
        c.m.reset();
        c.alpha = 1e-9;  // resolves to m = 0
    });
    expect_throw([](ExperimentConfig& c) { c.eta_override = -0.5; });
    expect_throw([](ExperimentConfig& c) { c.m = 0; });
}

TEST_CASE("eta override wins including zero") {
    ExperimentConfig c = tiny_config();
    c.eta_override = 0.0;
    CHECK(memlab::resolve_config(c).eta == 0.0);
    c.eta_override = 3.25;
    CHECK(memlab::resolve_config(c).eta == 3.25);
}

TEST_CASE("config hash is stable and sensitive") {
    const ExperimentConfig base = tiny_config();
    const std::string h = memlab::config_hash(base);
    CHECK(h.size() == 16);
    CHECK(h == memlab::config_hash(base));

    auto differs = [&](auto mutate) {
        ExperimentConfig c = tiny_config();
        mutate(c);
        CHECK(memlab::config_hash(c) != h);
    };
    differs([](ExperimentConfig& c) { c.d = 32; c.q = 32; });
    differs([](ExperimentConfig& c) { c.q = 16; });
    differs([](ExperimentConfig& c) { c.m = 41; });
    differs([](ExperimentConfig& c) { c.seed = 8; });
    differs([](ExperimentConfig& c) { c.replicates = 3; });
    differs([](ExperimentConfig& c) { c.sign_mode = memlab::SignMode::balanced; });
    differs([](ExperimentConfig& c) { c.gradient_mode = memlab::GradientMode::paper; });
    differs([](ExperimentConfig& c) { c.precision = memlab::Precision::single_precision; });
    differs([](ExperimentConfig& c) { c.eta_override = 1.0; });
    differs([](ExperimentConfig& c) {
        c.activation = memlab::Activation::make_smoothed_abs(0.1);
    });
}

TEST_CASE("hold-out indices spread and deduplicate") {
    using memlab::detail::hold_out_indices;
    CHECK(hold_out_indices(1, 5) == std::vector<std::size_t>{0});
    CHECK(hold_out_indices(2, 5) == std::vector<std::size_t>{0, 1});
    CHECK(hold_out_indices(5, 5) == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK(hold_out_indices(100, 5) == std::vector<std::size_t>{0, 25, 50, 75, 99});
    CHECK(hold_out_indices(100, 3) == std::vector<std::size_t>{0, 25, 50});
    CHECK(hold_out_indices(100, 0).empty());
    CHECK(hold_out_indices(0, 5).empty());
}

TEST_CASE("run_experiment is deterministic") {
    const ExperimentConfig c = tiny_config();
    const auto r1 = memlab::run_experiment(c);
    const auto r2 = memlab::run_experiment(c);
    REQUIRE(r1.rows.size() == 2);
    REQUIRE(r2.rows.size() == 2);
    REQUIRE(r1.reports.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& a = r1.rows[i];
        const auto& b = r2.rows[i];
        CHECK(a.replicate == i);
        CHECK(a.seed == 7);
        CHECK(a.error.empty());
        CHECK(a.config_hash == b.config_hash);
        CHECK(a.memorization_rate == b.memorization_rate);
        CHECK(a.min_margin == b.min_margin);
        CHECK(a.mean_margin == b.mean_margin);
        CHECK(a.active_count == b.active_count);
        CHECK(a.max_pre_h == b.max_pre_h);
        CHECK(a.spec_norm_eta_G == b.spec_norm_eta_G);
        CHECK(a.row_norm_max == b.row_norm_max);
        CHECK(a.gtilde_row_norm_max == b.gtilde_row_norm_max);
    }
    CHECK(r1.rows[0].min_margin != r1.rows[1].min_margin);  // replicates differ
}

TEST_CASE("run_experiment refuses an uncentered activation by default") {
    ExperimentConfig c = tiny_config();
    c.activation = memlab::Activation::make_relu();
    CHECK_THROWS_AS((void)memlab::run_experiment(c), ConfigError);
    memlab::RunOptions opts;
    opts.allow_invalid_activation = true;
    const auto r = memlab::run_experiment(c, opts);
    CHECK_FALSE(r.config.activation_valid);
    CHECK(r.rows.size() == 2);
    for (const auto& row : r.rows) CHECK(row.error.empty());
}

TEST_CASE("csv header matches the frozen column order") {
    CHECK(memlab::csv_header() ==
          "config_hash,seed,replicate,d,q,m,eta,activation,sign_mode,gradient_mode,"
          "memorization_rate,min_margin,mean_margin,margin_over_logd,active_count,"
          "max_pre_h,pre_h_ratio,spec_norm_eta_G,row_norm_max,gtilde_row_norm_max,"
          "runtime_ms,error");
    CHECK(memlab::csv_columns().size() == 22);
}

TEST_CASE("csv doubles survive a write/read round trip") {
    ReplicateRow row;
    row.config_hash = "deadbeefdeadbeef";
    row.seed = 7;
    row.replicate = 1;
    row.d = 64;
    row.q = 32;
    row.m = 40;
    row.eta = 0x1.921fb54442d18p+1;  // pi, needs all 17 digits
    row.activation = "abs";
    row.sign_mode = "iid";
    row.gradient_mode = "exact";
    row.memorization_rate = 1.0 / 3.0;
    row.min_margin = -2.2250738585072014e-308;
    row.mean_margin = 1e300;
    row.margin_over_logd = 0.1;
    row.active_count = 40;
    row.max_pre_h = 0.25;
    row.pre_h_ratio = 1e-17;
    row.spec_norm_eta_G = 2.0;
    row.row_norm_max = 1.0000000000000002;
    row.gtilde_row_norm_max = 0.0;
    row.runtime_ms = 12.5;

    std::stringstream ss;
    memlab::write_csv(ss, {row});
    const auto t = memlab::read_csv(ss);
    REQUIRE(t.cells.size() == 1);
    CHECK(t.numeric_column("eta")[0] == row.eta);
    CHECK(t.numeric_column("memorization_rate")[0] == row.memorization_rate);
    CHECK(t.numeric_column("min_margin")[0] == row.min_margin);
    CHECK(t.numeric_column("mean_margin")[0] == row.mean_margin);
    CHECK(t.numeric_column("row_norm_max")[0] == row.row_norm_max);
    CHECK(t.numeric_column("pre_h_ratio")[0] == row.pre_h_ratio);
    CHECK(t.cells[0][t.column_index("config_hash")] == "deadbeefdeadbeef");
    CHECK(t.cells[0][t.column_index("error")].empty());
}

TEST_CASE("csv reader rejects malformed input") {
    std::stringstream bad("a,b\n1,2,3\n");
    CHECK_THROWS_AS((void)memlab::read_csv(bad), CsvError);
    std::stringstream empty("");
    CHECK_THROWS_AS((void)memlab::read_csv(empty), CsvError);

    std::stringstream crlf("a,b\r\n1,2\r\n\r\n");
    const auto t = memlab::read_csv(crlf);
    CHECK(t.columns == std::vector<std::string>{"a", "b"});
    REQUIRE(t.cells.size() == 1);
    CHECK(t.cells[0][1] == "2");

    CHECK_THROWS_AS((void)t.column_index("missing"), CsvError);
    std::stringstream nonnum("a\nx\n");
    const auto t2 = memlab::read_csv(nonnum);
    CHECK_THROWS_AS((void)t2.numeric_column("a"), CsvError);
}

TEST_CASE("sweep covers the grid in order and an empty grid is legal") {
    const auto none = memlab::sweep({});
    CHECK(none.empty());
    std::stringstream ss;
    memlab::write_csv(ss, {});
    CHECK(ss.str() == memlab::csv_header() + "\n");

    ExperimentConfig a = tiny_config();
    a.replicates = 3;
    ExperimentConfig b = tiny_config();
    b.d = 32;
    b.q = 16;
    b.m = 20;
    b.replicates = 3;
    const auto results = memlab::sweep({a, b});
    REQUIRE(results.size() == 2);
    std::vector<ReplicateRow> rows;
    for (const auto& r : results)
        rows.insert(rows.end(), r.rows.begin(), r.rows.end());
    REQUIRE(rows.size() == 6);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(rows[i].d == 64);
        CHECK(rows[i].replicate == i);
        CHECK(rows[3 + i].d == 32);
        CHECK(rows[3 + i].replicate == i);
    }
}

TEST_CASE("plot renders well-formed deterministic svg") {
    std::stringstream ss(
        "d,ratio\n512,1.4\n512,1.3\n1024,1.2\n1024,1.15\n2048,1.05\n");
    const auto t = memlab::read_csv(ss);
    const auto svg1 = memlab::render_plot(t, "d", "ratio");
    const auto svg2 = memlab::render_plot(t, "d", "ratio");
    CHECK(svg1 == svg2);
    CHECK(svg1.find("<svg") != std::string::npos);
    CHECK(svg1.find("ratio vs d") != std::string::npos);
    CHECK(testsupport::xml_well_formed(svg1));

    CHECK_THROWS_AS((void)memlab::render_plot(t, "nope", "ratio"), PlotError);

    std::stringstream single("x,y\n1,2\n");
    const auto ts = memlab::read_csv(single);
    CHECK(testsupport::xml_well_formed(memlab::render_plot(ts, "x", "y")));

    std::stringstream nn("x,y\n1,nan\n2,nan\n");
    const auto tn = memlab::read_csv(nn);
    CHECK_THROWS_AS((void)memlab::render_plot(tn, "x", "y"), PlotError);

    std::stringstream txt("x,y\n1,hello\n");
    const auto tt = memlab::read_csv(txt);
    CHECK_THROWS_AS((void)memlab::render_plot(tt, "x", "y"), PlotError);
}

TEST_CASE("json config parsing round trip") {
    const json j = {
        {"d", 64},
        {"q", 32},
        {"m", 40},
        {"activation", {{"kind", "smoothed_abs"}, {"epsilon", 0.25}}},
        {"sign_mode", "balanced"},
        {"init", "haar"},
        {"seed", 7},
        {"replicates", 2},
        {"gradient_mode", "paper"},
        {"precision", "double"},
        {"eta_override", 0.5},
    };
    const auto c = memlab::tools::parse_config(j);
    CHECK(c.d == 64);
    CHECK(c.q == 32);
    CHECK(*c.m == 40);
    CHECK_FALSE(c.alpha.has_value());
    CHECK(c.activation.kind == memlab::ActKind::smoothed_abs);
    CHECK(c.activation.epsilon == 0.25);
    CHECK(c.sign_mode == memlab::SignMode::balanced);
    CHECK(c.init == memlab::InitMode::haar);
    CHECK(c.seed == 7);
    CHECK(c.replicates == 2);
    CHECK(c.gradient_mode == memlab::GradientMode::paper);
    CHECK(c.precision == memlab::Precision::double_precision);
    CHECK(c.eta_override == 0.5);
}

TEST_CASE("json config defaults alpha to one when sizes are omitted") {
    const auto c = memlab::tools::parse_config(json{{"d", 64}, {"q", 32}});
    CHECK_FALSE(c.m.has_value());
    CHECK(c.alpha == 1.0);
    CHECK(c.activation.kind == memlab::ActKind::abs_value);
    CHECK(c.seed == 1);
}

TEST_CASE("json config rejects unknown keys by name") {
    try {
        (void)memlab::tools::parse_config(json{{"d", 64}, {"dd", 1}});
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("dd") != std::string::npos);
    }
    CHECK_THROWS_AS((void)memlab::tools::parse_config(
                        json{{"activation", {{"kind", "smoothed_abs"}, {"eps", 0.1}}}}),
                    ConfigError);
    CHECK_THROWS_AS(
        (void)memlab::tools::parse_config(json{{"activation", {{"kind", "smoothed_abs"}}}}),
        ConfigError);
    CHECK_THROWS_AS((void)memlab::tools::parse_config(json{{"activation", "smoothed_abs"}}),
                    ConfigError);
    CHECK_THROWS_AS((void)memlab::tools::parse_config(json{{"sign_mode", "sometimes"}}),
                    ConfigError);
    CHECK_THROWS_AS((void)memlab::tools::parse_config(json{{"d", "sixty-four"}}), ConfigError);
}

TEST_CASE("activation string forms parse") {
    using memlab::tools::detail::parse_activation;
    CHECK(parse_activation(json("abs")).kind == memlab::ActKind::abs_value);
    CHECK(parse_activation(json("relu")).kind == memlab::ActKind::relu);
    CHECK_THROWS_AS((void)parse_activation(json("tanh")), ConfigError);
}

TEST_CASE("shipped default preset matches the embedded one") {
    const auto shipped =
        memlab::tools::load_config(std::string(MEMLAB_SOURCE_DIR) + "/presets/default.json");
    const auto embedded = testsupport::default_preset();
    CHECK(shipped.d == embedded.d);
    CHECK(shipped.q == embedded.q);
    CHECK(shipped.m.has_value() == embedded.m.has_value());
    CHECK(shipped.alpha == embedded.alpha);
    CHECK(shipped.activation.kind == embedded.activation.kind);
    CHECK(shipped.sign_mode == embedded.sign_mode);
    CHECK(shipped.init == embedded.init);
    CHECK(shipped.seed == embedded.seed);
    CHECK(shipped.replicates == embedded.replicates);
    CHECK(shipped.gradient_mode == embedded.gradient_mode);
    CHECK(shipped.precision == embedded.precision);
    CHECK_FALSE(shipped.eta_override.has_value());
    CHECK(memlab::config_hash(shipped) == memlab::config_hash(embedded));
}

TEST_CASE("sweep files accept both the bare array and the wrapped object") {
    const std::string dir = std::string(MEMLAB_SOURCE_DIR) + "/presets";
    const auto grid = memlab::tools::load_sweep(dir + "/trend.json");
    REQUIRE(grid.size() == 4);
    CHECK(grid[0].d == 512);
    CHECK(grid[3].d == 4096);

    const std::string tmp = "test_harness_sweep_tmp.json";
    {
        std::ofstream os(tmp);
        os << R"([{"d": 16, "q": 8, "m": 5}, {"d": 32, "q": 8, "m": 5}])";
    }
    const auto bare = memlab::tools::load_sweep(tmp);
    std::remove(tmp.c_str());
    REQUIRE(bare.size() == 2);
    CHECK(bare[0].d == 16);
    CHECK(bare[1].d == 32);

    const std::string tmp2 = "test_harness_sweep_tmp2.json";
    {
        std::ofstream os(tmp2);
        os << R"({"configs": [], "junk": 1})";
    }
    bool threw = false;
    try {
        (void)memlab::tools::load_sweep(tmp2);
    } catch (const ConfigError&) {
        threw = true;
    }
    std::remove(tmp2.c_str());
    CHECK(threw);
}
