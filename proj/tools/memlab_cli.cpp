#include <cstdio>
#include <cstdlib>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config_io.hpp"
#include "memlab/memlab.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

std::optional<std::uint64_t> env_seed_override() {
    const char* v = std::getenv("MEMLAB_SEED");
    if (!v || !*v) return std::nullopt;
    char* end = nullptr;
    const unsigned long long parsed = std::strtoull(v, &end, 10);
    if (end == v || *end != '\0')
        throw memlab::ConfigError(std::string("MEMLAB_SEED is not an integer: \"") + v + "\"");
    return static_cast<std::uint64_t>(parsed);
}

void apply_seed_override(memlab::ExperimentConfig& cfg) {
    if (const auto s = env_seed_override()) {
        cfg.seed = *s;
        cfg.resolved = false;  // hash and streams must see the new seed
    }
}

void print_assumption_flags(const memlab::ExperimentConfig& cfg) {
    if (!cfg.assumption_m_ok)
        std::fprintf(stderr, "note: m=%zu exceeds d*q/ln^4(d) at d=%zu, q=%zu\n",
                     cfg.m_resolved, cfg.d, cfg.q);
    if (!cfg.assumption_q_logd_ok)
        std::fprintf(stderr, "note: q=%zu is below ln^4(d)=%.1f; width assumption violated\n",
                     cfg.q, std::pow(std::log(static_cast<double>(cfg.d)), 4.0));
    if (!cfg.activation_valid)
        std::fprintf(stderr, "note: activation %s fails the centered-derivative condition\n",
                     cfg.activation.name().c_str());
}

int cmd_run(const std::string& config_path, const std::string& out_path,
            const std::string& report_path, std::size_t threads, bool allow_invalid) {
    memlab::ExperimentConfig cfg = memlab::tools::load_config(config_path);
    apply_seed_override(cfg);
    cfg = memlab::resolve_config(cfg);
    print_assumption_flags(cfg);

    memlab::RunOptions opts;
    opts.threads = threads;
    opts.allow_invalid_activation = allow_invalid;
    const memlab::ExperimentResult res = memlab::run_experiment(cfg, opts);
    memlab::write_csv_file(out_path, res.rows);
    if (!report_path.empty()) memlab::write_json_report_file(report_path, res);

    std::size_t errors = 0;
    for (const auto& r : res.rows) errors += !r.error.empty();
    std::printf("wrote %zu replicate rows to %s (%zu with errors)\n", res.rows.size(),
                out_path.c_str(), errors);
    return errors == 0 ? kExitPass : kExitCheckFailed;
}

int cmd_sweep(const std::string& config_path, const std::string& out_path) {
    std::vector<memlab::ExperimentConfig> grid = memlab::tools::load_sweep(config_path);
    for (auto& cfg : grid) apply_seed_override(cfg);
    for (auto& cfg : grid) {
        cfg = memlab::resolve_config(cfg);
        print_assumption_flags(cfg);
    }
    const auto results = memlab::sweep(grid);
    std::vector<memlab::ReplicateRow> rows;
    for (const auto& res : results)
        rows.insert(rows.end(), res.rows.begin(), res.rows.end());
    memlab::write_csv_file(out_path, rows);

    std::size_t errors = 0;
    for (const auto& r : rows) errors += !r.error.empty();
    std::printf("wrote %zu rows (%zu configs) to %s (%zu with errors)\n", rows.size(),
                grid.size(), out_path.c_str(), errors);
    return errors == 0 ? kExitPass : kExitCheckFailed;
}

int cmd_check_lemmas(const std::string& config_path, const std::string& out_path) {
    memlab::ExperimentConfig cfg = memlab::tools::load_config(config_path);
    apply_seed_override(cfg);
    cfg = memlab::resolve_config(cfg);
    print_assumption_flags(cfg);

    const memlab::ExperimentResult res = memlab::run_experiment(cfg);
    memlab::write_json_report_file(out_path, res);

    std::size_t failed = 0, total = 0;
    for (const auto& rep : res.reports) {
        for (const auto& c : rep.checks) {
            ++total;
            failed += !c.pass;
        }
    }
    std::size_t errors = 0;
    for (const auto& r : res.rows) errors += !r.error.empty();
    std::printf("%zu checks across %zu replicates: %zu failed, %zu replicate errors\n", total,
                res.rows.size(), failed, errors);
    return (failed == 0 && errors == 0) ? kExitPass : kExitCheckFailed;
}

int cmd_grad_check(std::size_t d, std::size_t q, std::size_t m, double epsilon, double h) {
    std::uint64_t seed = 1;
    if (const auto s = env_seed_override()) seed = *s;
    memlab::RngStream stream = memlab::derive_stream(seed, 0);
    memlab::RngStream ws = stream.substream(0);
    memlab::RngStream ss = stream.substream(1);
    memlab::RngStream ds = stream.substream(2);

    memlab::Network<double> net;
    net.q = q;
    net.d = d;
    net.activation = memlab::Activation::make_smoothed_abs(epsilon);
    {
        memlab::DenseMatrix<double> g = memlab::sample_gaussian_matrix<double>(ws, q, d);
        net.W = memlab::orthonormal_rows(g);
    }
    net.a = memlab::sample_signs<double>(ss, q, memlab::SignMode::iid);
    const memlab::Dataset<double> data = memlab::sample_dataset<double>(ds, m, d);

    const memlab::DenseMatrix<double> G =
        memlab::full_gradient(net, data, memlab::GradientMode::exact);
    const memlab::DenseMatrix<double> FD = memlab::finite_diff_gradient(net, data, h);

    double max_sum = 0, max_g = 0;
    for (std::size_t i = 0; i < G.a.size(); ++i) {
        max_sum = std::max(max_sum, std::abs(FD.a[i] + G.a[i]));
        max_g = std::max(max_g, std::abs(G.a[i]));
    }
    const double rel = max_g > 0 ? max_sum / max_g : max_sum;
    std::printf("grad-check d=%zu q=%zu m=%zu epsilon=%g h=%g: rel_err=%.3e (tol 1e-6)\n", d, q,
                m, epsilon, h, rel);
    return rel <= 1e-6 ? kExitPass : kExitCheckFailed;
}

int cmd_plot(const std::string& in_path, const std::string& x_col, const std::string& y_col,
             const std::string& out_path) {
    const memlab::CsvTable table = memlab::read_csv_file(in_path);
    memlab::emit_plot(table, x_col, y_col, out_path);
    std::printf("wrote %s\n", out_path.c_str());
    return kExitPass;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"one-step memorization laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_path, report_path;
    std::size_t threads = 1;
    bool allow_invalid = false;

    auto* run = app.add_subcommand("run", "run one config, write per-replicate CSV");
    run->add_option("--config", config_path, "experiment config (json)")->required();
    run->add_option("--out", out_path, "output csv path")->required();
    run->add_option("--json-report", report_path, "also write a json report");
    run->add_option("--threads", threads, "replicate-level worker threads");
    run->add_flag("--allow-invalid-activation", allow_invalid,
                  "run activations that fail the centered-derivative condition");

    std::string sweep_config, sweep_out;
    auto* sw = app.add_subcommand("sweep", "run a grid of configs into one CSV");
    sw->add_option("--config", sweep_config, "sweep file (json array of configs)")->required();
    sw->add_option("--out", sweep_out, "output csv path")->required();

    std::string lem_config, lem_out;
    auto* lem = app.add_subcommand("check-lemmas", "run one config, write lemma report json");
    lem->add_option("--config", lem_config, "experiment config (json)")->required();
    lem->add_option("--out", lem_out, "output report path")->required();

    std::size_t gc_d = 8, gc_q = 4, gc_m = 6;
    double gc_eps = 0.1, gc_h = 1e-5;
    auto* gc = app.add_subcommand("grad-check",
                                  "compare the assembled gradient to central differences");
    gc->set_help_flag("--help", "print help");  // frees --h for the step size
    gc->add_option("--d", gc_d, "input dimension");
    gc->add_option("--q", gc_q, "network width");
    gc->add_option("--m", gc_m, "dataset size");
    gc->add_option("--epsilon", gc_eps, "smoothed-abs epsilon");
    gc->add_option("--h", gc_h, "finite-difference step");

    std::string plot_in, plot_x, plot_y, plot_out;
    auto* pl = app.add_subcommand("plot", "scatter + per-x mean line from a results CSV");
    pl->add_option("--in", plot_in, "input csv")->required();
    pl->add_option("--x", plot_x, "x column name")->required();
    pl->add_option("--y", plot_y, "y column name")->required();
    pl->add_option("--out", plot_out, "output svg path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitPass : kExitUsage;
    }

    try {
        if (run->parsed())
            return cmd_run(config_path, out_path, report_path, threads, allow_invalid);
        if (sw->parsed()) return cmd_sweep(sweep_config, sweep_out);
        if (lem->parsed()) return cmd_check_lemmas(lem_config, lem_out);
        if (gc->parsed()) return cmd_grad_check(gc_d, gc_q, gc_m, gc_eps, gc_h);
        if (pl->parsed()) return cmd_plot(plot_in, plot_x, plot_y, plot_out);
    } catch (const memlab::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const memlab::CsvError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const memlab::PlotError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitCheckFailed;
    }
    return kExitUsage;
}
