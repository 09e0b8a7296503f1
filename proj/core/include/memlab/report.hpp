#pragma once

#include <cmath>
#include <fstream>
#include <ostream>
#include <string>

#include "experiment.hpp"

namespace memlab {

namespace detail {

inline std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

// JSON has no NaN / Infinity literals.
inline std::string json_num(double v) {
    if (std::isnan(v)) return "\"nan\"";
    if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
    return format_double(v);
}

} // namespace detail

/// Machine-readable run summary: resolved config, per-replicate metrics and
/// lemma checks with their thresholds, and the aggregate verdict.
inline void write_json_report(std::ostream& os, const ExperimentResult& res) {
    using detail::json_escape;
    using detail::json_num;
    const ExperimentConfig& c = res.config;
    os << "{\n";
    os << "  \"config\": {\n";
    os << "    \"hash\": \"" << config_hash(c) << "\",\n";
    os << "    \"d\": " << c.d << ",\n";
    os << "    \"q\": " << c.q << ",\n";
    os << "    \"m\": " << c.m_resolved << ",\n";
    os << "    \"eta\": " << json_num(c.eta) << ",\n";
    os << "    \"activation\": \"" << json_escape(c.activation.name()) << "\",\n";
    os << "    \"activation_valid\": " << (c.activation_valid ? "true" : "false") << ",\n";
    os << "    \"sign_mode\": \"" << to_string(c.sign_mode) << "\",\n";
    os << "    \"init\": \"" << to_string(c.init) << "\",\n";
    os << "    \"gradient_mode\": \"" << to_string(c.gradient_mode) << "\",\n";
    os << "    \"precision\": \"" << to_string(c.precision) << "\",\n";
    os << "    \"seed\": " << c.seed << ",\n";
    os << "    \"replicates\": " << c.replicates << ",\n";
    os << "    \"assumptions\": {\n";
    os << "      \"m_within_budget\": " << (c.assumption_m_ok ? "true" : "false") << ",\n";
    os << "      \"q_at_least_log4_d\": " << (c.assumption_q_logd_ok ? "true" : "false")
       << ",\n";
    os << "      \"q_at_most_d\": " << (c.assumption_q_le_d_ok ? "true" : "false") << "\n";
    os << "    }\n";
    os << "  },\n";
    {
        const double logd = std::log(static_cast<double>(c.d));
        const double l2 = c.activation.lipschitz_bound * c.activation.lipschitz_bound;
        const double gbound = static_cast<double>(c.m_resolved) * logd * logd * l2 /
                              (static_cast<double>(c.d) * static_cast<double>(c.q));
        const double dev = 1.0 / std::sqrt(static_cast<double>(c.d));
        os << "  \"thresholds\": {\n";
        os << "    \"prestep_ratio_bound\": " << json_num(kPrestepRatioBound) << ",\n";
        os << "    \"spectral_bound\": " << json_num(kSpectralBound) << ",\n";
        os << "    \"row_norm_lower_bound\": " << json_num(1.0 - dev) << ",\n";
        os << "    \"row_norm_upper_bound\": " << json_num(1.0 + gbound + dev) << ",\n";
        os << "    \"gtilde_row_norm_bound\": " << json_num(gbound + dev) << ",\n";
        os << "    \"decomposition_identity_tol\": " << json_num(kDecompIdentityTol) << ",\n";
        os << "    \"self_over_predicted\": [" << json_num(kSelfOverPredictedLo) << ", "
           << json_num(kSelfOverPredictedHi) << "],\n";
        os << "    \"base_over_sqrtlogd_bound\": " << json_num(kBaseOverSqrtLogdBound) << "\n";
        os << "  },\n";
    }
    os << "  \"replicates\": [\n";
    for (std::size_t r = 0; r < res.rows.size(); ++r) {
        const ReplicateRow& row = res.rows[r];
        const LemmaReport& rep = r < res.reports.size() ? res.reports[r] : LemmaReport{};
        os << "    {\n";
        os << "      \"replicate\": " << row.replicate << ",\n";
        if (!row.error.empty()) {
            os << "      \"error\": \"" << json_escape(row.error) << "\"\n";
            os << "    }" << (r + 1 < res.rows.size() ? "," : "") << "\n";
            continue;
        }
        os << "      \"memorization_rate\": " << json_num(row.memorization_rate) << ",\n";
        os << "      \"min_margin\": " << json_num(row.min_margin) << ",\n";
        os << "      \"mean_margin\": " << json_num(row.mean_margin) << ",\n";
        os << "      \"margin_over_logd\": " << json_num(row.margin_over_logd) << ",\n";
        os << "      \"active_count\": " << row.active_count << ",\n";
        os << "      \"max_pre_h\": " << json_num(row.max_pre_h) << ",\n";
        os << "      \"pre_h_ratio\": " << json_num(row.pre_h_ratio) << ",\n";
        os << "      \"spec_norm_eta_G\": " << json_num(row.spec_norm_eta_G) << ",\n";
        os << "      \"spec_norm_eta_Gtilde\": " << json_num(rep.spec_norm_eta_Gtilde) << ",\n";
        os << "      \"row_norm_min\": " << json_num(rep.row_norms.row_norm_min) << ",\n";
        os << "      \"row_norm_max\": " << json_num(row.row_norm_max) << ",\n";
        os << "      \"row_norm_mean\": " << json_num(rep.row_norms.row_norm_mean) << ",\n";
        os << "      \"gtilde_row_norm_max\": " << json_num(row.gtilde_row_norm_max) << ",\n";
        os << "      \"decomposition\": [\n";
        for (std::size_t k = 0; k < rep.decomposition.size(); ++k) {
            const DecompositionTriple& tri = rep.decomposition[k];
            os << "        {\"hold_out\": " << tri.hold_out
               << ", \"base_term\": " << json_num(tri.base_term)
               << ", \"self_term\": " << json_num(tri.self_term)
               << ", \"predicted\": " << json_num(tri.predicted)
               << ", \"identity_residual\": " << json_num(tri.identity_residual) << "}"
               << (k + 1 < rep.decomposition.size() ? "," : "") << "\n";
        }
        os << "      ],\n";
        os << "      \"runtime_ms\": " << json_num(row.runtime_ms) << ",\n";
        os << "      \"checks\": [\n";
        for (std::size_t k = 0; k < rep.checks.size(); ++k) {
            const LemmaCheck& ch = rep.checks[k];
            os << "        {\"name\": \"" << json_escape(ch.name)
               << "\", \"measured\": " << json_num(ch.measured)
               << ", \"threshold_lo\": " << json_num(ch.threshold_lo)
               << ", \"threshold_hi\": " << json_num(ch.threshold_hi)
               << ", \"pass\": " << (ch.pass ? "true" : "false") << "}"
               << (k + 1 < rep.checks.size() ? "," : "") << "\n";
        }
        os << "      ]\n";
        os << "    }" << (r + 1 < res.rows.size() ? "," : "") << "\n";
    }
    os << "  ],\n";
    os << "  \"all_checks_pass\": " << (res.all_checks_pass() ? "true" : "false") << "\n";
    os << "}\n";
}

inline void write_json_report_file(const std::string& path, const ExperimentResult& res) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_json_report(os, res);
    if (!os) throw std::runtime_error("write failed: " + path);
}

} // namespace memlab
