#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memlab/experiment.hpp"

namespace memlab::tools {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                                const std::string& where) {
    for (const auto& [key, _] : obj.items())
        if (!known.count(key)) throw ConfigError("unknown key in " + where + ": \"" + key + "\"");
}

inline Activation parse_activation(const json& j) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "abs") return Activation::make_abs();
        if (s == "relu") return Activation::make_relu();
        throw ConfigError("unknown activation \"" + s +
                          "\" (smoothed_abs needs the object form with an epsilon)");
    }
    if (!j.is_object()) throw ConfigError("activation must be a string or an object");
    reject_unknown_keys(j, {"kind", "epsilon"}, "activation");
    if (!j.contains("kind")) throw ConfigError("activation object needs a \"kind\"");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "abs") return Activation::make_abs();
    if (kind == "relu") return Activation::make_relu();
    if (kind == "smoothed_abs") {
        if (!j.contains("epsilon"))
            throw ConfigError("smoothed_abs activation needs an \"epsilon\"");
        return Activation::make_smoothed_abs(j.at("epsilon").get<double>());
    }
    throw ConfigError("unknown activation kind \"" + kind + "\"");
}

} // namespace detail

/// Parses one experiment config object. Every key is checked; anything
/// unrecognized is an error rather than a silent ignore.
inline ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a json object");
    detail::reject_unknown_keys(j,
                                {"d", "q", "m", "alpha", "activation", "sign_mode", "init",
                                 "seed", "replicates", "gradient_mode", "precision",
                                 "eta_override"},
                                "config");
    ExperimentConfig c;
    try {
        if (j.contains("d")) c.d = j.at("d").get<std::size_t>();
        if (j.contains("q")) c.q = j.at("q").get<std::size_t>();
        if (j.contains("m")) c.m = j.at("m").get<std::size_t>();
        if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
        if (j.contains("activation")) c.activation = detail::parse_activation(j.at("activation"));
        if (j.contains("sign_mode")) {
            const std::string s = j.at("sign_mode").get<std::string>();
            if (s == "iid")
                c.sign_mode = SignMode::iid;
            else if (s == "balanced")
                c.sign_mode = SignMode::balanced;
            else
                throw ConfigError("sign_mode must be \"iid\" or \"balanced\", got \"" + s + "\"");
        }
        if (j.contains("init")) {
            const std::string s = j.at("init").get<std::string>();
            if (s == "haar")
                c.init = InitMode::haar;
            else if (s == "basis")
                c.init = InitMode::basis;
            else
                throw ConfigError("init must be \"haar\" or \"basis\", got \"" + s + "\"");
        }
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("replicates")) c.replicates = j.at("replicates").get<std::size_t>();
        if (j.contains("gradient_mode")) {
            const std::string s = j.at("gradient_mode").get<std::string>();
            if (s == "paper")
                c.gradient_mode = GradientMode::paper;
            else if (s == "exact")
                c.gradient_mode = GradientMode::exact;
            else
                throw ConfigError("gradient_mode must be \"paper\" or \"exact\", got \"" + s +
                                  "\"");
        }
        if (j.contains("precision")) {
            const std::string s = j.at("precision").get<std::string>();
            if (s == "double")
                c.precision = Precision::double_precision;
            else if (s == "single")
                c.precision = Precision::single_precision;
            else
                throw ConfigError("precision must be \"double\" or \"single\", got \"" + s +
                                  "\"");
        }
        if (j.contains("eta_override")) c.eta_override = j.at("eta_override").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    // If the file names neither m nor alpha, fall back to the theorem density.
    if (!c.m && !c.alpha) c.alpha = 1.0;
    return c;
}

inline json load_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
}

inline ExperimentConfig load_config(const std::string& path) {
    return parse_config(load_json_file(path));
}

/// A sweep file is a top-level array of configs or {"configs": [ ... ]}.
inline std::vector<ExperimentConfig> load_sweep(const std::string& path) {
    const json j = load_json_file(path);
    const json* arr = nullptr;
    if (j.is_array()) {
        arr = &j;
    } else if (j.is_object()) {
        detail::reject_unknown_keys(j, {"configs"}, "sweep file");
        if (!j.contains("configs")) throw ConfigError("sweep file needs a \"configs\" array");
        if (!j.at("configs").is_array()) throw ConfigError("\"configs\" must be an array");
        arr = &j.at("configs");
    } else {
        throw ConfigError("sweep file must be an array or an object with \"configs\"");
    }
    std::vector<ExperimentConfig> grid;
    grid.reserve(arr->size());
    for (const auto& item : *arr) grid.push_back(parse_config(item));
    return grid;  // empty grid is legal and yields a header-only CSV

}

} // namespace memlab::tools
