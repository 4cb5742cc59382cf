/*
 * Copyright 2026 The optturn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

/// \file config.hpp
/// Experiment configuration: a strict JSON schema (unknown keys rejected,
/// every error names its key path). All times and rates are per day.
/// The key reference lives in configs/README.md.

#include "optturn/errors.hpp"
#include "optturn/path_simulator.hpp"

#include "json.hpp"

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace optturn {

using Rows = std::vector<std::vector<double>>;

struct MarketConfig {
    bool matrix_form = false;
    double kappa = 0.0;
    double lambda = 0.0;  ///< scalar impact, currency·day per currency²
    double sigma = 0.0;   ///< scalar daily volatility
    Rows lambda_matrix;
    Rows omega;           ///< daily return covariance
    bool operator==(const MarketConfig&) const = default;
};

struct ForecastConfig {
    bool matrix_form = false;
    double phi = 0.0;
    double nu = 0.0;
    Rows phi_matrix;
    Rows loading;  ///< empty: identity
    std::vector<double> mu0;
    bool operator==(const ForecastConfig&) const = default;
};

struct SimBlock {
    double dt = 2e-3;
    double horizon = 600.0;
    std::optional<double> burn_in;
    double bucket = 1.0;
    std::uint64_t n_paths = 1000;
    std::uint64_t seed = 20211014;
    std::vector<double> x0;  ///< empty: zero
    bool stationary_start = true;
    bool operator==(const SimBlock&) const = default;
};

struct OracleBlock {
    double dt = 1e-3;
    double horizon = 100.0;
    double window = 50.0;
    double tolerance = 0.01;
    std::vector<double> x0;  ///< empty: zero
    bool refine = true;
    int n_perturbations = 1000;
    double perturbation_scale = 1e-3;  ///< relative to max |x|
    std::uint64_t seed = 7;
    bool operator==(const OracleBlock&) const = default;
};

struct SweepBlock {
    std::string parameter;
    std::vector<double> values;
    bool operator==(const SweepBlock&) const = default;
};

struct OutputBlock {
    std::string path;
    std::string format = "csv";
    bool operator==(const OutputBlock&) const = default;
};

struct ExperimentConfig {
    std::string mode;
    std::optional<MarketConfig> market;
    std::optional<ForecastConfig> forecast;
    SimBlock sim;
    OracleBlock oracle;
    std::optional<SweepBlock> sweep;
    OutputBlock output;
    bool operator==(const ExperimentConfig&) const = default;
};

/// Simulation block used by paper-example when the config gives none.
inline SimBlock example_sim_block() {
    SimBlock s;
    s.dt = 2e-3;
    s.horizon = 600.0;
    s.burn_in = 100.0;
    s.n_paths = 2000;
    return s;
}

inline const std::set<std::string>& known_modes() {
    static const std::set<std::string> modes{"steady-state", "simulate", "oracle-check",
                                             "paper-example", "sweep"};
    return modes;
}

namespace detail {

using Json = nlohmann::ordered_json;

inline void reject_unknown(const Json& obj, const std::string& path,
                           std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(path + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("unknown key '" + (path.empty() ? key : path + "." + key) + "'");
    }
}

inline std::string join(const std::string& path, const char* key) {
    return path.empty() ? std::string(key) : path + "." + key;
}

inline double get_number(const Json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path + ": expected a number");
    return j.get<double>();
}

inline std::uint64_t get_u64(const Json& j, const std::string& path) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
        throw ConfigError(path + ": expected a non-negative integer");
    }
    return j.get<std::uint64_t>();
}

inline bool get_bool(const Json& j, const std::string& path) {
    if (!j.is_boolean()) throw ConfigError(path + ": expected true or false");
    return j.get<bool>();
}

inline std::string get_string(const Json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path + ": expected a string");
    return j.get<std::string>();
}

inline std::vector<double> get_vector(const Json& j, const std::string& path) {
    if (j.is_number()) return {j.get<double>()};
    if (!j.is_array()) throw ConfigError(path + ": expected a number or an array of numbers");
    std::vector<double> v;
    for (std::size_t i = 0; i < j.size(); ++i) {
        v.push_back(get_number(j[i], path + "[" + std::to_string(i) + "]"));
    }
    return v;
}

inline Rows get_rows(const Json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a non-empty array of rows");
    Rows rows;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string rp = path + "[" + std::to_string(i) + "]";
        if (!j[i].is_array()) throw ConfigError(rp + ": expected a row array");
        rows.push_back(get_vector(j[i], rp));
        if (rows.back().size() != rows.front().size()) throw ConfigError(rp + ": ragged matrix");
    }
    return rows;
}

template <class T, class F>
void read_opt(const Json& obj, const std::string& path, const char* key, T& dst, F&& getter) {
    if (obj.contains(key)) dst = getter(obj.at(key), join(path, key));
}

inline MarketConfig parse_market(const Json& j) {
    const std::string p = "market";
    reject_unknown(j, p, {"kappa", "lambda", "sigma", "lambda_matrix", "omega"});
    MarketConfig m;
    if (!j.contains("kappa")) throw ConfigError("market.kappa: required");
    m.kappa = get_number(j.at("kappa"), "market.kappa");
    const bool scalar = j.contains("lambda") || j.contains("sigma");
    const bool matrix = j.contains("lambda_matrix") || j.contains("omega");
    if (scalar == matrix) {
        throw ConfigError("market: give either lambda and sigma, or lambda_matrix and omega");
    }
    m.matrix_form = matrix;
    if (scalar) {
        if (!j.contains("lambda") || !j.contains("sigma")) throw ConfigError("market: lambda and sigma are both required");
        m.lambda = get_number(j.at("lambda"), "market.lambda");
        m.sigma = get_number(j.at("sigma"), "market.sigma");
    } else {
        if (!j.contains("lambda_matrix") || !j.contains("omega")) throw ConfigError("market: lambda_matrix and omega are both required");
        m.lambda_matrix = get_rows(j.at("lambda_matrix"), "market.lambda_matrix");
        m.omega = get_rows(j.at("omega"), "market.omega");
    }
    return m;
}

inline ForecastConfig parse_forecast(const Json& j) {
    reject_unknown(j, "forecast", {"phi", "nu", "mu0", "phi_matrix", "loading"});
    ForecastConfig f;
    const bool scalar = j.contains("phi") || j.contains("nu");
    const bool matrix = j.contains("phi_matrix") || j.contains("loading");
    if (scalar == matrix) throw ConfigError("forecast: give either phi and nu, or phi_matrix (and loading)");
    f.matrix_form = matrix;
    if (scalar) {
        if (!j.contains("phi") || !j.contains("nu")) throw ConfigError("forecast: phi and nu are both required");
        f.phi = get_number(j.at("phi"), "forecast.phi");
        f.nu = get_number(j.at("nu"), "forecast.nu");
        f.mu0 = {0.0};
        if (j.contains("mu0")) f.mu0 = {get_number(j.at("mu0"), "forecast.mu0")};
    } else {
        if (!j.contains("phi_matrix")) throw ConfigError("forecast.phi_matrix: required");
        f.phi_matrix = get_rows(j.at("phi_matrix"), "forecast.phi_matrix");
        read_opt(j, "forecast", "loading", f.loading, get_rows);
        f.mu0.assign(f.phi_matrix.size(), 0.0);
        read_opt(j, "forecast", "mu0", f.mu0, get_vector);
    }
    return f;
}

inline SimBlock parse_sim(const Json& j) {
    const std::string p = "sim";
    reject_unknown(j, p, {"dt", "horizon", "burn_in", "bucket", "n_paths", "seed", "x0",
                          "stationary_start"});
    SimBlock s;
    read_opt(j, p, "dt", s.dt, get_number);
    read_opt(j, p, "horizon", s.horizon, get_number);
    if (j.contains("burn_in")) s.burn_in = get_number(j.at("burn_in"), "sim.burn_in");
    read_opt(j, p, "bucket", s.bucket, get_number);
    read_opt(j, p, "n_paths", s.n_paths, get_u64);
    read_opt(j, p, "seed", s.seed, get_u64);
    read_opt(j, p, "x0", s.x0, get_vector);
    read_opt(j, p, "stationary_start", s.stationary_start, get_bool);
    return s;
}

inline OracleBlock parse_oracle(const Json& j) {
    const std::string p = "oracle";
    reject_unknown(j, p, {"dt", "horizon", "window", "tolerance", "x0", "refine",
                          "n_perturbations", "perturbation_scale", "seed"});
    OracleBlock o;
    read_opt(j, p, "dt", o.dt, get_number);
    read_opt(j, p, "horizon", o.horizon, get_number);
    read_opt(j, p, "window", o.window, get_number);
    read_opt(j, p, "tolerance", o.tolerance, get_number);
    read_opt(j, p, "x0", o.x0, get_vector);
    read_opt(j, p, "refine", o.refine, get_bool);
    if (j.contains("n_perturbations")) {
        o.n_perturbations = static_cast<int>(get_u64(j.at("n_perturbations"), "oracle.n_perturbations"));
    }
    read_opt(j, p, "perturbation_scale", o.perturbation_scale, get_number);
    read_opt(j, p, "seed", o.seed, get_u64);
    return o;
}

inline SweepBlock parse_sweep(const Json& j) {
    reject_unknown(j, "sweep", {"parameter", "values"});
    SweepBlock s;
    if (!j.contains("parameter") || !j.contains("values")) throw ConfigError("sweep: parameter and values are required");
    s.parameter = get_string(j.at("parameter"), "sweep.parameter");
    static const std::set<std::string> allowed{"phi", "nu", "kappa", "lambda", "sigma"};
    if (!allowed.count(s.parameter)) {
        throw ConfigError("sweep.parameter: '" + s.parameter + "' is not one of phi, nu, kappa, lambda, sigma");
    }
    s.values = get_vector(j.at("values"), "sweep.values");
    return s;
}

inline OutputBlock parse_output(const Json& j) {
    reject_unknown(j, "output", {"path", "format"});
    OutputBlock o;
    read_opt(j, "output", "path", o.path, get_string);
    read_opt(j, "output", "format", o.format, get_string);
    if (o.format != "csv" && o.format != "json") throw ConfigError("output.format: expected csv or json");
    return o;
}

inline Json rows_json(const Rows& r) {
    Json j = Json::array();
    for (const auto& row : r) j.push_back(row);
    return j;
}

}  // namespace detail

/// Parses a configuration document. `mode` from the command line, when
/// non-empty, must agree with a `mode` key present in the document.
inline ExperimentConfig parse_config(const std::string& text, const std::string& mode = "") {
    detail::Json j;
    try {
        j = detail::Json::parse(text, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    detail::reject_unknown(j, "", {"mode", "market", "forecast", "sim", "oracle", "sweep", "output"});
    ExperimentConfig c;
    if (j.contains("mode")) c.mode = detail::get_string(j.at("mode"), "mode");
    if (!mode.empty()) {
        if (!c.mode.empty() && c.mode != mode) {
            throw ConfigError("mode: config says '" + c.mode + "' but '" + mode + "' was requested");
        }
        c.mode = mode;
    }
    if (!c.mode.empty() && !known_modes().count(c.mode)) throw ConfigError("mode: unknown mode '" + c.mode + "'");
    if (j.contains("market")) c.market = detail::parse_market(j.at("market"));
    if (j.contains("forecast")) c.forecast = detail::parse_forecast(j.at("forecast"));
    if (j.contains("sim")) {
        c.sim = detail::parse_sim(j.at("sim"));
    } else if (c.mode == "paper-example") {
        c.sim = example_sim_block();
    }
    if (j.contains("oracle")) c.oracle = detail::parse_oracle(j.at("oracle"));
    if (j.contains("sweep")) c.sweep = detail::parse_sweep(j.at("sweep"));
    if (j.contains("output")) c.output = detail::parse_output(j.at("output"));
    return c;
}

inline ExperimentConfig load_config(const std::string& path, const std::string& mode = "") {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), mode);
}

/// Canonical JSON form; parse_config(to_json(c)) == c.
inline std::string to_json(const ExperimentConfig& c) {
    detail::Json j;
    if (!c.mode.empty()) j["mode"] = c.mode;
    if (c.market) {
        const MarketConfig& m = *c.market;
        detail::Json mj;
        mj["kappa"] = m.kappa;
        if (m.matrix_form) {
            mj["lambda_matrix"] = detail::rows_json(m.lambda_matrix);
            mj["omega"] = detail::rows_json(m.omega);
        } else {
            mj["lambda"] = m.lambda;
            mj["sigma"] = m.sigma;
        }
        j["market"] = mj;
    }
    if (c.forecast) {
        const ForecastConfig& f = *c.forecast;
        detail::Json fj;
        if (f.matrix_form) {
            fj["phi_matrix"] = detail::rows_json(f.phi_matrix);
            if (!f.loading.empty()) fj["loading"] = detail::rows_json(f.loading);
            fj["mu0"] = f.mu0;
        } else {
            fj["phi"] = f.phi;
            fj["nu"] = f.nu;
            fj["mu0"] = f.mu0.empty() ? 0.0 : f.mu0.front();
        }
        j["forecast"] = fj;
    }
    {
        const SimBlock& s = c.sim;
        detail::Json sj;
        sj["dt"] = s.dt;
        sj["horizon"] = s.horizon;
        if (s.burn_in) sj["burn_in"] = *s.burn_in;
        sj["bucket"] = s.bucket;
        sj["n_paths"] = s.n_paths;
        sj["seed"] = s.seed;
        sj["x0"] = s.x0;
        sj["stationary_start"] = s.stationary_start;
        j["sim"] = sj;
    }
    {
        const OracleBlock& o = c.oracle;
        detail::Json oj;
        oj["dt"] = o.dt;
        oj["horizon"] = o.horizon;
        oj["window"] = o.window;
        oj["tolerance"] = o.tolerance;
        oj["x0"] = o.x0;
        oj["refine"] = o.refine;
        oj["n_perturbations"] = o.n_perturbations;
        oj["perturbation_scale"] = o.perturbation_scale;
        oj["seed"] = o.seed;
        j["oracle"] = oj;
    }
    if (c.sweep) j["sweep"] = detail::Json{{"parameter", c.sweep->parameter}, {"values", c.sweep->values}};
    j["output"] = detail::Json{{"path", c.output.path}, {"format", c.output.format}};
    return j.dump(2);
}

/// Recovers the configuration from the `# config:` comment block of a report.
inline ExperimentConfig parse_config_echo(std::istream& in) {
    std::string line, body;
    bool inside = false;
    while (std::getline(in, line)) {
        if (!inside) {
            inside = line == "# config:";
            continue;
        }
        if (line.rfind("# ", 0) != 0) break;
        body += line.substr(2);
        body += '\n';
    }
    if (!inside) throw ConfigError("report has no config echo");
    return parse_config(body);
}

}  // namespace optturn
