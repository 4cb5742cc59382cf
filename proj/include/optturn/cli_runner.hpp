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

/// \file cli_runner.hpp
/// Experiment dispatch and report serialization for the `optturn` binary.
///
/// Report layout (CSV format):
///   # optturn report mode=<mode>
///   # config:
///   # <canonical JSON config, one line per comment>
///   time_bucket,e_abs_x,...            (or a mode-specific table)
///   <rows>
///   <blank line>
///   key=value                          (summary block)

#include "optturn/config.hpp"
#include "optturn/errors.hpp"
#include "optturn/forecast_models.hpp"
#include "optturn/path_simulator.hpp"
#include "optturn/strategy_solver.hpp"
#include "optturn/variational_oracle.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace optturn {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitThreshold = 3 };

using Summary = std::vector<std::pair<std::string, std::string>>;

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

/// Everything a run produces besides its exit code.
struct RunResult {
    int exit_code = kExitOk;
    Summary summary;
    std::optional<SimEnsemble> ensemble;
    std::optional<Table> table;
};

// Worked-example calibration. λ is back-solved from γ = √(κσ²/λ) = 0.1/day.
// An impact of 10 bps per 1% of ADV at $10M ADV does not fix λ on its own.
inline constexpr double kExampleKappa = 1e-6;
inline constexpr double kExampleSigma = 0.01;
inline constexpr double kExamplePhi = 0.2;
inline constexpr double kExampleGamma = 0.1;
inline constexpr double kExampleNu = 0.1;
inline constexpr double kExampleMu0 = 1e-4;

/// λ = κσ²/γ² reproducing a target rate γ.
inline double back_solve_lambda(double kappa, double sigma, double gamma) {
    return kappa * sigma * sigma / (gamma * gamma);
}

/// Quoted impact "bps per 1% of ADV" converted to a linear λ (return per
/// currency traded): λ = (bps·1e-4) / (0.01·ADV).
inline double impact_from_adv_quote(double bps_per_pct_adv, double adv) {
    return bps_per_pct_adv * 1e-4 / (0.01 * adv);
}

inline const char* kBucketHeader =
    "time_bucket,e_abs_x,se_abs_x,e_abs_xdot,se_abs_xdot,e_x2,e_xdot2,e_mx,e_xmu,objective_increment";

inline std::string fmt_value(double v) { return fmt::format("{:.6g}", v); }
inline std::string fmt_full(double v) { return fmt::format("{:.10g}", v); }

namespace detail {

inline Matrix to_matrix(const Rows& rows, const std::string& what) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto k = static_cast<Eigen::Index>(rows.front().size());
    Matrix m(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) m(i, j) = rows[i][j];
    }
    if (!m.allFinite()) throw ConfigError(what + ": non-finite entry");
    return m;
}

inline Vector to_vector(const std::vector<double>& v, Eigen::Index n, const std::string& what) {
    if (v.empty()) return Vector::Zero(n);
    if (static_cast<Eigen::Index>(v.size()) != n) {
        throw ConfigError(what + ": expected " + std::to_string(n) + " components");
    }
    return Eigen::Map<const Vector>(v.data(), n);
}

/// Library validation failures inside a config are config errors.
template <class F>
auto as_config_error(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

inline MarketParams build_market(const MarketConfig& m) {
    return as_config_error("market", [&] {
        if (!m.matrix_form) return MarketParams::scalar(m.kappa, m.lambda, m.sigma);
        return MarketParams(m.kappa, to_matrix(m.lambda_matrix, "market.lambda_matrix"),
                            to_matrix(m.omega, "market.omega"));
    });
}

inline OUForecast1D build_forecast_1d(const ForecastConfig& f) {
    return as_config_error("forecast", [&] {
        return OUForecast1D(f.phi, f.nu, f.mu0.empty() ? 0.0 : f.mu0.front());
    });
}

inline OUForecastND build_forecast_nd(const ForecastConfig& f) {
    return as_config_error("forecast", [&] {
        const Matrix phi = to_matrix(f.phi_matrix, "forecast.phi_matrix");
        const Matrix loading = f.loading.empty() ? Matrix::Identity(phi.rows(), phi.rows())
                                                 : to_matrix(f.loading, "forecast.loading");
        return OUForecastND(phi, loading, to_vector(f.mu0, phi.rows(), "forecast.mu0"));
    });
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

inline SimConfig to_sim_config(const SimBlock& s, Eigen::Index dim) {
    SimConfig c;
    c.dt = s.dt;
    c.horizon = s.horizon;
    c.burn_in = s.burn_in;
    c.bucket = s.bucket;
    c.n_paths = s.n_paths;
    c.seed = s.seed;
    c.x0 = to_vector(s.x0, dim, "sim.x0");
    c.stationary_start = s.stationary_start;
    return c;
}

inline ExecutionPolicy policy_from_env() {
    ExecutionPolicy p;
    if (const char* t = std::getenv("OPTTURN_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(t, &end, 10);
        if (end != t && *end == '\0') p.threads = static_cast<unsigned>(v);
    }
    return p;
}

inline void add(Summary& s, std::string key, double v) { s.emplace_back(std::move(key), fmt_value(v)); }
inline void add(Summary& s, std::string key, std::string v) { s.emplace_back(std::move(key), std::move(v)); }

inline void add_steady_state(Summary& s, const SteadyStateReport& r) {
    add(s, "gamma", r.gamma);
    add(s, "phi", r.phi);
    add(s, "theta", r.theta);
    add(s, "turnover_closed_form", r.turnover);
    if (r.degenerate) {
        for (const char* k : {"c0", "h_bar", "g_bar", "v_bar", "pnl_rate_gross", "pnl_rate_net", "ir_closed_form"}) {
            add(s, k, std::string("undefined"));
        }
        return;
    }
    add(s, "c0", r.c0);
    add(s, "h_bar", r.h_bar);
    add(s, "g_bar", r.g_bar);
    add(s, "v_bar", r.v_bar);
    add(s, "pnl_rate_gross", r.pnl_rate_gross);
    add(s, "pnl_rate_net", r.pnl_rate_net);
    add(s, "ir_closed_form", r.information_ratio());
}

template <class F>
void add_estimate(Summary& s, const std::string& key, F&& f) {
    try {
        const Estimate e = f();
        add(s, key, e.value);
        add(s, key + "_se", e.se);
    } catch (const InsufficientData&) {
        add(s, key, std::string("undefined"));
    }
}

template <class Forecast>
void add_simulation(Summary& s, const SimEnsemble& ens, const MarketParams& params,
                    const Forecast& forecast) {
    add(s, "n_paths", static_cast<double>(ens.n_paths()));
    add(s, "burn_in", *ens.config.burn_in);
    add_estimate(s, "turnover_mc", [&] { return estimate_turnover(ens); });
    add_estimate(s, "ir_mc", [&] { return estimate_ir(ens, params, forecast); });
    add_estimate(s, "e_x2_mc", [&] { return estimate_moment(ens, kX2); });
    add_estimate(s, "e_xdot2_mc", [&] { return estimate_moment(ens, kXdot2); });
    add_estimate(s, "e_mx_mc", [&] { return estimate_moment(ens, kMX); });
    add_estimate(s, "e_xmu_mc", [&] { return estimate_moment(ens, kXMu); });
    add_estimate(s, "half_normal_ratio_mc", [&] { return estimate_half_normal_ratio(ens); });
}

struct OracleOutcome {
    Table table;
    double max_rel_error = 0.0;
    double refinement_ratio = 0.0;
    double perturbation_gain = 0.0;
    double objective = 0.0;
};

template <class Forecast, class X0>
OracleOutcome run_oracle(const MarketParams& params, const Forecast& forecast, const FeedbackLaw& law,
                         const OracleBlock& o, const X0& x0) {
    require(o.dt > 0.0 && o.horizon > 0.0 && o.window > 0.0 && o.window <= o.horizon,
            "oracle: need dt > 0 and 0 < window <= horizon");
    OracleOutcome out;
    out.table.header = {"dt", "max_rel_error", "oracle_objective", "feedback_objective", "kkt_residual"};
    OracleSolution sol;
    const auto problem = DiscreteProblem::from_forecast(params, forecast, o.dt, o.horizon, x0);
    const OracleComparison c = compare_with_feedback(problem, law, o.window, &sol);
    out.table.rows.push_back({c.dt, c.max_rel_error, c.oracle_objective, c.feedback_objective, c.kkt_residual});
    out.max_rel_error = c.max_rel_error;
    out.objective = c.oracle_objective;
    if (o.refine) {
        const auto fine = DiscreteProblem::from_forecast(params, forecast, 0.5 * o.dt, o.horizon, x0);
        const OracleComparison cf = compare_with_feedback(fine, law, o.window);
        out.table.rows.push_back({cf.dt, cf.max_rel_error, cf.oracle_objective, cf.feedback_objective,
                                  cf.kkt_residual});
        out.refinement_ratio = cf.max_rel_error > 0.0 ? c.max_rel_error / cf.max_rel_error : 0.0;
    }
    const double scale = o.perturbation_scale * std::max(sol.x_path.cwiseAbs().maxCoeff(), 1e-300);
    out.perturbation_gain = perturbation_check(sol, problem, o.n_perturbations, scale, o.seed);
    return out;
}

inline void add_oracle(Summary& s, const OracleOutcome& o, const OracleBlock& cfg) {
    add(s, "oracle_max_rel_error", o.max_rel_error);
    if (cfg.refine) add(s, "oracle_refinement_ratio", o.refinement_ratio);
    add(s, "oracle_objective", o.objective);
    add(s, "oracle_perturbation_max_gain", o.perturbation_gain);
    add(s, "oracle_tolerance", cfg.tolerance);
}

inline RunResult run_steady_state(const ExperimentConfig& c) {
    require(c.market && c.forecast, "steady-state: market and forecast blocks are required");
    require(!c.market->matrix_form && !c.forecast->matrix_form,
            "steady-state: closed forms are single-asset (scalar market and forecast)");
    RunResult r;
    const MarketParams params = build_market(*c.market);
    if (c.forecast->phi == 0.0) {
        // Random-walk limit: only the turnover closed form survives.
        const double gamma = rate_matrix(params.kappa(), params.lambda(), params.omega()).matrix()(0, 0);
        add(r.summary, "gamma", gamma);
        add(r.summary, "phi", 0.0);
        add(r.summary, "turnover_closed_form", optimal_turnover(gamma, 0.0));
        add(r.summary, "moments", std::string("undefined"));
        return r;
    }
    const OUForecast1D forecast = build_forecast_1d(*c.forecast);
    const SteadyStateReport rep = steady_state(params, forecast);
    add_steady_state(r.summary, rep);
    add(r.summary, "turnover_explicit",
        optimal_turnover_explicit(params.kappa(), params.lambda_scalar(), params.sigma_scalar(),
                                  forecast.phi()));
    add(r.summary, "half_life", forecast.half_life());
    return r;
}

inline RunResult run_simulate(const ExperimentConfig& c, ExecutionPolicy policy) {
    require(c.market && c.forecast, "simulate: market and forecast blocks are required");
    RunResult r;
    const MarketParams params = build_market(*c.market);
    const SimConfig sim = to_sim_config(c.sim, params.dim());
    if (!c.forecast->matrix_form) {
        const OUForecast1D forecast = build_forecast_1d(*c.forecast);
        const FeedbackLaw law = as_config_error("forecast", [&] { return solve_feedback(params, forecast); });
        SimEnsemble ens = as_config_error("sim", [&] { return simulate(params, forecast, law, sim, policy); });
        add_steady_state(r.summary, steady_state(params, forecast));
        add_simulation(r.summary, ens, params, forecast);
        r.ensemble = std::move(ens);
    } else {
        const OUForecastND forecast = build_forecast_nd(*c.forecast);
        const FeedbackLaw law = as_config_error("forecast", [&] { return solve_feedback(params, forecast); });
        SimEnsemble ens = as_config_error("sim", [&] { return simulate(params, forecast, law, sim, policy); });
        add_simulation(r.summary, ens, params, forecast);
        r.ensemble = std::move(ens);
    }
    return r;
}

inline RunResult run_oracle_check(const ExperimentConfig& c) {
    require(c.market && c.forecast, "oracle-check: market and forecast blocks are required");
    RunResult r;
    const MarketParams params = build_market(*c.market);
    OracleOutcome out;
    if (!c.forecast->matrix_form) {
        const OUForecast1D forecast = build_forecast_1d(*c.forecast);
        const FeedbackLaw law = solve_feedback(params, forecast);
        const double x0 = c.oracle.x0.empty() ? 0.0 : to_vector(c.oracle.x0, 1, "oracle.x0")(0);
        out = as_config_error("oracle", [&] { return run_oracle(params, forecast, law, c.oracle, x0); });
    } else {
        const OUForecastND forecast = build_forecast_nd(*c.forecast);
        const FeedbackLaw law = solve_feedback(params, forecast);
        const Vector x0 = to_vector(c.oracle.x0, params.dim(), "oracle.x0");
        out = as_config_error("oracle", [&] { return run_oracle(params, forecast, law, c.oracle, x0); });
    }
    add_oracle(r.summary, out, c.oracle);
    r.table = std::move(out.table);
    const bool ok = out.max_rel_error <= c.oracle.tolerance;
    add(r.summary, "oracle_check", std::string(ok ? "pass" : "fail"));
    r.exit_code = ok ? kExitOk : kExitThreshold;
    return r;
}

inline RunResult run_paper_example(const ExperimentConfig& c, ExecutionPolicy policy) {
    require(!c.market && !c.forecast && !c.sweep,
            "paper-example: parameters are fixed; only sim, oracle and output blocks are accepted");
    RunResult r;
    const double lambda = back_solve_lambda(kExampleKappa, kExampleSigma, kExampleGamma);
    const MarketParams params = MarketParams::scalar(kExampleKappa, lambda, kExampleSigma);
    const OUForecast1D forecast(kExamplePhi, kExampleNu, kExampleMu0);
    const FeedbackLaw law = solve_feedback(params, forecast);
    add(r.summary, "kappa", kExampleKappa);
    add(r.summary, "sigma", kExampleSigma);
    add(r.summary, "lambda", lambda);
    add(r.summary, "nu", kExampleNu);
    add_steady_state(r.summary, steady_state(params, forecast));

    SimConfig sim = to_sim_config(c.sim, 1);
    sim.stationary_start = true;
    SimEnsemble ens = as_config_error("sim", [&] { return simulate(params, forecast, law, sim, policy); });
    add_simulation(r.summary, ens, params, forecast);

    const OracleOutcome out = as_config_error("oracle", [&] {
        return run_oracle(params, forecast, law, c.oracle,
                          c.oracle.x0.empty() ? 0.0 : to_vector(c.oracle.x0, 1, "oracle.x0")(0));
    });
    add_oracle(r.summary, out, c.oracle);
    r.ensemble = std::move(ens);
    return r;
}

inline RunResult run_sweep(const ExperimentConfig& c) {
    require(c.market && c.forecast && c.sweep, "sweep: market, forecast and sweep blocks are required");
    require(!c.market->matrix_form && !c.forecast->matrix_form, "sweep: scalar market and forecast only");
    require(!c.sweep->values.empty(), "sweep.values: at least one value is required");
    RunResult r;
    Table t;
    t.header = {c.sweep->parameter, "gamma", "turnover", "ir"};
    for (double v : c.sweep->values) {
        MarketConfig m = *c.market;
        ForecastConfig f = *c.forecast;
        const std::string& p = c.sweep->parameter;
        if (p == "phi") f.phi = v;
        else if (p == "nu") f.nu = v;
        else if (p == "kappa") m.kappa = v;
        else if (p == "lambda") m.lambda = v;
        else m.sigma = v;
        const SteadyStateReport rep = steady_state(build_market(m), build_forecast_1d(f));
        t.rows.push_back({v, rep.gamma, rep.turnover,
                          rep.ir ? *rep.ir : std::numeric_limits<double>::quiet_NaN()});
    }
    add(r.summary, "sweep_parameter", c.sweep->parameter);
    add(r.summary, "sweep_points", static_cast<double>(t.rows.size()));
    r.table = std::move(t);
    return r;
}

inline void write_csv_cell(std::ostream& out, double v) {
    if (std::isnan(v)) out << "nan";
    else out << fmt_full(v);
}

inline nlohmann::ordered_json summary_json(const Summary& s) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : s) j[k] = v;
    return j;
}

}  // namespace detail

/// Serializes a run. `ensemble` and `table` may both be absent, giving a
/// header-only CSV followed by the summary.
inline void write_report(std::ostream& out, const ExperimentConfig& config, const Summary& summary,
                         const SimEnsemble* ensemble, const Table* table,
                         const std::string& format = "csv") {
    if (format == "json") {
        nlohmann::ordered_json j;
        j["config"] = nlohmann::ordered_json::parse(to_json(config));
        j["summary"] = detail::summary_json(summary);
        if (ensemble) {
            nlohmann::ordered_json rows = nlohmann::ordered_json::array();
            for (const BucketStats& b : ensemble->buckets) {
                rows.push_back({{"time_bucket", b.time},
                                {"e_abs_x", b.mean[kAbsX]},
                                {"se_abs_x", b.se[kAbsX]},
                                {"e_abs_xdot", b.mean[kAbsXdot]},
                                {"se_abs_xdot", b.se[kAbsXdot]},
                                {"e_x2", b.mean[kX2]},
                                {"e_xdot2", b.mean[kXdot2]},
                                {"e_mx", b.mean[kMX]},
                                {"e_xmu", b.mean[kXMu]},
                                {"objective_increment", b.mean[kObjective]}});
            }
            j["buckets"] = rows;
        }
        if (table) {
            j["table"] = {{"header", table->header}, {"rows", table->rows}};
        }
        out << j.dump(2) << '\n';
        return;
    }
    if (format != "csv") throw ConfigError("output.format: expected csv or json");

    out << "# optturn report mode=" << config.mode << '\n' << "# config:\n";
    std::istringstream echo(to_json(config));
    for (std::string line; std::getline(echo, line);) out << "# " << line << '\n';

    if (table) {
        for (std::size_t i = 0; i < table->header.size(); ++i) out << (i ? "," : "") << table->header[i];
        out << '\n';
        for (const auto& row : table->rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out << ',';
                detail::write_csv_cell(out, row[i]);
            }
            out << '\n';
        }
    } else {
        out << kBucketHeader << '\n';
        if (ensemble) {
            for (const BucketStats& b : ensemble->buckets) {
                const double cells[] = {b.time, b.mean[kAbsX], b.se[kAbsX], b.mean[kAbsXdot],
                                        b.se[kAbsXdot], b.mean[kX2], b.mean[kXdot2], b.mean[kMX],
                                        b.mean[kXMu], b.mean[kObjective]};
                for (std::size_t i = 0; i < std::size(cells); ++i) {
                    if (i) out << ',';
                    detail::write_csv_cell(out, cells[i]);
                }
                out << '\n';
            }
        }
    }
    out << '\n';
    for (const auto& [k, v] : summary) out << k << '=' << v << '\n';
}

inline void write_report(const std::string& path, const ExperimentConfig& config,
                         const Summary& summary, const SimEnsemble* ensemble, const Table* table,
                         const std::string& format = "csv") {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IOFailure("cannot open '" + path + "' for writing");
    write_report(file, config, summary, ensemble, table, format);
    file.flush();
    if (!file) throw IOFailure("write to '" + path + "' failed");
}

/// Runs one experiment.
inline RunResult run(const ExperimentConfig& config, ExecutionPolicy policy = detail::policy_from_env()) {
    const std::string& mode = config.mode;
    if (mode == "steady-state") return detail::run_steady_state(config);
    if (mode == "simulate") return detail::run_simulate(config, policy);
    if (mode == "oracle-check") return detail::run_oracle_check(config);
    if (mode == "paper-example") return detail::run_paper_example(config, policy);
    if (mode == "sweep") return detail::run_sweep(config);
    throw ConfigError("mode: unknown mode '" + mode + "'");
}

}  // namespace optturn
