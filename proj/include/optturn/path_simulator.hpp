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

/// \file path_simulator.hpp
/// Monte Carlo engine co-evolving the O-U forecast and the optimal position.
///
/// The forecast is stepped with its exact transition kernel. The position is
/// stepped with the exponential integrator
///     x_{t+dt} = e^{-Γdt} x_t + Γ⁻¹(I - e^{-Γdt}) b_t,
/// exact for a forcing held constant over the step. ẋ is recorded as the
/// instantaneous drift -Γx_t + b_t, sampled at the left end of each step.
///
/// Paths are processed in fixed-size chunks whose statistics are merged in
/// chunk order, so results do not depend on the number of threads.

#include "optturn/errors.hpp"
#include "optturn/forecast_models.hpp"
#include "optturn/random.hpp"
#include "optturn/strategy_solver.hpp"

#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <thread>
#include <vector>

namespace optturn {

struct SimConfig {
    double dt = 2e-3;
    double horizon = 600.0;
    std::optional<double> burn_in;  ///< defaults to default_burn_in()
    double bucket = 1.0;            ///< width of a reporting bucket, days
    std::uint64_t n_paths = 1000;
    std::uint64_t seed = 20211014;
    Vector x0 = Vector::Zero(1);
    bool stationary_start = true;  ///< draw μ₀ from the stationary law, else use the model's μ₀

    bool operator==(const SimConfig& o) const {
        return dt == o.dt && horizon == o.horizon && burn_in == o.burn_in && bucket == o.bucket &&
               n_paths == o.n_paths && seed == o.seed && x0.size() == o.x0.size() &&
               x0 == o.x0 && stationary_start == o.stationary_start;
    }
};

/// Ten forecast half-lives plus 10/γ, rounded up to whole days.
inline double default_burn_in(double gamma_min, double phi_min) {
    return std::ceil(10.0 * std::numbers::ln2 / phi_min + 10.0 / gamma_min);
}

/// Statistics tracked per bucket. The first kPathStats are also averaged per
/// path over the post-burn-in window.
enum Stat : std::size_t {
    kAbsX,       ///< Σ|x_i|
    kAbsXdot,    ///< Σ|ẋ_i|
    kX2,         ///< x·x
    kXdot2,      ///< ẋ·ẋ
    kMX,         ///< b·x (m x in 1D)
    kXMu,        ///< x·μ
    kImpact,     ///< ½ ẋᵀΛẋ
    kRisk,       ///< xᵀΩx
    kObjective,  ///< μ·x - ½ẋᵀΛẋ - (κ/2) xᵀΩx
    kXEnd,       ///< x at the bucket end (first component)
    kStatCount
};
inline constexpr std::size_t kPathStats = kObjective + 1;

/// Welford accumulator with Chan's merge.
struct RunningStat {
    double n = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double v) {
        n += 1.0;
        const double d = v - mean;
        mean += d / n;
        m2 += d * (v - mean);
    }
    void merge(const RunningStat& o) {
        if (o.n == 0.0) return;
        if (n == 0.0) {
            *this = o;
            return;
        }
        const double total = n + o.n;
        const double d = o.mean - mean;
        mean += d * o.n / total;
        m2 += o.m2 + d * d * n * o.n / total;
        n = total;
    }
    /// Standard error of the mean; +inf with fewer than two samples.
    double standard_error() const {
        if (n < 2.0) return std::numeric_limits<double>::infinity();
        return std::sqrt(m2 / (n - 1.0) / n);
    }
};

struct BucketStats {
    double time = 0.0;  ///< bucket start, days
    std::array<double, kStatCount> mean{};
    std::array<double, kStatCount> se{};
};

using PathAverages = std::array<double, kPathStats>;

struct SimEnsemble {
    SimConfig config;  ///< with burn_in resolved
    std::size_t steps_per_bucket = 0;
    std::size_t first_steady_bucket = 0;
    std::vector<BucketStats> buckets;
    std::vector<PathAverages> path_averages;  ///< post-burn-in time averages, one per path

    std::size_t n_paths() const { return path_averages.size(); }
    bool has_steady_window() const { return first_steady_bucket < buckets.size(); }
};

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

struct ExecutionPolicy {
    unsigned threads = 0;  ///< 0: hardware concurrency
};

namespace detail {

inline constexpr std::uint64_t kChunkPaths = 64;

struct Grid {
    std::size_t n_steps;
    std::size_t steps_per_bucket;
    std::size_t n_buckets;
    std::size_t first_steady;
};

inline std::size_t checked_ratio(double num, double den, const char* what) {
    const double r = num / den;
    const double rounded = std::round(r);
    if (!(rounded >= 1.0) || std::abs(r - rounded) > 1e-9 * std::max(1.0, r)) {
        throw InvalidConfig(std::string(what) + " must be a positive integer multiple of dt");
    }
    return static_cast<std::size_t>(rounded);
}

inline Grid make_grid(const SimConfig& c) {
    if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw InvalidConfig("dt must be > 0");
    if (!(c.horizon >= c.dt)) throw InvalidConfig("horizon must be >= dt");
    if (c.n_paths < 1) throw InvalidConfig("n_paths must be >= 1");
    if (!(c.bucket > 0.0) || c.bucket > c.horizon) throw InvalidConfig("bucket must lie in (0, horizon]");
    const double burn = c.burn_in.value_or(0.0);
    if (!(burn >= 0.0 && burn < c.horizon)) throw InvalidConfig("burn_in must lie in [0, horizon)");
    Grid g{};
    g.n_steps = checked_ratio(c.horizon, c.dt, "horizon");
    g.steps_per_bucket = checked_ratio(c.bucket, c.dt, "bucket");
    if (g.n_steps % g.steps_per_bucket != 0) throw InvalidConfig("horizon must be a multiple of bucket");
    g.n_buckets = g.n_steps / g.steps_per_bucket;
    g.first_steady = static_cast<std::size_t>(std::ceil(burn / c.bucket - 1e-9));
    return g;
}

/// Per-chunk accumulators: one RunningStat per (bucket, stat).
struct ChunkResult {
    std::vector<RunningStat> stats;
};

template <class PathKernel>
SimEnsemble run_paths(const SimConfig& config, const Grid& grid, PathKernel&& kernel,
                      ExecutionPolicy policy) {
    SimEnsemble ens;
    ens.config = config;
    ens.steps_per_bucket = grid.steps_per_bucket;
    ens.first_steady_bucket = grid.first_steady;
    ens.path_averages.assign(config.n_paths, PathAverages{});

    const std::uint64_t n_chunks = (config.n_paths + kChunkPaths - 1) / kChunkPaths;
    unsigned threads = policy.threads ? policy.threads : std::thread::hardware_concurrency();
    threads = static_cast<unsigned>(std::clamp<std::uint64_t>(threads ? threads : 1, 1, n_chunks));

    std::vector<RunningStat> total(grid.n_buckets * kStatCount);
    std::vector<ChunkResult> wave(threads);
    for (std::uint64_t first = 0; first < n_chunks; first += threads) {
        const std::uint64_t count = std::min<std::uint64_t>(threads, n_chunks - first);
        auto work = [&](std::uint64_t slot) {
            ChunkResult& res = wave[slot];
            res.stats.assign(grid.n_buckets * kStatCount, RunningStat{});
            const std::uint64_t begin = (first + slot) * kChunkPaths;
            const std::uint64_t end = std::min(begin + kChunkPaths, config.n_paths);
            for (std::uint64_t p = begin; p < end; ++p) {
                kernel(p, res.stats, ens.path_averages[p]);
            }
        };
        if (count == 1) {
            work(0);
        } else {
            std::vector<std::jthread> pool;
            pool.reserve(count);
            for (std::uint64_t s = 0; s < count; ++s) pool.emplace_back(work, s);
        }
        for (std::uint64_t s = 0; s < count; ++s) {
            for (std::size_t i = 0; i < total.size(); ++i) total[i].merge(wave[s].stats[i]);
        }
    }

    ens.buckets.resize(grid.n_buckets);
    for (std::size_t b = 0; b < grid.n_buckets; ++b) {
        BucketStats& bs = ens.buckets[b];
        bs.time = static_cast<double>(b) * config.bucket;
        for (std::size_t q = 0; q < kStatCount; ++q) {
            const RunningStat& rs = total[b * kStatCount + q];
            bs.mean[q] = rs.mean;
            bs.se[q] = rs.standard_error();
        }
    }
    return ens;
}

inline SimConfig resolve_burn_in(SimConfig config, double gamma_min, double phi_min) {
    if (!config.burn_in) config.burn_in = default_burn_in(gamma_min, phi_min);
    return config;
}

}  // namespace detail

/// Single-asset simulation.
inline SimEnsemble simulate(const MarketParams& params, const OUForecast1D& forecast,
                            const FeedbackLaw& law, SimConfig config,
                            ExecutionPolicy policy = {}) {
    if (!params.is_scalar() || law.dim() != 1) throw InvalidConfig("single-asset run needs 1D inputs");
    if (config.x0.size() != 1) throw InvalidConfig("x0 must have one component");
    const double gamma = law.gamma_scalar();
    config = detail::resolve_burn_in(std::move(config), gamma, forecast.phi());
    const detail::Grid grid = detail::make_grid(config);

    const double dt = config.dt;
    const double f = law.forcing_scalar();
    const double lambda = params.lambda_scalar();
    const double sigma2 = params.sigma2_scalar();
    const double kappa = params.kappa();
    const double mu_decay = std::exp(-forecast.phi() * dt);
    const double mu_sd = std::sqrt(transition_variance(forecast, dt));
    const double mu_stat_sd = std::sqrt(forecast.stationary_variance());
    const double x_decay = std::exp(-gamma * dt);
    const double x_weight = -std::expm1(-gamma * dt) / gamma;
    const double x0 = config.x0(0);
    const double inv_steps = 1.0 / static_cast<double>(grid.steps_per_bucket);
    const std::size_t steady_buckets = grid.n_buckets - std::min(grid.first_steady, grid.n_buckets);

    auto kernel = [&](std::uint64_t path, std::vector<RunningStat>& stats, PathAverages& avg) {
        CounterStream rng(config.seed, path);
        boost::random::normal_distribution<double> normal;
        double mu = config.stationary_start ? mu_stat_sd * normal(rng) : forecast.mu0();
        double x = x0;
        PathAverages steady{};
        for (std::size_t b = 0; b < grid.n_buckets; ++b) {
            double s_abs_x = 0, s_abs_xd = 0, s_x2 = 0, s_xd2 = 0, s_mx = 0, s_xmu = 0;
            for (std::size_t s = 0; s < grid.steps_per_bucket; ++s) {
                const double m = f * mu;
                const double xd = m - gamma * x;
                s_abs_x += std::abs(x);
                s_abs_xd += std::abs(xd);
                s_x2 += x * x;
                s_xd2 += xd * xd;
                s_mx += m * x;
                s_xmu += x * mu;
                x = x_decay * x + x_weight * m;
                mu = mu_decay * mu + mu_sd * normal(rng);
            }
            PathAverages a;
            a[kAbsX] = s_abs_x * inv_steps;
            a[kAbsXdot] = s_abs_xd * inv_steps;
            a[kX2] = s_x2 * inv_steps;
            a[kXdot2] = s_xd2 * inv_steps;
            a[kMX] = s_mx * inv_steps;
            a[kXMu] = s_xmu * inv_steps;
            a[kImpact] = 0.5 * lambda * a[kXdot2];
            a[kRisk] = sigma2 * a[kX2];
            a[kObjective] = a[kXMu] - a[kImpact] - 0.5 * kappa * a[kRisk];
            RunningStat* row = &stats[b * kStatCount];
            for (std::size_t q = 0; q < kPathStats; ++q) row[q].add(a[q]);
            row[kXEnd].add(x);
            if (b >= grid.first_steady) {
                for (std::size_t q = 0; q < kPathStats; ++q) steady[q] += a[q];
            }
        }
        if (steady_buckets > 0) {
            for (std::size_t q = 0; q < kPathStats; ++q) {
                avg[q] = steady[q] / static_cast<double>(steady_buckets);
            }
        }
    };
    return detail::run_paths(config, grid, kernel, policy);
}

/// Multi-asset simulation with the matrix law.
inline SimEnsemble simulate(const MarketParams& params, const OUForecastND& forecast,
                            const FeedbackLaw& law, SimConfig config,
                            ExecutionPolicy policy = {}) {
    const Eigen::Index n = params.dim();
    if (forecast.dim() != n || law.dim() != n) throw InvalidConfig("dimension mismatch in inputs");
    if (config.x0.size() != n) throw InvalidConfig("x0 has the wrong number of components");
    Eigen::EigenSolver<Matrix> es(forecast.phi(), false);
    config = detail::resolve_burn_in(std::move(config), law.gamma().eigenvalues().minCoeff(),
                                     es.eigenvalues().real().minCoeff());
    const detail::Grid grid = detail::make_grid(config);

    const OUTransitionND transition(forecast, config.dt);
    const Matrix x_decay = law.gamma().decay(config.dt);
    const Matrix x_weight = law.gamma().step_weight(config.dt);
    const Matrix& gamma = law.gamma().matrix();
    const Matrix& forcing = law.forcing_map();
    const Matrix& lambda = params.lambda().matrix();
    const Matrix& omega = params.omega().matrix();
    const double kappa = params.kappa();
    const double inv_steps = 1.0 / static_cast<double>(grid.steps_per_bucket);
    const std::size_t steady_buckets = grid.n_buckets - std::min(grid.first_steady, grid.n_buckets);

    auto kernel = [&](std::uint64_t path, std::vector<RunningStat>& stats, PathAverages& avg) {
        CounterStream rng(config.seed, path);
        boost::random::normal_distribution<double> normal;
        Vector z(n), mu(n), x = config.x0, m(n), xd(n), tmp(n);
        auto draw = [&] {
            for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
        };
        if (config.stationary_start) {
            draw();
            mu.noalias() = transition.stationary_factor() * z;
        } else {
            mu = forecast.mu0();
        }
        PathAverages steady{};
        for (std::size_t b = 0; b < grid.n_buckets; ++b) {
            PathAverages a{};
            for (std::size_t s = 0; s < grid.steps_per_bucket; ++s) {
                m.noalias() = forcing * mu;
                xd = m;
                xd.noalias() -= gamma * x;
                a[kAbsX] += x.lpNorm<1>();
                a[kAbsXdot] += xd.lpNorm<1>();
                a[kX2] += x.squaredNorm();
                a[kXdot2] += xd.squaredNorm();
                a[kMX] += m.dot(x);
                a[kXMu] += x.dot(mu);
                a[kImpact] += 0.5 * xd.dot(lambda * xd);
                a[kRisk] += x.dot(omega * x);
                tmp.noalias() = x_decay * x;
                tmp.noalias() += x_weight * m;
                x = tmp;
                draw();
                tmp.noalias() = transition.decay() * mu;
                tmp.noalias() += transition.noise_factor() * z;
                mu = tmp;
            }
            for (std::size_t q = 0; q < kObjective; ++q) a[q] *= inv_steps;
            a[kObjective] = a[kXMu] - a[kImpact] - 0.5 * kappa * a[kRisk];
            RunningStat* row = &stats[b * kStatCount];
            for (std::size_t q = 0; q < kPathStats; ++q) row[q].add(a[q]);
            row[kXEnd].add(x(0));
            if (b >= grid.first_steady) {
                for (std::size_t q = 0; q < kPathStats; ++q) steady[q] += a[q];
            }
        }
        if (steady_buckets > 0) {
            for (std::size_t q = 0; q < kPathStats; ++q) {
                avg[q] = steady[q] / static_cast<double>(steady_buckets);
            }
        }
    };
    return detail::run_paths(config, grid, kernel, policy);
}

namespace detail {

inline void require_steady(const SimEnsemble& ens) {
    if (!ens.has_steady_window() || ens.n_paths() == 0) {
        throw InsufficientData("ensemble has no post-burn-in buckets");
    }
}

/// Path-level jackknife of a smooth function of the post-burn-in means.
template <class F>
Estimate jackknife(const SimEnsemble& ens, F&& f) {
    require_steady(ens);
    const std::size_t n = ens.n_paths();
    PathAverages sum{};
    for (const auto& a : ens.path_averages) {
        for (std::size_t q = 0; q < kPathStats; ++q) sum[q] += a[q];
    }
    PathAverages mean{};
    for (std::size_t q = 0; q < kPathStats; ++q) mean[q] = sum[q] / static_cast<double>(n);
    Estimate e;
    e.value = f(mean);
    if (n < 2) {
        e.se = std::numeric_limits<double>::infinity();
        return e;
    }
    std::vector<double> loo(n);
    double loo_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        PathAverages m{};
        for (std::size_t q = 0; q < kPathStats; ++q) {
            m[q] = (sum[q] - ens.path_averages[i][q]) / static_cast<double>(n - 1);
        }
        loo[i] = f(m);
        loo_mean += loo[i];
    }
    loo_mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
    e.se = std::sqrt(ss * static_cast<double>(n - 1) / static_cast<double>(n));
    return e;
}

}  // namespace detail

/// Post-burn-in mean of one per-path statistic, SE from the across-path spread.
inline Estimate estimate_moment(const SimEnsemble& ens, Stat stat) {
    detail::require_steady(ens);
    if (stat >= kPathStats) throw InvalidParameter("statistic has no steady-state average");
    RunningStat rs;
    for (const auto& a : ens.path_averages) rs.add(a[stat]);
    return {rs.mean, rs.standard_error()};
}

/// Time-averaged post-burn-in E|ẋ| / E|x|.
inline Estimate estimate_turnover(const SimEnsemble& ens) {
    detail::require_steady(ens);
    const Estimate denom = estimate_moment(ens, kAbsX);
    if (!(denom.value > 0.0)) throw InsufficientData("E|x| is zero: turnover undefined");
    return detail::jackknife(ens, [](const PathAverages& m) { return m[kAbsXdot] / m[kAbsX]; });
}

/// (E[x·μ] - ½E[ẋᵀΛẋ]) / √E[xᵀΩx] over the post-burn-in window.
template <class Forecast>
Estimate estimate_ir(const SimEnsemble& ens, const MarketParams& params, const Forecast& forecast) {
    detail::require_steady(ens);
    if constexpr (std::is_same_v<Forecast, OUForecast1D>) {
        if (forecast.nu() == 0.0) throw InsufficientData("noiseless forecast: IR undefined");
    } else {
        if (forecast.loading().isZero(0.0)) throw InsufficientData("noiseless forecast: IR undefined");
    }
    if (params.dim() != ens.config.x0.size()) throw DimensionMismatch("market and ensemble differ");
    const Estimate risk = estimate_moment(ens, kRisk);
    if (!(risk.value > 0.0)) throw InsufficientData("zero position risk: IR undefined");
    return detail::jackknife(ens, [](const PathAverages& m) {
        return (m[kXMu] - m[kImpact]) / std::sqrt(m[kRisk]);
    });
}

/// (E|x|)² / E[x²], which is 2/π for a centered Gaussian position.
inline Estimate estimate_half_normal_ratio(const SimEnsemble& ens) {
    detail::require_steady(ens);
    if (!(estimate_moment(ens, kX2).value > 0.0)) throw InsufficientData("E[x^2] is zero");
    return detail::jackknife(ens, [](const PathAverages& m) { return m[kAbsX] * m[kAbsX] / m[kX2]; });
}

}  // namespace optturn
