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

/// \file variational_oracle.hpp
/// Direct maximization of the discretized objective
///
///   J(x) = Σ_k w_k dt [μ_k·x_k - (κ/2) x_kᵀΩx_k] - Σ_{k<M} (1/2dt)(x_{k+1}-x_k)ᵀΛ(x_{k+1}-x_k)
///
/// (trapezoid weights w, forward differences for ẋ) over x_1..x_M with x_0
/// pinned and a free endpoint. The stationarity conditions form a
/// (block-)tridiagonal system that is solved directly.

#include "optturn/errors.hpp"
#include "optturn/forecast_models.hpp"
#include "optturn/random.hpp"
#include "optturn/strategy_solver.hpp"

#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace optturn {

class DiscreteProblem {
public:
    /// `mu_path` has one column per grid point t_k = k·dt, k = 0..M.
    DiscreteProblem(MarketParams params, Matrix mu_path, double dt, Vector x0)
        : params_(std::move(params)), mu_path_(std::move(mu_path)), dt_(dt), x0_(std::move(x0)) {
        if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw InvalidParameter("dt must be > 0");
        if (mu_path_.cols() < 3) throw InvalidParameter("grid needs M >= 2 intervals");
        if (mu_path_.rows() != params_.dim() || x0_.size() != params_.dim()) {
            throw DimensionMismatch("forecast path or x0 does not match the market");
        }
        if (!mu_path_.allFinite() || !x0_.allFinite()) throw InvalidParameter("non-finite input");
    }

    /// Conditional-mean forecast path E₀μ_t = e^{-φt}μ₀ on [0, horizon].
    static DiscreteProblem from_forecast(const MarketParams& params, const OUForecast1D& forecast,
                                         double dt, double horizon, double x0) {
        const std::size_t m = grid_size(dt, horizon);
        Matrix mu(1, m + 1);
        for (std::size_t k = 0; k <= m; ++k) {
            mu(0, k) = conditional_mean(forecast, forecast.mu0(), static_cast<double>(k) * dt);
        }
        return DiscreteProblem(params, std::move(mu), dt, Vector::Constant(1, x0));
    }

    static DiscreteProblem from_forecast(const MarketParams& params, const OUForecastND& forecast,
                                         double dt, double horizon, const Vector& x0) {
        const std::size_t m = grid_size(dt, horizon);
        Matrix mu(forecast.dim(), m + 1);
        const Matrix step = (-forecast.phi() * dt).exp();
        mu.col(0) = forecast.mu0();
        for (std::size_t k = 1; k <= m; ++k) mu.col(k) = step * mu.col(k - 1);
        return DiscreteProblem(params, std::move(mu), dt, x0);
    }

    const MarketParams& params() const { return params_; }
    const Matrix& mu_path() const { return mu_path_; }
    double dt() const { return dt_; }
    const Vector& x0() const { return x0_; }
    Eigen::Index dim() const { return params_.dim(); }
    /// Number of intervals M.
    Eigen::Index intervals() const { return mu_path_.cols() - 1; }

private:
    static std::size_t grid_size(double dt, double horizon) {
        if (!(dt > 0.0) || !(horizon > 0.0)) throw InvalidParameter("dt and horizon must be > 0");
        return static_cast<std::size_t>(std::llround(horizon / dt));
    }

    MarketParams params_;
    Matrix mu_path_;
    double dt_;
    Vector x0_;
};

struct OracleSolution {
    Matrix x_path;
    double objective_value = 0.0;
    double kkt_residual = 0.0;
    double kkt_scale = 0.0;
};

/// Trapezoidal quadrature of μ·x - (κ/2)xᵀΩx plus the exact integral of
/// ½ẋᵀΛẋ for the piecewise-linear interpolant (forward differences).
inline double evaluate_objective(const Matrix& x_path, const DiscreteProblem& problem) {
    if (x_path.rows() != problem.dim() || x_path.cols() != problem.mu_path().cols()) {
        throw DimensionMismatch("path does not match the problem grid");
    }
    const double dt = problem.dt();
    const double kappa = problem.params().kappa();
    const Matrix& omega = problem.params().omega().matrix();
    const Matrix& lambda = problem.params().lambda().matrix();
    const Eigen::Index m = problem.intervals();
    double value = 0.0;
    for (Eigen::Index k = 0; k <= m; ++k) {
        const double w = (k == 0 || k == m) ? 0.5 : 1.0;
        const auto xk = x_path.col(k);
        value += w * dt * (problem.mu_path().col(k).dot(xk) - 0.5 * kappa * xk.dot(omega * xk));
    }
    for (Eigen::Index k = 0; k < m; ++k) {
        const Vector d = x_path.col(k + 1) - x_path.col(k);
        value -= 0.5 * d.dot(lambda * d) / dt;
    }
    return value;
}

namespace detail {

/// Gradient ∂J/∂x_k for k = 1..M (column k-1 of the result).
inline Matrix objective_gradient(const Matrix& x, const DiscreteProblem& p) {
    const double dt = p.dt();
    const double kappa = p.params().kappa();
    const Matrix& omega = p.params().omega().matrix();
    const Matrix& lambda = p.params().lambda().matrix();
    const Eigen::Index m = p.intervals();
    Matrix g(p.dim(), m);
    for (Eigen::Index k = 1; k < m; ++k) {
        g.col(k - 1) = dt * (p.mu_path().col(k) - kappa * omega * x.col(k)) +
                       lambda * (x.col(k + 1) - 2.0 * x.col(k) + x.col(k - 1)) / dt;
    }
    g.col(m - 1) = 0.5 * dt * (p.mu_path().col(m) - kappa * omega * x.col(m)) -
                   lambda * (x.col(m) - x.col(m - 1)) / dt;
    return g;
}

/// Thomas algorithm for sub/diag/sup with sub[0] and sup[n-1] unused.
inline std::vector<double> solve_tridiagonal(const std::vector<double>& sub,
                                             const std::vector<double>& diag,
                                             const std::vector<double>& sup,
                                             std::vector<double> rhs) {
    const std::size_t n = diag.size();
    std::vector<double> c(n);
    double denom = diag[0];
    if (denom == 0.0) throw SingularSystem("zero pivot in row 0");
    c[0] = sup[0] / denom;
    rhs[0] /= denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = diag[i] - sub[i] * c[i - 1];
        if (denom == 0.0 || !std::isfinite(denom)) {
            throw SingularSystem("zero pivot in row " + std::to_string(i));
        }
        c[i] = i + 1 < n ? sup[i] / denom : 0.0;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
    return rhs;
}

}  // namespace detail

inline OracleSolution solve_discrete(const DiscreteProblem& problem) {
    const double dt = problem.dt();
    const double kappa = problem.params().kappa();
    const Matrix& omega = problem.params().omega().matrix();
    const Matrix& lambda = problem.params().lambda().matrix();
    const Eigen::Index m = problem.intervals();
    const Eigen::Index n = problem.dim();
    const Matrix& mu = problem.mu_path();

    OracleSolution sol;
    sol.x_path.resize(n, m + 1);
    sol.x_path.col(0) = problem.x0();

    // Row k (unknown x_k): (Λ/dt) x_{k-1} + D_k x_k + (Λ/dt) x_{k+1} = r_k.
    const Matrix off = lambda / dt;
    const Matrix d_interior = -(2.0 * lambda / dt + dt * kappa * omega);
    const Matrix d_last = -(lambda / dt + 0.5 * dt * kappa * omega);
    auto rhs_at = [&](Eigen::Index k) -> Vector {
        Vector r = (k == m ? -0.5 * dt : -dt) * mu.col(k);
        if (k == 1) r -= off * problem.x0();
        return r;
    };

    if (n == 1) {
        const std::size_t rows = static_cast<std::size_t>(m);
        std::vector<double> sub(rows, off(0, 0)), sup(rows, off(0, 0)), diag(rows, d_interior(0, 0)),
            rhs(rows);
        diag[rows - 1] = d_last(0, 0);
        for (std::size_t i = 0; i < rows; ++i) rhs[i] = rhs_at(static_cast<Eigen::Index>(i) + 1)(0);
        const std::vector<double> x = detail::solve_tridiagonal(sub, diag, sup, std::move(rhs));
        for (std::size_t i = 0; i < rows; ++i) sol.x_path(0, static_cast<Eigen::Index>(i) + 1) = x[i];
    } else {
        // Block Thomas: C_k = P_k⁻¹ U, y_k = P_k⁻¹ (r_k - L y_{k-1}), P_k = D_k - L C_{k-1}.
        std::vector<Matrix> c(static_cast<std::size_t>(m));
        Matrix y(n, m);
        for (Eigen::Index k = 1; k <= m; ++k) {
            const std::size_t i = static_cast<std::size_t>(k - 1);
            Matrix pivot = (k == m ? d_last : d_interior);
            Vector r = rhs_at(k);
            if (k > 1) {
                pivot -= off * c[i - 1];
                r -= off * y.col(k - 2);
            }
            Eigen::PartialPivLU<Matrix> lu(pivot);
            if (!std::isfinite(lu.determinant()) || lu.determinant() == 0.0) {
                throw SingularSystem("singular pivot block at row " + std::to_string(k));
            }
            if (k < m) c[i] = lu.solve(off);
            y.col(k - 1) = lu.solve(r);
        }
        sol.x_path.col(m) = y.col(m - 1);
        for (Eigen::Index k = m - 1; k >= 1; --k) {
            sol.x_path.col(k) = y.col(k - 1) - c[static_cast<std::size_t>(k - 1)] * sol.x_path.col(k + 1);
        }
    }

    const Matrix grad = detail::objective_gradient(sol.x_path, problem);
    sol.kkt_residual = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
    const double coef = d_interior.cwiseAbs().maxCoeff() + 2.0 * off.cwiseAbs().maxCoeff();
    sol.kkt_scale = std::max(dt * mu.cwiseAbs().maxCoeff(), coef * sol.x_path.cwiseAbs().maxCoeff());
    if (!sol.x_path.allFinite()) throw SingularSystem("solution is not finite");
    sol.objective_value = evaluate_objective(sol.x_path, problem);
    return sol;
}

/// J(x + δ) - J(x) evaluated term by term, δ_0 = 0.
inline double objective_change(const Matrix& x, const Matrix& delta, const DiscreteProblem& p) {
    const double dt = p.dt();
    const double kappa = p.params().kappa();
    const Matrix& omega = p.params().omega().matrix();
    const Matrix& lambda = p.params().lambda().matrix();
    const Eigen::Index m = p.intervals();
    double change = 0.0;
    if (p.dim() == 1) {
        const double ko = kappa * omega(0, 0), l = lambda(0, 0);
        const double* mu = p.mu_path().data();
        const double* xs = x.data();
        const double* ds = delta.data();
        for (Eigen::Index k = 1; k <= m; ++k) {
            const double w = (k == m) ? 0.5 : 1.0;
            change += w * dt * (mu[k] * ds[k] - ko * xs[k] * ds[k] - 0.5 * ko * ds[k] * ds[k]);
            const double dx = xs[k] - xs[k - 1], dd = ds[k] - ds[k - 1];
            change -= (l * dx * dd + 0.5 * l * dd * dd) / dt;
        }
        return change;
    }
    for (Eigen::Index k = 1; k <= m; ++k) {
        const double w = (k == m) ? 0.5 : 1.0;
        const auto d = delta.col(k);
        change += w * dt *
                  (p.mu_path().col(k).dot(d) - kappa * x.col(k).dot(omega * d) -
                   0.5 * kappa * d.dot(omega * d));
    }
    for (Eigen::Index k = 0; k < m; ++k) {
        const Vector dx = x.col(k + 1) - x.col(k);
        const Vector dd = delta.col(k + 1) - delta.col(k);
        change -= (dx.dot(lambda * dd) + 0.5 * dd.dot(lambda * dd)) / dt;
    }
    return change;
}

/// Largest objective gain over `n_perturbations` random perturbations of
/// x_1..x_M, each scaled to max-norm `magnitude`. Non-positive at a maximum.
inline double perturbation_check(const OracleSolution& solution, const DiscreteProblem& problem,
                                 int n_perturbations, double magnitude, std::uint64_t seed) {
    if (n_perturbations < 1) return 0.0;
    const Eigen::Index n = problem.dim();
    const Eigen::Index m = problem.intervals();
    double best = -std::numeric_limits<double>::infinity();
    Matrix delta(n, m + 1);
    for (int t = 0; t < n_perturbations; ++t) {
        CounterStream rng(seed, static_cast<std::uint64_t>(t));
        boost::random::normal_distribution<double> normal;
        delta.col(0).setZero();
        for (Eigen::Index k = 1; k <= m; ++k) {
            for (Eigen::Index i = 0; i < n; ++i) delta(i, k) = normal(rng);
        }
        const double norm = delta.cwiseAbs().maxCoeff();
        if (norm > 0.0) delta *= magnitude / norm;
        best = std::max(best, objective_change(solution.x_path, delta, problem));
    }
    return best;
}

/// max_{t_k ≤ until} ‖a_k - b_k‖∞ / max_{t_k ≤ until} ‖b_k‖∞.
inline double max_relative_discrepancy(const Matrix& a, const Matrix& b, double dt, double until) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("paths differ in shape");
    const Eigen::Index last =
        std::min<Eigen::Index>(a.cols() - 1, static_cast<Eigen::Index>(std::floor(until / dt + 1e-9)));
    double err = 0.0, ref = 0.0;
    for (Eigen::Index k = 0; k <= last; ++k) {
        err = std::max(err, (a.col(k) - b.col(k)).cwiseAbs().maxCoeff());
        ref = std::max(ref, b.col(k).cwiseAbs().maxCoeff());
    }
    return ref > 0.0 ? err / ref : err;
}

struct OracleComparison {
    double dt = 0.0;
    double max_rel_error = 0.0;
    double oracle_objective = 0.0;
    double feedback_objective = 0.0;
    double kkt_residual = 0.0;
    double kkt_scale = 0.0;
};

/// Solves the discrete problem and integrates the feedback law along the same
/// deterministic forecast path, comparing the two on [0, window].
inline OracleComparison compare_with_feedback(const DiscreteProblem& problem, const FeedbackLaw& law,
                                              double window, OracleSolution* out = nullptr) {
    OracleSolution sol = solve_discrete(problem);
    const Matrix fb = feedback_trajectory(law, problem.mu_path(), problem.dt(), problem.x0());
    OracleComparison c;
    c.dt = problem.dt();
    c.max_rel_error = max_relative_discrepancy(sol.x_path, fb, problem.dt(), window);
    c.oracle_objective = sol.objective_value;
    c.feedback_objective = evaluate_objective(fb, problem);
    c.kkt_residual = sol.kkt_residual;
    c.kkt_scale = sol.kkt_scale;
    if (out) *out = std::move(sol);
    return c;
}

}  // namespace optturn
