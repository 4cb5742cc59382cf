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

/// \file strategy_solver.hpp
/// Optimal feedback law ẋ = -Γ x + b_t for the mean-quadratic-variation
/// objective with linear impact, and the closed-form steady-state quantities
/// of the single-asset O-U case.
///
/// Units: every rate is per day, positions are in currency, σ is the daily
/// return volatility and λ is in currency·day per currency² so that λẋ² has
/// the same currency/day units as μx.

#include "optturn/errors.hpp"
#include "optturn/forecast_models.hpp"
#include "optturn/matrix_kernels.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace optturn {

enum class TimeUnit { day };

class MarketParams {
public:
    MarketParams(double kappa, SymmetricPDMatrix lambda, SymmetricPDMatrix omega)
        : kappa_(kappa), lambda_(std::move(lambda)), omega_(std::move(omega)) {
        if (!(kappa_ > 0.0) || !std::isfinite(kappa_)) throw InvalidParameter("kappa must be > 0");
        if (lambda_.dim() != omega_.dim()) {
            throw DimensionMismatch("impact and covariance dimensions differ");
        }
    }

    MarketParams(double kappa, const Matrix& lambda, const Matrix& omega)
        : MarketParams(kappa, validate_pd(lambda), validate_pd(omega)) {}

    /// Single asset: impact λ and daily volatility σ.
    static MarketParams scalar(double kappa, double lambda, double sigma) {
        if (!(sigma > 0.0)) throw InvalidParameter("sigma must be > 0");
        return MarketParams(kappa, Matrix::Constant(1, 1, lambda),
                            Matrix::Constant(1, 1, sigma * sigma));
    }

    double kappa() const { return kappa_; }
    const SymmetricPDMatrix& lambda() const { return lambda_; }
    const SymmetricPDMatrix& omega() const { return omega_; }
    Eigen::Index dim() const { return lambda_.dim(); }
    bool is_scalar() const { return dim() == 1; }
    TimeUnit time_unit() const { return TimeUnit::day; }

    double lambda_scalar() const {
        require_scalar();
        return lambda_.matrix()(0, 0);
    }
    double sigma2_scalar() const {
        require_scalar();
        return omega_.matrix()(0, 0);
    }
    double sigma_scalar() const { return std::sqrt(sigma2_scalar()); }

private:
    void require_scalar() const {
        if (!is_scalar()) throw DimensionMismatch("scalar accessor on a multi-asset market");
    }

    double kappa_;
    SymmetricPDMatrix lambda_;
    SymmetricPDMatrix omega_;
};

/// The solved strategy: rate matrix Γ and the static forcing map μ_t ↦ b_t.
class FeedbackLaw {
public:
    FeedbackLaw(RateMatrix gamma, Matrix forcing)
        : gamma_(std::move(gamma)), forcing_(std::move(forcing)) {
        if (forcing_.rows() != gamma_.dim()) throw DimensionMismatch("forcing map rows");
        aim_map_ = gamma_.inverse() * forcing_;
    }

    const RateMatrix& gamma() const { return gamma_; }
    const Matrix& forcing_map() const { return forcing_; }
    /// Γ⁻¹ X, mapping a forecast to the aim portfolio.
    const Matrix& aim_map() const { return aim_map_; }
    Eigen::Index dim() const { return gamma_.dim(); }

    double gamma_scalar() const {
        require_scalar();
        return gamma_.matrix()(0, 0);
    }
    double forcing_scalar() const {
        require_scalar();
        return forcing_(0, 0);
    }

    Vector forcing(const Vector& mu) const {
        if (mu.size() != forcing_.cols()) throw DimensionMismatch("forecast vector size");
        return forcing_ * mu;
    }

private:
    void require_scalar() const {
        if (dim() != 1 || forcing_.cols() != 1) throw DimensionMismatch("scalar accessor on ND law");
    }

    RateMatrix gamma_;
    Matrix forcing_;
    Matrix aim_map_;
};

/// Multi-asset law: X solves Γ X + X Φ = Λ⁻¹ so that b_t = X μ_t.
inline FeedbackLaw solve_feedback(const MarketParams& params, const OUForecastND& forecast) {
    if (forecast.dim() != params.dim()) throw DimensionMismatch("forecast and market dimensions");
    RateMatrix gamma = rate_matrix(params.kappa(), params.lambda(), params.omega());
    Matrix x = solve_sylvester(gamma, forecast.phi(), params.lambda().inverse());
    return FeedbackLaw(std::move(gamma), std::move(x));
}

/// Single-asset law: m_t = μ_t / (λ (γ + φ)).
inline FeedbackLaw solve_feedback(const MarketParams& params, const OUForecast1D& forecast) {
    if (!params.is_scalar()) throw DimensionMismatch("scalar forecast on a multi-asset market");
    RateMatrix gamma = rate_matrix(params.kappa(), params.lambda(), params.omega());
    const double g = gamma.matrix()(0, 0);
    const double coeff = 1.0 / (params.lambda_scalar() * (g + forecast.phi()));
    return FeedbackLaw(std::move(gamma), Matrix::Constant(1, 1, coeff));
}

/// ẋ = -Γ x + b(μ).
inline Vector drift(const FeedbackLaw& law, const Vector& x, const Vector& mu) {
    if (x.size() != law.dim()) throw DimensionMismatch("position vector size");
    return -law.gamma().matrix() * x + law.forcing(mu);
}

inline double drift(const FeedbackLaw& law, double x, double mu) {
    return -law.gamma_scalar() * x + law.forcing_scalar() * mu;
}

/// Γ⁻¹ b(μ): the position at which the drift vanishes.
inline Vector aim_portfolio(const FeedbackLaw& law, const Vector& mu) {
    if (mu.size() != law.aim_map().cols()) throw DimensionMismatch("forecast vector size");
    return law.aim_map() * mu;
}

inline double aim_portfolio(const FeedbackLaw& law, double mu) {
    return law.aim_map()(0, 0) * mu;
}

// Closed forms for the scalar O-U case.

inline double gamma_closed_form(double kappa, double lambda, double sigma) {
    return std::sqrt(kappa * sigma * sigma / lambda);
}

/// γ √(φ/γ + 1).
inline double optimal_turnover(double gamma, double phi) {
    return gamma * std::sqrt(phi / gamma + 1.0);
}

/// The same turnover expressed through the market primitives.
inline double optimal_turnover_explicit(double kappa, double lambda, double sigma, double phi) {
    return std::sqrt(sigma * (phi * std::sqrt(kappa * lambda) + kappa * sigma) / lambda);
}

/// (ν / 2σ) √(γ / (2φ (φ + 2γ))).
inline double information_ratio_closed_form(double gamma, double phi, double nu, double sigma) {
    return nu / (2.0 * sigma) * std::sqrt(gamma / (2.0 * phi * (phi + 2.0 * gamma)));
}

/// IR scaled by √N; only meaningful for statistically independent assets.
inline double portfolio_ir(double ir_single, long n_assets) {
    if (n_assets < 1) throw InvalidParameter("n_assets must be >= 1");
    return ir_single * std::sqrt(static_cast<double>(n_assets));
}

struct SteadyStateReport {
    double gamma = 0.0;
    double phi = 0.0;
    double theta = 0.0;  ///< decay rate of the forcing used by the closed forms, γ + φ
    double c0 = 0.0;     ///< stationary variance of m
    double h_bar = 0.0;
    double g_bar = 0.0;
    double v_bar = 0.0;
    double turnover = 0.0;  ///< √(θγ); defined even for a noiseless forecast
    double pnl_rate_gross = 0.0;
    double pnl_rate_net = 0.0;
    std::optional<double> ir;
    bool degenerate = false;  ///< ν = 0: moment ratios are 0/0

    /// √(v̄ / ḡ); equals `turnover` whenever the forecast is not degenerate.
    double turnover_from_moments() const {
        if (degenerate) throw DegenerateForecast("moment ratio v/g is 0/0 for nu = 0");
        return std::sqrt(v_bar / g_bar);
    }
    double information_ratio() const {
        if (degenerate || !ir) throw DegenerateForecast("information ratio undefined for nu = 0");
        return *ir;
    }
};

inline SteadyStateReport steady_state(const MarketParams& params, const OUForecast1D& forecast) {
    if (!params.is_scalar()) throw DimensionMismatch("steady-state closed forms are single-asset");
    const double lambda = params.lambda_scalar();
    const double sigma = params.sigma_scalar();
    SteadyStateReport r;
    r.gamma = rate_matrix(params.kappa(), params.lambda(), params.omega()).matrix()(0, 0);
    r.phi = forecast.phi();
    r.theta = r.gamma + r.phi;
    r.turnover = std::sqrt(r.theta * r.gamma);

    const double scale = lambda * (r.gamma + r.phi);
    r.c0 = forecast.stationary_variance() / (scale * scale);
    r.h_bar = r.c0 / (r.theta + r.gamma);
    r.g_bar = r.h_bar / r.gamma;
    r.v_bar = r.theta * r.h_bar;
    r.pnl_rate_gross = scale * r.h_bar;
    r.pnl_rate_net = r.pnl_rate_gross - 0.5 * lambda * r.v_bar;

    r.degenerate = forecast.nu() == 0.0;
    if (!r.degenerate) {
        r.ir = information_ratio_closed_form(r.gamma, r.phi, forecast.nu(), sigma);
    }
    return r;
}

/// Integrates the feedback ODE along a deterministic forecast path with the
/// exponential integrator x_{k+1} = e^{-Γdt} x_k + Γ⁻¹(I - e^{-Γdt}) b(μ_k).
///
/// `mu_path` holds one column per grid point; the result has the same shape.
inline Matrix feedback_trajectory(const FeedbackLaw& law, const Matrix& mu_path, double dt,
                                  const Vector& x0) {
    if (!(dt > 0.0)) throw InvalidParameter("dt must be > 0");
    if (x0.size() != law.dim() || mu_path.rows() != law.forcing_map().cols()) {
        throw DimensionMismatch("trajectory inputs do not match the law");
    }
    const Matrix decay = law.gamma().decay(dt);
    const Matrix weight = law.gamma().step_weight(dt) * law.forcing_map();
    Matrix x(law.dim(), mu_path.cols());
    x.col(0) = x0;
    for (Eigen::Index k = 0; k + 1 < mu_path.cols(); ++k) {
        x.col(k + 1) = decay * x.col(k) + weight * mu_path.col(k);
    }
    return x;
}

}  // namespace optturn
