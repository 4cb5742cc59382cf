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

/// \file forecast_models.hpp
/// Ornstein–Uhlenbeck alpha forecasts dμ = -Φ μ dt + L dW.
///
/// Sampling functions take the normal draws as arguments; no RNG state lives
/// here.

#include "optturn/errors.hpp"
#include "optturn/matrix_kernels.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

namespace optturn {

/// Scalar O-U forecast. Rates are per day.
class OUForecast1D {
public:
    OUForecast1D(double phi, double nu, double mu0 = 0.0) : phi_(phi), nu_(nu), mu0_(mu0) {
        if (!(phi > 0.0) || !std::isfinite(phi)) throw InvalidParameter("phi must be > 0");
        if (!(nu >= 0.0) || !std::isfinite(nu)) throw InvalidParameter("nu must be >= 0");
        if (!std::isfinite(mu0)) throw InvalidParameter("mu0 must be finite");
    }

    double phi() const { return phi_; }
    double nu() const { return nu_; }
    double mu0() const { return mu0_; }
    double half_life() const { return std::numbers::ln2 / phi_; }
    double stationary_variance() const { return nu_ * nu_ / (2.0 * phi_); }

private:
    double phi_;
    double nu_;
    double mu0_;
};

/// Multivariate O-U forecast; the loading is N×K (K noise factors).
class OUForecastND {
public:
    OUForecastND(Matrix phi, Matrix loading, Vector mu0)
        : phi_(std::move(phi)), loading_(std::move(loading)), mu0_(std::move(mu0)) {
        const auto n = phi_.rows();
        if (n == 0 || phi_.cols() != n || loading_.rows() != n || mu0_.size() != n) {
            throw DimensionMismatch("forecast matrices do not agree in dimension");
        }
        Eigen::EigenSolver<Matrix> es(phi_, false);
        if (es.info() != Eigen::Success || !(es.eigenvalues().real().minCoeff() > 0.0)) {
            throw InvalidParameter("mean-reversion matrix must have spectrum in the right half-plane");
        }
    }

    /// Loading defaults to the identity (K = N).
    OUForecastND(Matrix phi, Vector mu0)
        : OUForecastND(phi, Matrix::Identity(phi.rows(), phi.rows()), std::move(mu0)) {}

    explicit OUForecastND(const OUForecast1D& f)
        : OUForecastND(Matrix::Constant(1, 1, f.phi()), Matrix::Constant(1, 1, f.nu()),
                       Vector::Constant(1, f.mu0())) {}

    Eigen::Index dim() const { return phi_.rows(); }
    const Matrix& phi() const { return phi_; }
    const Matrix& loading() const { return loading_; }
    const Vector& mu0() const { return mu0_; }

private:
    Matrix phi_;
    Matrix loading_;
    Vector mu0_;
};

/// Abstract forcing with E_t a_s = e^{-θ (s - t)} a_t and stationary variance c0.
struct DecayForcing {
    double theta;
    double c0;

    DecayForcing(double theta_, double c0_) : theta(theta_), c0(c0_) {
        if (!(theta > 0.0)) throw InvalidParameter("theta must be > 0");
        if (!(c0 >= 0.0)) throw InvalidParameter("c0 must be >= 0");
    }
};

/// E_t μ_{t+h} = e^{-φ h} μ_t.
inline double conditional_mean(const OUForecast1D& model, double mu_t, double horizon) {
    if (!(horizon >= 0.0)) throw InvalidParameter("horizon must be >= 0");
    return std::exp(-model.phi() * horizon) * mu_t;
}

inline Vector conditional_mean(const OUForecastND& model, const Vector& mu_t, double horizon) {
    if (!(horizon >= 0.0)) throw InvalidParameter("horizon must be >= 0");
    if (mu_t.size() != model.dim()) throw DimensionMismatch("forecast vector has wrong size");
    const Matrix decay = (-model.phi() * horizon).exp();
    return decay * mu_t;
}

/// Variance of μ_{t+dt} given μ_t: ν²(1 - e^{-2φ dt}) / (2φ).
inline double transition_variance(const OUForecast1D& model, double dt) {
    return -model.nu() * model.nu() * std::expm1(-2.0 * model.phi() * dt) / (2.0 * model.phi());
}

/// Exact transition of the scalar process; `noise` is a standard normal draw.
inline double sample_step(const OUForecast1D& model, double mu_t, double dt, double noise) {
    if (!(dt > 0.0)) throw InvalidParameter("dt must be > 0");
    return std::exp(-model.phi() * dt) * mu_t + std::sqrt(transition_variance(model, dt)) * noise;
}

inline double stationary_variance(const OUForecast1D& model) { return model.stationary_variance(); }

/// Solves Φ V + V Φ^T = L L^T.
inline Matrix stationary_variance(const OUForecastND& model) {
    const Matrix q = model.loading() * model.loading().transpose();
    return solve_lyapunov(model.phi(), q);
}

namespace detail {

/// Symmetric square root of a PSD matrix, clamping round-off negatives.
inline Matrix psd_root(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
    Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// Precomputed exact one-step kernel μ' = A μ + B z for a fixed dt.
class OUTransitionND {
public:
    OUTransitionND(const OUForecastND& model, double dt) {
        if (!(dt > 0.0)) throw InvalidParameter("dt must be > 0");
        decay_ = (-model.phi() * dt).exp();
        stationary_ = stationary_variance(model);
        const Matrix q = stationary_ - decay_ * stationary_ * decay_.transpose();
        noise_ = detail::psd_root(q);
        stationary_root_ = detail::psd_root(stationary_);
    }

    const Matrix& decay() const { return decay_; }
    const Matrix& noise_factor() const { return noise_; }
    const Matrix& stationary() const { return stationary_; }
    /// Symmetric root of the stationary covariance, for stationary starts.
    const Matrix& stationary_factor() const { return stationary_root_; }

    Vector step(const Vector& mu, const Vector& noise) const { return decay_ * mu + noise_ * noise; }

private:
    Matrix decay_;
    Matrix noise_;
    Matrix stationary_;
    Matrix stationary_root_;
};

}  // namespace optturn
