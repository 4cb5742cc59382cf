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

/// \file matrix_kernels.hpp
/// Dense symmetric positive-definite linear algebra used by the solver:
/// validation, principal square roots, the rate matrix and Sylvester solves.

#include "optturn/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <string>

namespace optturn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kEigenTol = 1e-12;
inline constexpr double kResidualTol = 1e-10;

namespace detail {

inline std::string describe_dims(const Matrix& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

inline double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// ||residual||_F / ||reference||_F, with 0/0 treated as 0.
inline double relative_residual(const Matrix& residual, const Matrix& reference) {
    const double ref = reference.norm();
    const double res = residual.norm();
    if (ref == 0.0) return res;
    return res / ref;
}

}  // namespace detail

/// A symmetric positive-definite matrix together with its eigendecomposition.
///
/// Instances are only produced by validate_pd() (or by the kernels below,
/// which construct them from a known decomposition), so holding one is proof
/// that the positivity test passed.
class SymmetricPDMatrix {
public:
    Eigen::Index dim() const { return matrix_.rows(); }
    const Matrix& matrix() const { return matrix_; }
    /// Ascending eigenvalues.
    const Vector& eigenvalues() const { return eigenvalues_; }
    const Matrix& eigenvectors() const { return eigenvectors_; }

    /// V f(D) V^T for a scalar function f applied to the spectrum.
    template <class F>
    Matrix spectral_apply(F&& f) const {
        Vector d = eigenvalues_.unaryExpr(std::forward<F>(f));
        return eigenvectors_ * d.asDiagonal() * eigenvectors_.transpose();
    }

    Matrix inverse() const {
        return spectral_apply([](double v) { return 1.0 / v; });
    }
    Matrix inverse_sqrt() const {
        return spectral_apply([](double v) { return 1.0 / std::sqrt(v); });
    }

    friend SymmetricPDMatrix validate_pd(const Matrix& matrix, double tol, double eig_tol);
    friend SymmetricPDMatrix pd_sqrt(const SymmetricPDMatrix& matrix);

private:
    SymmetricPDMatrix(Matrix m, Vector evals, Matrix evecs)
        : matrix_(std::move(m)), eigenvalues_(std::move(evals)), eigenvectors_(std::move(evecs)) {}

    Matrix matrix_;
    Vector eigenvalues_;
    Matrix eigenvectors_;
};

/// Checks symmetry and positive definiteness and returns the validated
/// wrapper. Asymmetry up to `tol` (max |A_ij - A_ji| / (1 + max |A|)) is
/// removed by averaging with the transpose.
inline SymmetricPDMatrix validate_pd(const Matrix& matrix, double tol = kSymmetryTol,
                                     double eig_tol = kEigenTol) {
    if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
        throw DimensionMismatch("expected a non-empty square matrix, got " +
                                detail::describe_dims(matrix));
    }
    if (!matrix.allFinite()) throw NotPositiveDefinite("matrix has non-finite entries");

    const Eigen::Index n = matrix.rows();
    const double scale = 1.0 + detail::max_abs(matrix);
    double worst = 0.0;
    Eigen::Index wi = 0, wj = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double a = std::abs(matrix(i, j) - matrix(j, i)) / scale;
            if (a > worst) {
                worst = a;
                wi = i;
                wj = j;
            }
        }
    }
    if (worst > tol) {
        std::ostringstream os;
        os << "relative asymmetry " << worst << " at (" << wi << ", " << wj << ") exceeds " << tol;
        throw NotSymmetric(os.str());
    }

    Matrix sym = 0.5 * (matrix + matrix.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    if (es.info() != Eigen::Success) throw NotPositiveDefinite("eigendecomposition failed");
    const Vector& ev = es.eigenvalues();
    const double largest = ev(n - 1);
    const double floor = static_cast<double>(n) * eig_tol * largest;
    if (!(largest > 0.0) || !(ev(0) > floor)) {
        std::ostringstream os;
        os << "eigenvalue #0 = " << ev(0) << " (largest " << largest << ") is not above "
           << floor;
        throw NotPositiveDefinite(os.str());
    }
    return SymmetricPDMatrix(std::move(sym), ev, es.eigenvectors());
}

/// Unique symmetric positive-definite square root, eigenvalue-wise.
inline SymmetricPDMatrix pd_sqrt(const SymmetricPDMatrix& matrix) {
    Vector root = matrix.eigenvalues().cwiseSqrt();
    const Matrix& v = matrix.eigenvectors();
    Matrix s = v * root.asDiagonal() * v.transpose();
    s = 0.5 * (s + s.transpose());
    return SymmetricPDMatrix(std::move(s), std::move(root), v);
}

/// Γ = (κ Λ⁻¹ Ω)^{1/2}, evaluated through a similarity transform of the
/// symmetric matrix κ Λ^{-1/2} Ω Λ^{-1/2}. Γ has the real positive spectrum
/// of that symmetric root.
class RateMatrix {
public:
    Eigen::Index dim() const { return gamma_.rows(); }
    const Matrix& matrix() const { return gamma_; }
    /// Ascending real eigenvalues, all strictly positive.
    const Vector& eigenvalues() const { return root_.eigenvalues(); }
    /// Γ⁻¹ = Λ^{-1/2} S⁻¹ Λ^{1/2}.
    Matrix inverse() const { return lambda_inv_sqrt_ * root_.inverse() * lambda_sqrt_; }
    /// e^{-Γ h} = Λ^{-1/2} e^{-S h} Λ^{1/2}.
    Matrix decay(double h) const {
        return lambda_inv_sqrt_ * root_.spectral_apply([h](double v) { return std::exp(-v * h); }) *
               lambda_sqrt_;
    }
    /// Γ⁻¹ (I - e^{-Γ h}), the exact weight of a constant forcing over a step of length h.
    Matrix step_weight(double h) const {
        return lambda_inv_sqrt_ *
               root_.spectral_apply([h](double v) { return -std::expm1(-v * h) / v; }) *
               lambda_sqrt_;
    }
    /// ||Γ² - κΛ⁻¹Ω|| / ||κΛ⁻¹Ω|| recorded at construction.
    double residual() const { return residual_; }

    friend RateMatrix rate_matrix(double kappa, const SymmetricPDMatrix& lambda,
                                  const SymmetricPDMatrix& omega);

private:
    RateMatrix(Matrix gamma, SymmetricPDMatrix root, Matrix lis, Matrix ls, double residual)
        : gamma_(std::move(gamma)), root_(std::move(root)), lambda_inv_sqrt_(std::move(lis)),
          lambda_sqrt_(std::move(ls)), residual_(residual) {}

    Matrix gamma_;
    SymmetricPDMatrix root_;
    Matrix lambda_inv_sqrt_;
    Matrix lambda_sqrt_;
    double residual_;
};

inline RateMatrix rate_matrix(double kappa, const SymmetricPDMatrix& lambda,
                              const SymmetricPDMatrix& omega) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
        throw InvalidParameter("risk aversion must be positive and finite");
    }
    if (lambda.dim() != omega.dim()) {
        throw DimensionMismatch("impact is " + detail::describe_dims(lambda.matrix()) +
                                " but covariance is " + detail::describe_dims(omega.matrix()));
    }
    const Matrix lis = lambda.inverse_sqrt();
    const Matrix ls = pd_sqrt(lambda).matrix();
    const Matrix inner = kappa * lis * omega.matrix() * lis;
    SymmetricPDMatrix root = pd_sqrt(validate_pd(0.5 * (inner + inner.transpose()), 1e-9));
    Matrix gamma = lis * root.matrix() * ls;

    const Matrix target = kappa * lambda.inverse() * omega.matrix();
    const double residual = detail::relative_residual(gamma * gamma - target, target);
    return RateMatrix(std::move(gamma), std::move(root), lis, ls, residual);
}

/// Solves a X + X b = c by Bartels–Stewart on complex Schur forms.
///
/// Both spectra must lie in the open right half-plane; then X is also the
/// convergent integral ∫₀^∞ e^{-a u} c e^{-b u} du.
inline Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& c) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || c.rows() != a.rows() ||
        c.cols() != b.rows()) {
        throw DimensionMismatch("a " + detail::describe_dims(a) + ", b " +
                                detail::describe_dims(b) + ", c " + detail::describe_dims(c));
    }
    using CMatrix = Eigen::MatrixXcd;
    using Complex = std::complex<double>;

    Eigen::ComplexSchur<Matrix> sa(a), sb(b);
    if (sa.info() != Eigen::Success || sb.info() != Eigen::Success) {
        throw SingularSystem("Schur decomposition did not converge");
    }
    const CMatrix& ta = sa.matrixT();
    const CMatrix& tb = sb.matrixT();
    for (Eigen::Index i = 0; i < ta.rows(); ++i) {
        if (!(ta(i, i).real() > 0.0)) {
            std::ostringstream os;
            os << "eigenvalue " << ta(i, i) << " of the left operand is not in the right half-plane";
            throw SingularSystem(os.str());
        }
    }
    for (Eigen::Index j = 0; j < tb.rows(); ++j) {
        if (!(tb(j, j).real() > 0.0)) {
            std::ostringstream os;
            os << "eigenvalue " << tb(j, j) << " of the right operand is not in the right half-plane";
            throw SingularSystem(os.str());
        }
    }

    // T_a Y + Y T_b = U_a^* c U_b, solved column by column (T_b upper triangular).
    const CMatrix f = sa.matrixU().adjoint() * c.cast<Complex>() * sb.matrixU();
    const Eigen::Index n = ta.rows();
    CMatrix y(n, tb.rows());
    for (Eigen::Index j = 0; j < tb.rows(); ++j) {
        Eigen::VectorXcd rhs = f.col(j);
        if (j > 0) rhs -= y.leftCols(j) * tb.col(j).head(j);
        CMatrix shifted = ta;
        shifted.diagonal().array() += tb(j, j);
        y.col(j) = shifted.triangularView<Eigen::Upper>().solve(rhs);
    }
    Matrix x = (sa.matrixU() * y * sb.matrixU().adjoint()).real();
    return x;
}

inline Matrix solve_sylvester(const RateMatrix& a, const Matrix& b, const Matrix& c) {
    return solve_sylvester(a.matrix(), b, c);
}

/// ||a X + X b - c|| / ||c||.
inline double sylvester_residual(const Matrix& a, const Matrix& b, const Matrix& c,
                                 const Matrix& x) {
    return detail::relative_residual(a * x + x * b - c, c);
}

/// Symmetric solution of a V + V a^T = q.
inline Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
    Matrix v = solve_sylvester(a, a.transpose(), q);
    return 0.5 * (v + v.transpose());
}

}  // namespace optturn
