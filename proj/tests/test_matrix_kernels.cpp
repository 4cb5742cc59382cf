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
#include "optturn/matrix_kernels.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace optturn;

namespace {

Matrix mat2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

double rel(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST(ValidatePd, AcceptsPositiveScalar) {
    const auto m = validate_pd(Matrix::Constant(1, 1, 4.0));
    EXPECT_EQ(m.dim(), 1);
    EXPECT_DOUBLE_EQ(m.eigenvalues()(0), 4.0);
}

TEST(ValidatePd, RejectsIndefinite) {
    try {
        validate_pd(mat2(1, 2, 2, 1));
        FAIL() << "expected NotPositiveDefinite";
    } catch (const NotPositiveDefinite& e) {
        EXPECT_NE(std::string(e.what()).find("-1"), std::string::npos) << e.what();
    }
}

TEST(ValidatePd, EigenvaluesOfTwoByTwo) {
    const auto m = validate_pd(mat2(2, 1, 1, 2));
    EXPECT_NEAR(m.eigenvalues()(0), 1.0, 1e-14);
    EXPECT_NEAR(m.eigenvalues()(1), 3.0, 1e-14);
}

TEST(ValidatePd, AsymmetryHandling) {
    EXPECT_THROW(validate_pd(mat2(2, 1, 0.5, 2)), NotSymmetric);
    const auto m = validate_pd(mat2(2, 1 + 1e-13, 1 - 1e-13, 2));
    EXPECT_EQ(m.matrix()(0, 1), m.matrix()(1, 0));
    EXPECT_NEAR(m.matrix()(0, 1), 1.0, 1e-15);
}

TEST(ValidatePd, ShapeAndSingularity) {
    EXPECT_THROW(validate_pd(Matrix::Ones(2, 3)), DimensionMismatch);
    EXPECT_THROW(validate_pd(Matrix(0, 0)), DimensionMismatch);
    EXPECT_THROW(validate_pd(mat2(1, 1, 1, 1)), NotPositiveDefinite);
    EXPECT_THROW(validate_pd(Matrix::Constant(1, 1, -1.0)), NotPositiveDefinite);
}

TEST(PdSqrt, IdentityAndDiagonal) {
    for (int n : {1, 3, 6}) {
        const Matrix s = pd_sqrt(validate_pd(Matrix::Identity(n, n))).matrix();
        EXPECT_LT((s - Matrix::Identity(n, n)).norm(), 1e-15);
    }
    const Matrix s = pd_sqrt(validate_pd(mat2(4, 0, 0, 9))).matrix();
    EXPECT_LT((s - mat2(2, 0, 0, 3)).norm(), 1e-15);
}

TEST(PdSqrt, SquareReproducesInput) {
    const Matrix a = mat2(2, 1, 1, 2);
    const Matrix s = pd_sqrt(validate_pd(a)).matrix();
    EXPECT_LT((s * s - a).cwiseAbs().maxCoeff(), 1e-12);
    // Hand eigendecomposition: (√3 + 1)/2 on the diagonal, (√3 - 1)/2 off it.
    EXPECT_NEAR(s(0, 0), (std::sqrt(3.0) + 1.0) / 2.0, 1e-14);
    EXPECT_NEAR(s(0, 1), (std::sqrt(3.0) - 1.0) / 2.0, 1e-14);
}

TEST(PdSqrt, IdempotenceProperty) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index n = 1 + trial % 8;
        const Matrix s = oracle::random_spd(rng, n);
        const Matrix r = pd_sqrt(validate_pd(s * s)).matrix();
        EXPECT_LT(rel(r, s), 1e-10) << "trial " << trial;
    }
}

TEST(RateMatrix, IdentityCase) {
    const auto i3 = validate_pd(Matrix::Identity(3, 3));
    const RateMatrix g = rate_matrix(1.0, i3, i3);
    EXPECT_LT((g.matrix() - Matrix::Identity(3, 3)).norm(), 1e-15);
}

TEST(RateMatrix, WorkedScalarExample) {
    const RateMatrix g = rate_matrix(1e-6, validate_pd(Matrix::Constant(1, 1, 1e-8)),
                                     validate_pd(Matrix::Constant(1, 1, 1e-4)));
    EXPECT_NEAR(g.matrix()(0, 0), 0.1, 1e-14);
}

TEST(RateMatrix, ScalarReductionMatchesClosedForm) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> lk(-8, -4), ll(-10, -6), ls(-3, -1);
    for (int i = 0; i < 100; ++i) {
        const double kappa = std::pow(10.0, lk(rng)), lambda = std::pow(10.0, ll(rng)),
                     sigma = std::pow(10.0, ls(rng));
        const RateMatrix g = rate_matrix(kappa, validate_pd(Matrix::Constant(1, 1, lambda)),
                                         validate_pd(Matrix::Constant(1, 1, sigma * sigma)));
        const double expected = std::sqrt(kappa * sigma * sigma / lambda);
        EXPECT_NEAR(g.matrix()(0, 0) / expected, 1.0, 1e-14);
    }
}

TEST(RateMatrix, ResidualOnRandomPairs) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
        const Matrix lambda = oracle::random_spd(rng, 3), omega = oracle::random_spd(rng, 3);
        const double kappa = 0.37;
        const RateMatrix g = rate_matrix(kappa, validate_pd(lambda), validate_pd(omega));
        EXPECT_LT(rel(lambda * g.matrix() * g.matrix(), kappa * omega), 1e-10);
        EXPECT_LT(g.residual(), 1e-10);
        EXPECT_GT(g.eigenvalues().minCoeff(), 0.0);
        EXPECT_LT(rel(g.inverse() * g.matrix(), Matrix::Identity(3, 3)), 1e-12);
    }
}

TEST(RateMatrix, ScalingProperty) {
    std::mt19937_64 rng(8);
    const auto lambda = validate_pd(oracle::random_spd(rng, 4));
    const auto omega = validate_pd(oracle::random_spd(rng, 4));
    for (double c : {0.1, 2.0, 7.5}) {
        const RateMatrix a = rate_matrix(c * c * 1.3, lambda, omega);
        const RateMatrix b = rate_matrix(1.3, lambda, omega);
        EXPECT_LT(rel(a.matrix(), c * b.matrix()), 1e-12);
    }
}

TEST(RateMatrix, DecayAndStepWeight) {
    std::mt19937_64 rng(9);
    const RateMatrix g = rate_matrix(0.5, validate_pd(oracle::random_spd(rng, 3)),
                                     validate_pd(oracle::random_spd(rng, 3)));
    const Matrix expm = (-g.matrix() * 0.7).exp();
    EXPECT_LT(rel(g.decay(0.7), expm), 1e-12);
    EXPECT_LT(rel(g.matrix() * g.step_weight(0.7), Matrix::Identity(3, 3) - expm), 1e-12);
}

TEST(RateMatrix, Errors) {
    const auto i2 = validate_pd(Matrix::Identity(2, 2));
    const auto i3 = validate_pd(Matrix::Identity(3, 3));
    EXPECT_THROW(rate_matrix(1.0, i2, i3), DimensionMismatch);
    EXPECT_THROW(rate_matrix(0.0, i2, i2), InvalidParameter);
    EXPECT_THROW(rate_matrix(-1.0, i2, i2), InvalidParameter);
}

TEST(Sylvester, ScalarCases) {
    EXPECT_NEAR(solve_sylvester(Matrix::Constant(1, 1, 2), Matrix::Constant(1, 1, 3),
                                Matrix::Constant(1, 1, 10))(0, 0),
                2.0, 1e-15);
    EXPECT_NEAR(solve_sylvester(Matrix::Constant(1, 1, 0.1), Matrix::Constant(1, 1, 0.2),
                                Matrix::Constant(1, 1, 1))(0, 0),
                10.0 / 3.0, 1e-14);
}

TEST(Sylvester, MatchesQuadratureOracle) {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 5; ++i) {
        const Matrix a = oracle::random_stable(rng, 3);
        const Matrix b = oracle::random_stable(rng, 3);
        Matrix c(3, 3);
        std::normal_distribution<double> normal;
        for (Eigen::Index k = 0; k < c.size(); ++k) c.data()[k] = normal(rng);
        const Matrix x = solve_sylvester(a, b, c);
        const Matrix q = oracle::sylvester_by_quadrature(a, b, c);
        EXPECT_LT((x - q).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, q.cwiseAbs().maxCoeff()));
    }
}

TEST(Sylvester, RandomResidualProperty) {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 300; ++trial) {
        const Eigen::Index n = 1 + trial % 8, m = 1 + (trial / 8) % 8;
        const Matrix a = oracle::random_stable(rng, n), b = oracle::random_stable(rng, m);
        Matrix c(n, m);
        for (Eigen::Index k = 0; k < c.size(); ++k) c.data()[k] = normal(rng);
        const Matrix x = solve_sylvester(a, b, c);
        EXPECT_LE(sylvester_residual(a, b, c, x), 1e-10) << "trial " << trial;
    }
}

TEST(Sylvester, RejectsNonConvergentSpectra) {
    EXPECT_THROW(solve_sylvester(Matrix::Constant(1, 1, -1), Matrix::Constant(1, 1, 3),
                                 Matrix::Constant(1, 1, 1)),
                 SingularSystem);
    EXPECT_THROW(solve_sylvester(mat2(1, 0, 0, 1), mat2(0, 1, -1, 0), mat2(1, 0, 0, 1)),
                 SingularSystem);
    EXPECT_THROW(solve_sylvester(Matrix::Identity(2, 2), Matrix::Identity(3, 3), Matrix::Ones(2, 2)),
                 DimensionMismatch);
}

TEST(Lyapunov, DiagonalCase) {
    const Matrix v = solve_lyapunov(mat2(0.5, 0, 0, 2.0), mat2(1, 0, 0, 4));
    EXPECT_NEAR(v(0, 0), 1.0, 1e-14);
    EXPECT_NEAR(v(1, 1), 1.0, 1e-14);
    EXPECT_NEAR(v(0, 1), 0.0, 1e-15);
}
