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
#include "optturn/variational_oracle.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <vector>

using namespace optturn;

namespace {

const MarketParams kMarket = MarketParams::scalar(1e-6, 1e-8, 0.01);
const OUForecast1D kForecast(0.2, 0.1, 1e-4);

DiscreteProblem example_problem(double dt, double horizon = 100.0) {
    return DiscreteProblem::from_forecast(kMarket, kForecast, dt, horizon, 0.0);
}

/// Maximizer of the quadratic J recovered from objective values alone:
/// J(x) = J(0) + gᵀx - ½xᵀHx over the free coordinates, solved densely.
Matrix dense_maximizer(const DiscreteProblem& p) {
    const Eigen::Index n = p.dim(), m = p.intervals(), free = n * m;
    auto embed = [&](const Vector& v) {
        Matrix x(n, m + 1);
        x.col(0) = p.x0();
        for (Eigen::Index k = 0; k < m; ++k) x.col(k + 1) = v.segment(k * n, n);
        return x;
    };
    auto j = [&](const Vector& v) { return evaluate_objective(embed(v), p); };
    const double j0 = j(Vector::Zero(free));
    Vector jp(free), jm(free);
    for (Eigen::Index i = 0; i < free; ++i) {
        jp(i) = j(Vector::Unit(free, i));
        jm(i) = j(-Vector::Unit(free, i));
    }
    Matrix h(free, free);
    Vector g(free);
    for (Eigen::Index i = 0; i < free; ++i) {
        g(i) = 0.5 * (jp(i) - jm(i));
        h(i, i) = 2.0 * j0 - jp(i) - jm(i);
    }
    for (Eigen::Index i = 0; i < free; ++i) {
        for (Eigen::Index k = i + 1; k < free; ++k) {
            const double jij = j(Vector::Unit(free, i) + Vector::Unit(free, k));
            h(i, k) = h(k, i) = -(jij - j0 - g(i) - g(k)) - 0.5 * (h(i, i) + h(k, k));
        }
    }
    return embed(h.ldlt().solve(g));
}

}  // namespace

TEST(SolveDiscrete, NullProblem) {
    const DiscreteProblem p(kMarket, Matrix::Zero(1, 101), 0.1, Vector::Zero(1));
    const OracleSolution s = solve_discrete(p);
    EXPECT_EQ(s.x_path.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(s.objective_value, 0.0);
}

TEST(SolveDiscrete, MatchesDenseQuadraticMaximizer) {
    // O(1) units keep the polarization identities well conditioned.
    const MarketParams unit = MarketParams::scalar(0.5, 2.0, 1.0);
    Matrix mu(1, 21);
    for (Eigen::Index k = 0; k <= 20; ++k) mu(0, k) = std::cos(0.3 * k);
    const DiscreteProblem p(unit, mu, 0.25, Vector::Constant(1, 0.7));
    const Matrix dense = dense_maximizer(p);
    EXPECT_LT((solve_discrete(p).x_path - dense).cwiseAbs().maxCoeff(), 1e-9);

    std::mt19937_64 rng(4);
    const MarketParams two(0.5, oracle::random_spd(rng, 2), oracle::random_spd(rng, 2));
    Matrix mu2(2, 11);
    for (Eigen::Index k = 0; k <= 10; ++k) mu2.col(k) << std::sin(0.4 * k), 1.0 - 0.1 * k;
    const DiscreteProblem p2(two, mu2, 0.3, (Vector(2) << 0.2, -0.4).finished());
    EXPECT_LT((solve_discrete(p2).x_path - dense_maximizer(p2)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SolveDiscrete, KktResidualIsSmall) {
    const OracleSolution s = solve_discrete(example_problem(1e-3));
    EXPECT_LE(s.kkt_residual, 1e-9 * s.kkt_scale);
}

TEST(SolveDiscrete, HomogeneousDecayConverges) {
    // μ ≡ 0, x0 = 1: error against e^{-γt} on [0, 50] is bounded by C·dt.
    double prev = 0.0;
    for (double dt : {0.02, 0.01, 0.005}) {
        const auto m = static_cast<Eigen::Index>(std::lround(200.0 / dt));
        const DiscreteProblem p(kMarket, Matrix::Zero(1, m + 1), dt, Vector::Ones(1));
        const OracleSolution s = solve_discrete(p);
        double err = 0.0;
        for (Eigen::Index k = 0; k * dt <= 50.0; ++k) {
            err = std::max(err, std::abs(s.x_path(0, k) - std::exp(-0.1 * k * dt)));
        }
        EXPECT_LE(err, 0.1 * dt);
        // The centred difference makes the observed order two.
        if (prev > 0.0) {
            EXPECT_NEAR(prev / err, 4.0, 0.3);
        }
        prev = err;
    }
}

TEST(SolveDiscrete, ExampleMatchesFeedbackLaw) {
    const FeedbackLaw law = solve_feedback(kMarket, kForecast);
    const OracleComparison c1 = compare_with_feedback(example_problem(1e-3), law, 50.0);
    const OracleComparison c2 = compare_with_feedback(example_problem(5e-4), law, 50.0);
    EXPECT_LE(c1.max_rel_error, 0.01);
    const double ratio = c1.max_rel_error / c2.max_rel_error;
    EXPECT_GE(ratio, 1.7);
    EXPECT_LE(ratio, 2.3);
    EXPECT_GE(c1.oracle_objective, c1.feedback_objective);
}

TEST(SolveDiscrete, OptimalityGapVanishes) {
    // The gap converges at second order to a floor set by the finite horizon
    // (the infinite-horizon law is not optimal near a free endpoint).
    const FeedbackLaw law = solve_feedback(kMarket, kForecast);
    std::vector<double> gaps;
    double objective = 0.0;
    for (double dt : {8e-3, 4e-3, 2e-3, 1e-3}) {
        const OracleComparison c = compare_with_feedback(example_problem(dt), law, 50.0);
        gaps.push_back(c.oracle_objective - c.feedback_objective);
        objective = c.oracle_objective;
        EXPECT_GE(gaps.back(), 0.0);
    }
    for (std::size_t i = 2; i < gaps.size(); ++i) {
        EXPECT_NEAR((gaps[i - 2] - gaps[i - 1]) / (gaps[i - 1] - gaps[i]), 4.0, 0.3);
    }
    const double floor = gaps.back() - (gaps[2] - gaps[3]) / 3.0;
    EXPECT_LT(floor, 1e-7 * std::abs(objective));
}

TEST(SolveDiscrete, HorizonTruncationIsNegligible) {
    const Matrix short_run = solve_discrete(example_problem(1e-2, 100.0)).x_path;
    const Matrix long_run = solve_discrete(example_problem(1e-2, 200.0)).x_path;
    const Eigen::Index n = short_run.cols();
    EXPECT_LT(max_relative_discrepancy(short_run, long_run.leftCols(n), 1e-2, 50.0), 1e-3);
}

TEST(SolveDiscrete, IsotropicBlockSystemDecouples) {
    const Matrix i = Matrix::Identity(2, 2);
    const MarketParams p(1e-6, Matrix(1e-8 * i), Matrix(1e-4 * i));
    const Vector mu0 = (Vector(2) << 1e-4, -3e-4).finished();
    const Vector x0 = (Vector(2) << 0.0, 2e4).finished();
    const OUForecastND f(Matrix(0.2 * i), Matrix(0.1 * i), mu0);
    const OracleSolution block = solve_discrete(DiscreteProblem::from_forecast(p, f, 1e-2, 50.0, x0));
    for (int a = 0; a < 2; ++a) {
        const OUForecast1D fa(0.2, 0.1, mu0(a));
        const OracleSolution s = solve_discrete(DiscreteProblem::from_forecast(kMarket, fa, 1e-2, 50.0, x0(a)));
        const double scale = s.x_path.cwiseAbs().maxCoeff();
        EXPECT_LT((block.x_path.row(a) - s.x_path).cwiseAbs().maxCoeff(), 1e-10 * scale);
    }
}

TEST(SolveDiscrete, Validation) {
    EXPECT_THROW(DiscreteProblem(kMarket, Matrix::Zero(1, 2), 0.1, Vector::Zero(1)), InvalidParameter);
    EXPECT_THROW(DiscreteProblem(kMarket, Matrix::Zero(1, 5), 0.0, Vector::Zero(1)), InvalidParameter);
    EXPECT_THROW(DiscreteProblem(kMarket, Matrix::Zero(2, 5), 0.1, Vector::Zero(1)), DimensionMismatch);
    const DiscreteProblem p(kMarket, Matrix::Zero(1, 5), 0.1, Vector::Zero(1));
    EXPECT_THROW(evaluate_objective(Matrix::Zero(1, 4), p), DimensionMismatch);
}

TEST(EvaluateObjective, Examples) {
    const DiscreteProblem p(kMarket, Matrix::Zero(1, 1001), 0.01, Vector::Zero(1));
    EXPECT_EQ(evaluate_objective(Matrix::Zero(1, 1001), p), 0.0);
    const double c = 3e4;
    EXPECT_NEAR(evaluate_objective(Matrix::Constant(1, 1001, c), p) / (-0.5 * 1e-6 * 1e-4 * c * c * 10.0), 1.0,
                1e-12);
}

TEST(EvaluateObjective, StrictlyConcave) {
    const DiscreteProblem p = example_problem(0.1, 20.0);
    std::mt19937_64 rng(12);
    std::normal_distribution<double> normal(0.0, 1e5);
    for (int t = 0; t < 50; ++t) {
        Matrix a(1, p.intervals() + 1), b(1, p.intervals() + 1);
        for (Eigen::Index k = 0; k < a.cols(); ++k) {
            a(0, k) = normal(rng);
            b(0, k) = normal(rng);
        }
        const double mid = evaluate_objective(0.5 * (a + b), p);
        EXPECT_GT(mid, 0.5 * (evaluate_objective(a, p) + evaluate_objective(b, p)));
    }
}

TEST(PerturbationCheck, Examples) {
    const DiscreteProblem p = example_problem(1e-3);
    const OracleSolution s = solve_discrete(p);
    EXPECT_EQ(perturbation_check(s, p, 10, 0.0, 1), 0.0);
    const double mag = 1e-3 * s.x_path.cwiseAbs().maxCoeff();
    EXPECT_LE(perturbation_check(s, p, 1000, mag, 2), 1e-12 * std::abs(s.objective_value));

    const DiscreteProblem null(kMarket, Matrix::Zero(1, 201), 0.05, Vector::Zero(1));
    EXPECT_LT(perturbation_check(solve_discrete(null), null, 50, 1.0, 3), 0.0);
}

TEST(PerturbationCheck, ChangeMatchesDirectDifference) {
    const DiscreteProblem p = example_problem(0.05, 10.0);
    const OracleSolution s = solve_discrete(p);
    Matrix delta = Matrix::Zero(1, p.intervals() + 1);
    for (Eigen::Index k = 1; k < delta.cols(); ++k) delta(0, k) = 1e3 * std::sin(0.7 * k);
    const Matrix moved = s.x_path + delta;
    EXPECT_NEAR(objective_change(s.x_path, delta, p), evaluate_objective(moved, p) - s.objective_value,
                1e-9 * std::abs(s.objective_value));
}
