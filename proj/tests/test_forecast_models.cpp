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
#include "optturn/forecast_models.hpp"
#include "optturn/random.hpp"

#include <boost/random/normal_distribution.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace optturn;

TEST(OUForecast, InvariantsAndAccessors) {
    const OUForecast1D f(0.2, 0.1, 1.0);
    EXPECT_DOUBLE_EQ(f.half_life(), std::numbers::ln2 / 0.2);
    EXPECT_NEAR(f.stationary_variance(), 0.025, 1e-16);
    EXPECT_EQ(OUForecast1D(0.2, 0.0).stationary_variance(), 0.0);
    EXPECT_THROW(OUForecast1D(0.0, 0.1), InvalidParameter);
    EXPECT_THROW(OUForecast1D(-1.0, 0.1), InvalidParameter);
    EXPECT_THROW(OUForecast1D(0.2, -0.1), InvalidParameter);
    EXPECT_THROW(DecayForcing(0.0, 1.0), InvalidParameter);
    EXPECT_THROW(DecayForcing(1.0, -1.0), InvalidParameter);
}

TEST(ConditionalMean, ScalarExamples) {
    const OUForecast1D f(0.2, 0.1);
    EXPECT_EQ(conditional_mean(f, 1.0, 0.0), 1.0);
    EXPECT_NEAR(conditional_mean(f, 1.0, std::log(2.0) / 0.2), 0.5, 1e-15);
    EXPECT_THROW(conditional_mean(f, 1.0, -1.0), InvalidParameter);
}

TEST(ConditionalMean, DiagonalMatrix) {
    Matrix phi = Matrix::Zero(2, 2);
    phi.diagonal() << 0.1, 0.2;
    const OUForecastND f(phi, Vector::Ones(2));
    const Vector m = conditional_mean(f, Vector::Ones(2), 10.0);
    EXPECT_NEAR(m(0), std::exp(-1.0), 1e-15);
    EXPECT_NEAR(m(1), std::exp(-2.0), 1e-15);
}

TEST(ConditionalMean, MarkovConsistency) {
    const OUForecast1D f(0.3, 0.1);
    for (double h1 : {0.1, 1.0, 5.0}) {
        for (double h2 : {0.2, 3.0}) {
            EXPECT_NEAR(conditional_mean(f, conditional_mean(f, 0.7, h1), h2),
                        conditional_mean(f, 0.7, h1 + h2), 1e-15);
        }
    }
    Matrix phi(2, 2);
    phi << 0.3, 0.1, -0.2, 0.5;
    const OUForecastND g(phi, Vector::Zero(2));
    const Vector mu = (Vector(2) << 1.0, -2.0).finished();
    const Vector two = conditional_mean(g, conditional_mean(g, mu, 1.5), 2.5);
    EXPECT_LT((two - conditional_mean(g, mu, 4.0)).norm(), 1e-14);
}

TEST(SampleStep, NoiselessDecay) {
    const OUForecast1D f(std::log(2.0), 0.0);
    EXPECT_NEAR(sample_step(f, 1.0, 1.0, 2.3), 0.5, 1e-15);
    EXPECT_THROW(sample_step(f, 1.0, 0.0, 0.0), InvalidParameter);
}

TEST(SampleStep, LargePhiVarianceLimit) {
    const OUForecast1D f(1e4, 0.1);
    EXPECT_NEAR(transition_variance(f, 1.0) / f.stationary_variance(), 1.0, 1e-15);
}

TEST(SampleStep, TwoStepsEqualOneDoubleStepInVariance) {
    for (double phi : {0.05, 0.2, 3.0}) {
        const OUForecast1D f(phi, 0.13);
        for (double dt : {1e-3, 0.1, 2.0}) {
            const double a = std::exp(-phi * dt);
            const double two = a * a * transition_variance(f, dt) + transition_variance(f, dt);
            EXPECT_NEAR(two / transition_variance(f, 2.0 * dt), 1.0, 1e-14);
        }
    }
}

TEST(SampleStep, StationaryVarianceIsPreserved) {
    // 10^6 stationary starts, one step each; SE of the variance from the spread of μ².
    const OUForecast1D f(0.2, 0.1);
    CounterStream rng(2024, 0);
    boost::random::normal_distribution<double> normal;
    const double sd = std::sqrt(f.stationary_variance());
    const int n = 1'000'000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double mu = sample_step(f, sd * normal(rng), 0.7, normal(rng));
        s += mu * mu;
        s2 += mu * mu * mu * mu;
    }
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_LT(std::abs(mean - 0.025), 3.0 * se) << mean << " +/- " << se;
}

TEST(SampleStep, ExponentialDecayLaw) {
    const OUForecast1D f(0.2, 0.1);
    const double mu_t = 0.3;
    for (double h : {0.1 / 0.2, 1.0 / 0.2, 10.0 / 0.2}) {
        CounterStream rng(77, static_cast<std::uint64_t>(h * 100));
        boost::random::normal_distribution<double> normal;
        const int n = 100'000;
        double s = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double v = sample_step(f, mu_t, h, normal(rng));
            s += v;
            s2 += v * v;
        }
        const double mean = s / n;
        const double se = std::sqrt((s2 / n - mean * mean) / n);
        EXPECT_LT(std::abs(mean - conditional_mean(f, mu_t, h)), 4.0 * se) << "h=" << h;
    }
}

TEST(StationaryVariance, Examples) {
    EXPECT_NEAR(stationary_variance(OUForecast1D(0.2, 0.1)), 0.025, 1e-16);
    EXPECT_EQ(stationary_variance(OUForecast1D(0.2, 0.0)), 0.0);
    Matrix phi = Matrix::Zero(2, 2), l = Matrix::Zero(2, 2);
    phi.diagonal() << 0.4, 1.5;
    l.diagonal() << 0.3, 0.7;
    const Matrix v = stationary_variance(OUForecastND(phi, l, Vector::Zero(2)));
    EXPECT_NEAR(v(0, 0), 0.09 / 0.8, 1e-15);
    EXPECT_NEAR(v(1, 1), 0.49 / 3.0, 1e-15);
    EXPECT_NEAR(v(0, 1), 0.0, 1e-16);
}

TEST(OUForecastND, Validation) {
    Matrix unstable(2, 2);
    unstable << 0.1, 0.0, 0.0, -0.1;
    EXPECT_THROW(OUForecastND(unstable, Vector::Zero(2)), InvalidParameter);
    EXPECT_THROW(OUForecastND(Matrix::Identity(2, 2), Vector::Zero(3)), DimensionMismatch);
    const OUForecastND one(OUForecast1D(0.2, 0.1, 0.5));
    EXPECT_EQ(one.dim(), 1);
    EXPECT_EQ(one.loading()(0, 0), 0.1);
}

TEST(OUTransitionND, MatchesScalarKernelAndConditionalMean) {
    const OUForecast1D f(0.2, 0.1);
    const OUTransitionND t(OUForecastND(f), 0.5);
    EXPECT_NEAR(t.decay()(0, 0), std::exp(-0.1), 1e-15);
    EXPECT_NEAR(t.noise_factor()(0, 0), std::sqrt(transition_variance(f, 0.5)), 1e-15);

    // Coupled 2D: ensemble mean after one step equals e^{-Φh}μ within 4 SE.
    Matrix phi(2, 2), l(2, 2);
    phi << 0.5, 0.2, -0.1, 0.3;
    l << 0.2, 0.0, 0.1, 0.3;
    const OUForecastND g(phi, l, Vector::Zero(2));
    const OUTransitionND tg(g, 2.0);
    const Vector mu = (Vector(2) << 1.0, -0.5).finished();
    CounterStream rng(5, 5);
    boost::random::normal_distribution<double> normal;
    const int n = 100'000;
    Vector s = Vector::Zero(2), s2 = Vector::Zero(2), z(2);
    for (int i = 0; i < n; ++i) {
        z << normal(rng), normal(rng);
        const Vector v = tg.step(mu, z);
        s += v;
        s2 += v.cwiseProduct(v);
    }
    const Vector mean = s / n;
    const Vector se = ((s2 / n - mean.cwiseProduct(mean)) / n).cwiseSqrt();
    const Vector expected = conditional_mean(g, mu, 2.0);
    for (int i = 0; i < 2; ++i) EXPECT_LT(std::abs(mean(i) - expected(i)), 4.0 * se(i));

    // Transition covariance plus decayed stationary covariance is stationary.
    const Matrix q = tg.noise_factor() * tg.noise_factor().transpose();
    const Matrix back = tg.decay() * tg.stationary() * tg.decay().transpose() + q;
    EXPECT_LT((back - tg.stationary()).norm(), 1e-14);
}
