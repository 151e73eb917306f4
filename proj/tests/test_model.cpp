#include <gtest/gtest.h>

#include <cmath>
#include <jmfbm/model.hpp>

#include "oracles.hpp"

using namespace jmfbm;

TEST(ModelParams, ValidationRejectsBadInputs) {
    ModelParams p{.r = 0.05, .sigma = 0.2, .hurst = 0.7};
    EXPECT_NO_THROW(p.validate());

    ModelParams bad = p;
    bad.hurst = 1.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = p;
    bad.k = -1.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = p;
    bad.lambda = -0.1;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = p;
    bad.sigma_j = -0.1;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(ModelParams, DerivedQuantities) {
    ModelParams p{.r = 0.1, .sigma = 0.2, .hurst = 0.6, .lambda = 0.5, .k = 0.25, .sigma_j = 0.3};
    EXPECT_DOUBLE_EQ(p.lambda_prime(), 0.625);
    EXPECT_DOUBLE_EQ(p.mu_j(), std::log1p(0.25) - 0.045);
    EXPECT_GE(p.lambda_prime(), 0.0);
}

TEST(ConditionalMoments, BothGaussianComponentsAtHalfHurst) {
    // lambda = 0, sigma_j = 0, n = 0, H = 1/2: variance = 2 sigma^2 T.
    ModelParams p{.r = 0.05, .sigma = 0.3, .hurst = 0.5};
    const auto m = conditional_moments(p, {0.0, 2.0}, 0);
    EXPECT_NEAR(m.variance, 2.0 * 0.09 * 2.0, 1e-15);
}

TEST(ConditionalMoments, DeterministicDrift) {
    ModelParams p{.r = 0.07, .q = 0.02, .sigma = 0.0, .hurst = 0.6, .lambda = 0.4, .k = 0.1};
    const auto m = conditional_moments(p, {0.5, 1.5}, 0);
    EXPECT_DOUBLE_EQ(m.variance, 0.0);
    EXPECT_NEAR(m.mean, (0.07 - 0.02 - 0.4 * 0.1) * 1.0, 1e-16);
}

TEST(ConditionalMoments, HighHurstReferenceValues) {
    // r=0.1, sigma=0.1, H=0.8, window [0,1], n=0: mean = 0.09, variance = 0.02.
    ModelParams p{.r = 0.1, .sigma = 0.1, .hurst = 0.8};
    const auto m = conditional_moments(p, {0.0, 1.0}, 0);
    EXPECT_NEAR(m.mean, 0.09, 1e-15);
    EXPECT_NEAR(m.variance, 0.02, 1e-15);
}

TEST(ConditionalMoments, MartingaleIdentityToMachinePrecision) {
    // mean(n) + variance(n)/2 = (r - q - lambda k) dt + n ln(1+k), exactly the
    // drift that makes each conditional term a discounted expectation.
    oracles::ParamFuzzer fuzz(20240811);
    for (int i = 0; i < 200; ++i) {
        const auto d = fuzz.next();
        ModelParams p{.r = d.r, .q = d.q, .sigma = d.sigma, .hurst = d.hurst,
                      .lambda = d.lambda, .k = d.k, .sigma_j = d.sigma_j};
        const int n = i % 7;
        const TimeWindow w{d.t0, d.t1};
        const auto m = conditional_moments(p, w, n);
        const double lhs = m.mean + 0.5 * m.variance;
        const double rhs = (d.r - d.q - d.lambda * d.k) * w.dt() + n * std::log1p(d.k);
        EXPECT_NEAR(lhs, rhs, 2e-14 * std::max(1.0, std::abs(rhs))) << "draw " << i;
    }
}

TEST(ConditionalMoments, VarianceMonotoneInJumpsAndHorizon) {
    ModelParams p{.r = 0.05, .sigma = 0.2, .hurst = 0.75, .lambda = 0.5, .k = 0.0, .sigma_j = 0.25};
    double prev = conditional_moments(p, {0.2, 1.0}, 0).variance;
    for (int n = 1; n <= 5; ++n) {
        const double v = conditional_moments(p, {0.2, 1.0}, n).variance;
        EXPECT_GT(v, prev);
        prev = v;
    }
    EXPECT_GT(conditional_moments(p, {0.2, 1.5}, 0).variance,
              conditional_moments(p, {0.2, 1.0}, 0).variance);
}

TEST(ConditionalMoments, RejectsInvalidWindowAndCount) {
    ModelParams p{.r = 0.05, .sigma = 0.2, .hurst = 0.5};
    EXPECT_THROW(conditional_moments(p, {1.0, 0.5}, 0), std::invalid_argument);
    EXPECT_THROW(conditional_moments(p, {0.0, 1.0}, -1), std::invalid_argument);
}

TEST(LogReturnCorrelation, BrownianNesting) {
    // sigma_j = 0, lambda = 0, H = 1/2: rho = sqrt(var(t0,t1)/var(t0,t2)).
    ModelParams p{.r = 0.02, .sigma = 0.4, .hurst = 0.5};
    EXPECT_NEAR(log_return_correlation(p, 0.0, 1.0, 4.0, 0, 0), 0.5, 1e-15);
}

TEST(LogReturnCorrelation, ApproachesOneAsWindowsMerge) {
    ModelParams p{.r = 0.02, .sigma = 0.4, .hurst = 0.7, .lambda = 0.3, .k = 0.1, .sigma_j = 0.2};
    const double rho = log_return_correlation(p, 0.0, 1.0, 1.0 + 1e-10, 2, 2);
    EXPECT_GT(rho, 1.0 - 1e-9);
    EXPECT_LE(rho, 1.0);
}

TEST(LogReturnCorrelation, HighHurstReferenceValue) {
    ModelParams p{.r = 0.1, .sigma = 0.1, .hurst = 0.8};
    const double expected = std::sqrt((0.01 * 0.5 + 0.01 * std::pow(0.5, 1.6)) / (0.01 + 0.01));
    EXPECT_NEAR(log_return_correlation(p, 0.0, 0.5, 1.0, 0, 0), expected, 1e-15);
}

TEST(LogReturnCorrelation, ScaleInvariantWithoutJumps) {
    for (double c : {0.5, 2.0, 7.0}) {
        ModelParams a{.r = 0.1, .sigma = 0.13, .hurst = 0.65};
        ModelParams b = a;
        b.sigma = a.sigma * c;
        EXPECT_NEAR(log_return_correlation(a, 0.1, 0.7, 1.9, 0, 0),
                    log_return_correlation(b, 0.1, 0.7, 1.9, 0, 0), 1e-14);
    }
}

TEST(LogReturnCorrelation, DeterministicModelIsAnError) {
    ModelParams p{.r = 0.1, .sigma = 0.0, .hurst = 0.5};
    EXPECT_THROW(log_return_correlation(p, 0.0, 0.5, 1.0, 0, 0), std::domain_error);
}

TEST(PoissonWeights, ZeroRateIsPointMass) {
    const auto w = poisson_weights(0.0);
    ASSERT_EQ(w.terms(), 1);
    EXPECT_DOUBLE_EQ(w.weight[0], 1.0);
    EXPECT_DOUBLE_EQ(w.shortfall, 0.0);
    EXPECT_FALSE(w.capped);
}

TEST(PoissonWeights, MatchesHighPrecisionFactorialRoute) {
    const auto w = poisson_weights(1.0, {.tail_tolerance = 1e-12});
    long double factorial = 1.0L;
    long double cum = 0.0L;
    for (int n = 0; n < w.terms(); ++n) {
        if (n > 0) factorial *= n;
        const long double expected = std::exp(-1.0L) / factorial;
        EXPECT_NEAR(w.weight[static_cast<std::size_t>(n)], (double)expected, 1e-17)
            << "term " << n;
        cum += expected;
    }
    EXPECT_GE((double)cum, 1.0 - 1e-12);
    EXPECT_LT(w.shortfall, 1e-12);
}

TEST(PoissonWeights, RecurrenceIdentityExact) {
    for (double rate : {0.1, 1.0, 5.0}) {
        const auto w = poisson_weights(rate, {.tail_tolerance = 1e-12});
        for (int n = 0; n + 1 < w.terms(); ++n) {
            const double expected =
                w.weight[static_cast<std::size_t>(n)] * rate / static_cast<double>(n + 1);
            EXPECT_EQ(w.weight[static_cast<std::size_t>(n + 1)], expected);
        }
        EXPECT_FALSE(w.capped);
        EXPECT_LT(w.shortfall, 1e-12);
        double sum = 0.0;
        for (double x : w.weight) {
            EXPECT_GE(x, 0.0);
            sum += x;
        }
        EXPECT_LE(sum, 1.0 + 1e-15);
    }
}

TEST(PoissonWeights, CapIsFlaggedNotFatal) {
    const auto w = poisson_weights(50.0, {.tail_tolerance = 1e-12, .max_terms = 10});
    EXPECT_TRUE(w.capped);
    EXPECT_EQ(w.terms(), 10);
    EXPECT_GT(w.shortfall, 0.5);
}
