#include <gtest/gtest.h>

#include <cmath>
#include <jmfbm/mc.hpp>

#include "oracles.hpp"

using namespace jmfbm;

TEST(GaussianCov, DiagonalAndSymmetry) {
    ModelParams p{.r = 0.05, .sigma = 0.3, .hurst = 0.7};
    const std::vector<double> dates = {0.5, 1.0, 2.0};
    const GaussianCov cov = make_gaussian_cov(p, dates);
    const double s2 = 0.09;
    for (int i = 0; i < 3; ++i) {
        const double t = dates[static_cast<std::size_t>(i)];
        EXPECT_NEAR(cov.at(i, i), s2 * t + s2 * std::pow(t, 1.4), 1e-14);
    }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(cov.at(i, j), cov.at(j, i));

    // H = 1/2 collapses the fractional kernel onto Brownian covariance.
    ModelParams bm = p;
    bm.hurst = 0.5;
    const GaussianCov c2 = make_gaussian_cov(bm, dates);
    EXPECT_NEAR(c2.at(0, 2), 2.0 * s2 * 0.5, 1e-14);

    EXPECT_THROW(make_gaussian_cov(p, std::vector<double>{1.0, 0.5}), std::invalid_argument);
}

TEST(SimulateTerminalValues, DeterministicDriftWithoutRandomness) {
    ModelParams p{.r = 0.07, .q = 0.02, .sigma = 0.0, .hurst = 0.6};
    const std::vector<double> dates = {0.5, 1.5};
    const TerminalPaths paths = simulate_terminal_values(p, 80.0, dates, {.paths = 16, .seed = 1});
    for (std::int64_t i = 0; i < paths.paths; ++i)
        for (int d = 0; d < 2; ++d)
            EXPECT_NEAR(paths.at(i, d),
                        80.0 * std::exp((p.r - p.q) * dates[static_cast<std::size_t>(d)]),
                        1e-12 * 80.0);
}

TEST(SimulateTerminalValues, LogReturnVarianceMatchesModel) {
    ModelParams p{.r = 0.05, .sigma = 0.2, .hurst = 0.8};
    const double t = 1.0;
    const std::int64_t n = 200000;
    const TerminalPaths paths = simulate_terminal_values(p, 100.0, std::vector<double>{t},
                                                         {.paths = n, .seed = 7});
    double sum = 0.0, sum_sq = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double x = std::log(paths.at(i, 0) / 100.0);
        sum += x;
        sum_sq += x * x;
    }
    const double mean = sum / n;
    const double var = (sum_sq - n * mean * mean) / (n - 1);
    const double want = 0.04 * t + 0.04 * std::pow(t, 1.6);
    const double se = want * std::sqrt(2.0 / (n - 1.0));
    EXPECT_NEAR(var, want, 3.0 * se);
}

TEST(SimulateTerminalValues, RiskNeutralDriftWithJumps) {
    // E[S_t] e^{-(r-q)t} = s0: checks the jump compensation end to end.
    ModelParams p{.r = 0.08, .q = 0.02, .sigma = 0.25, .hurst = 0.75, .lambda = 0.8, .k = -0.15,
                  .sigma_j = 0.3};
    const double t = 1.25, s0 = 50.0;
    const std::int64_t n = 400000;
    const TerminalPaths paths =
        simulate_terminal_values(p, s0, std::vector<double>{t}, {.paths = n, .seed = 99});
    double sum = 0.0, sum_sq = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double v = paths.at(i, 0) * std::exp(-(p.r - p.q) * t);
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq - n * mean * mean) / (n - 1.0) / n);
    EXPECT_NEAR(mean, s0, 3.0 * se);
}

TEST(SimulateTerminalValues, CovarianceFidelity) {
    ModelParams p{.r = 0.0, .sigma = 0.3, .hurst = 0.8};
    const std::vector<double> dates = {0.5, 1.0};
    const GaussianCov cov = make_gaussian_cov(p, dates);
    const std::int64_t n = 200000;
    const TerminalPaths paths = simulate_terminal_values(p, 1.0, dates, {.paths = n, .seed = 17});

    // lambda = 0: log S / s0 minus the deterministic drift is the Gaussian
    // component itself.
    const auto drift = [&](double t) {
        return -0.5 * 0.09 * t - 0.5 * 0.09 * std::pow(t, 1.6);
    };
    double s11 = 0, s22 = 0, s12 = 0, m1 = 0, m2 = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double g1 = std::log(paths.at(i, 0)) - drift(0.5);
        const double g2 = std::log(paths.at(i, 1)) - drift(1.0);
        m1 += g1;
        m2 += g2;
        s11 += g1 * g1;
        s22 += g2 * g2;
        s12 += g1 * g2;
    }
    m1 /= n;
    m2 /= n;
    const double c11 = s11 / n - m1 * m1;
    const double c22 = s22 / n - m2 * m2;
    const double c12 = s12 / n - m1 * m2;
    EXPECT_NEAR(c11, cov.at(0, 0), 3.0 * cov.at(0, 0) * std::sqrt(2.0 / n));
    EXPECT_NEAR(c22, cov.at(1, 1), 3.0 * cov.at(1, 1) * std::sqrt(2.0 / n));
    const double se12 = std::sqrt((cov.at(0, 0) * cov.at(1, 1) + cov.at(0, 1) * cov.at(0, 1)) / n);
    EXPECT_NEAR(c12, cov.at(0, 1), 3.0 * se12);
}

TEST(LogReturnCorrelation, MonteCarloValidation) {
    // The nested-interval convention is exact for the increment-independent
    // bookkeeping the pricers use; simulate that law directly.
    ModelParams p{.r = 0.1, .sigma = 0.1, .hurst = 0.8};
    const double t1 = 0.5, t2 = 1.0;
    const double rho = log_return_correlation(p, 0.0, t1, t2, 0, 0);

    const double v1 = conditional_moments(p, {0.0, t1}, 0).variance;
    const double v2 = conditional_moments(p, {0.0, t2}, 0).variance;
    std::mt19937_64 gen(123);
    std::normal_distribution<double> nd;
    const int n = 400000;
    double s11 = 0, s22 = 0, s12 = 0;
    for (int i = 0; i < n; ++i) {
        const double x1 = std::sqrt(v1) * nd(gen);
        const double x2 = x1 + std::sqrt(v2 - v1) * nd(gen);
        s11 += x1 * x1;
        s22 += x2 * x2;
        s12 += x1 * x2;
    }
    const double sample_rho = s12 / std::sqrt(s11 * s22);
    const double se = (1.0 - rho * rho) / std::sqrt(static_cast<double>(n));
    EXPECT_NEAR(sample_rho, rho, 3.0 * se);

    // At H = 1/2 the convention coincides with the true joint law, so the
    // full simulator reproduces it too.
    ModelParams bm = p;
    bm.hurst = 0.5;
    const double rho_bm = log_return_correlation(bm, 0.0, t1, t2, 0, 0);
    const TerminalPaths paths = simulate_terminal_values(
        bm, 1.0, std::vector<double>{t1, t2}, {.paths = 200000, .seed = 31});
    double u11 = 0, u22 = 0, u12 = 0, mu1 = 0, mu2 = 0;
    for (std::int64_t i = 0; i < paths.paths; ++i) {
        const double x1 = std::log(paths.at(i, 0));
        const double x2 = std::log(paths.at(i, 1));
        mu1 += x1;
        mu2 += x2;
        u11 += x1 * x1;
        u22 += x2 * x2;
        u12 += x1 * x2;
    }
    mu1 /= paths.paths;
    mu2 /= paths.paths;
    const double c11 = u11 / paths.paths - mu1 * mu1;
    const double c22 = u22 / paths.paths - mu2 * mu2;
    const double c12 = u12 / paths.paths - mu1 * mu2;
    const double se_bm = (1.0 - rho_bm * rho_bm) / std::sqrt(static_cast<double>(paths.paths));
    EXPECT_NEAR(c12 / std::sqrt(c11 * c22), rho_bm, 3.0 * se_bm);
}

TEST(McVanilla, BlackScholesAgreement) {
    ModelParams p{.r = 0.05, .sigma = 0.2, .hurst = 0.5};
    const VanillaCallSpec spec{100.0, {0.0, 1.0}};
    const double bs = oracles::bs_call(100.0, 100.0, 0.05, 0.0, 1.0, 2.0 * 0.04);
    const McEstimate est = mc_vanilla_price(p, 100.0, spec, {.paths = 200000, .seed = 11});
    EXPECT_LE(std::abs(est.mean - bs) / est.std_error, 3.0);
}

TEST(McVanilla, SeedDeterminismAndSensitivity) {
    ModelParams p{.r = 0.05, .sigma = 0.25, .hurst = 0.7, .lambda = 0.5, .k = 0.1, .sigma_j = 0.2};
    const VanillaCallSpec spec{95.0, {0.0, 1.0}};
    const McConfig cfg{.paths = 20000, .seed = 123};
    const McEstimate a = mc_vanilla_price(p, 100.0, spec, cfg);
    const McEstimate b = mc_vanilla_price(p, 100.0, spec, cfg);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.std_error, b.std_error);
    EXPECT_EQ(a.paths, 20000);

    const McEstimate c = mc_vanilla_price(p, 100.0, spec, {.paths = 20000, .seed = 124});
    EXPECT_NE(a.mean, c.mean);

    // Batch size only regroups the fixed-order sums.
    const McEstimate d = mc_vanilla_price(p, 100.0, spec, {.paths = 20000, .seed = 123, .batch = 977});
    EXPECT_NEAR(d.mean, a.mean, 1e-12 * std::max(1.0, std::abs(a.mean)));
}

TEST(McVanilla, StandardErrorScaling) {
    ModelParams p{.r = 0.05, .sigma = 0.25, .hurst = 0.65, .lambda = 0.3, .k = 0.05, .sigma_j = 0.25};
    const VanillaCallSpec spec{100.0, {0.0, 1.0}};
    const McEstimate small = mc_vanilla_price(p, 100.0, spec, {.paths = 50000, .seed = 5});
    const McEstimate big = mc_vanilla_price(p, 100.0, spec, {.paths = 200000, .seed = 5});
    const double ratio = big.std_error / small.std_error;
    EXPECT_NEAR(ratio, 0.5, 0.1); // quadrupling paths halves the error, within 20%
}

TEST(McVanilla, AntitheticSamplingIsUnbiasedAndTighter) {
    ModelParams p{.r = 0.05, .sigma = 0.2, .hurst = 0.5};
    const VanillaCallSpec spec{100.0, {0.0, 1.0}};
    const double bs = oracles::bs_call(100.0, 100.0, 0.05, 0.0, 1.0, 2.0 * 0.04);
    const McEstimate anti =
        mc_vanilla_price(p, 100.0, spec, {.paths = 100000, .seed = 3, .antithetic = true});
    EXPECT_LE(std::abs(anti.mean - bs) / anti.std_error, 3.0);
    const McEstimate plain = mc_vanilla_price(p, 100.0, spec, {.paths = 100000, .seed = 3});
    EXPECT_LT(anti.std_error, 1.2 * plain.std_error);
    EXPECT_THROW(mc_vanilla_price(p, 100.0, spec, {.paths = 999, .antithetic = true}),
                 std::invalid_argument);
}

TEST(McCompound, ZeroOuterStrikeMatchesVanillaEstimate) {
    ModelParams p{.r = 0.05, .sigma = 0.2, .hurst = 0.75, .lambda = 0.4, .k = 0.05, .sigma_j = 0.25};
    const CompoundCallSpec spec{0.0, 0.5, 100.0, 1.0, 0.0};
    const McEstimate comp = mc_compound_price(p, 100.0, spec, {.paths = 100000, .seed = 21});
    const McEstimate van =
        mc_vanilla_price(p, 100.0, {100.0, {0.0, 1.0}}, {.paths = 100000, .seed = 22});
    const double se = std::sqrt(comp.std_error * comp.std_error + van.std_error * van.std_error);
    EXPECT_LE(std::abs(comp.mean - van.mean) / se, 3.0);
}

TEST(McExtendible, NeverExtendReducesToVanilla) {
    // L = M = K1 empties the extension corridor regardless of the premium.
    ModelParams p{.r = 0.05, .sigma = 0.2, .hurst = 0.7, .lambda = 0.3, .k = 0.0, .sigma_j = 0.2};
    ExtendibleCallSpec spec{100.0, 0.5, 105.0, 1.0, 50.0, 0.0,
                            std::make_pair(100.0, 100.0)};
    const McEstimate ext = mc_extendible_price(p, 100.0, spec, {.paths = 100000, .seed = 41});
    const McEstimate van =
        mc_vanilla_price(p, 100.0, {100.0, {0.0, 0.5}}, {.paths = 100000, .seed = 42});
    const double se = std::sqrt(ext.std_error * ext.std_error + van.std_error * van.std_error);
    EXPECT_LE(std::abs(ext.mean - van.mean) / se, 3.0);

    const double analytic = extendible_call_price(p, 100.0, spec).value;
    EXPECT_LE(std::abs(ext.mean - analytic) / ext.std_error, 3.0);
}

TEST(McEstimators, DegenerateModelHasZeroError) {
    ModelParams p{.r = 0.05, .q = 0.01, .sigma = 0.0, .hurst = 0.5};
    const VanillaCallSpec spec{9.0, {0.0, 1.0}};
    const McEstimate est = mc_vanilla_price(p, 10.0, spec, {.paths = 1000, .seed = 1});
    EXPECT_DOUBLE_EQ(est.std_error, 0.0);
    const double want = std::exp(-0.05) * (10.0 * std::exp(0.04) - 9.0);
    EXPECT_NEAR(est.mean, want, 1e-13 * want);
}
