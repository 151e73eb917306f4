// Randomized property suite over >= 100 deterministic parameter draws:
// price bounds, monotonicities, Poisson-mixture consistency, correlation
// range, and reproducibility, exercised across all pricers at once.

#include <gtest/gtest.h>

#include <cmath>
#include <jmfbm/jmfbm.hpp>

#include "oracles.hpp"

using namespace jmfbm;

namespace {

ModelParams params_of(const oracles::ParamDraw& d) {
    return {.r = d.r, .q = d.q, .sigma = d.sigma, .hurst = d.hurst, .lambda = d.lambda,
            .k = d.k, .sigma_j = d.sigma_j};
}

} // namespace

TEST(PropertySuite, VanillaBoundsMonotonicityAndMixture) {
    oracles::ParamFuzzer fuzz(1001);
    for (int i = 0; i < 120; ++i) {
        const auto d = fuzz.next();
        const ModelParams p = params_of(d);
        const VanillaCallSpec spec{d.strike, {d.t0, d.t1}};
        const double dt = spec.window.dt();
        const auto res = call_price(p, d.s0, spec);

        EXPECT_GE(res.value, std::max(0.0, d.s0 * std::exp(-d.q * dt) -
                                               d.strike * std::exp(-d.r * dt)) -
                                 1e-10 * d.s0)
            << "draw " << i;
        EXPECT_LE(res.value, d.s0 * std::exp(-d.q * dt) + 1e-12 * d.s0) << "draw " << i;
        EXPECT_LT(res.tail_shortfall, 1e-12);
        EXPECT_FALSE(res.flags & price_flags::series_capped);

        EXPECT_LE(call_price(p, d.s0, {d.strike * 1.07, spec.window}).value, res.value + 1e-12);
        EXPECT_GE(call_price(p, d.s0 * 1.07, spec).value, res.value - 1e-12);

        // Mixture consistency at 1e-14 relative.
        const auto w = poisson_weights(p.lambda_prime() * dt, SeriesControl{});
        const double base_var = conditional_moments(p, spec.window, 0).variance;
        double mix = 0.0;
        for (int n = 0; n < w.terms(); ++n) {
            const double var = base_var + n * d.sigma_j * d.sigma_j;
            const double rn = d.r - d.lambda * d.k + n * std::log1p(d.k) / dt;
            mix += w.weight[static_cast<std::size_t>(n)] *
                   oracles::bs_call(d.s0, d.strike, rn, d.q, dt, var);
        }
        EXPECT_NEAR(res.value, mix, 1e-14 * std::max(1.0, mix)) << "draw " << i;
    }
}

TEST(PropertySuite, CompoundDominatedByInnerCall) {
    oracles::ParamFuzzer fuzz(2002);
    for (int i = 0; i < 110; ++i) {
        const auto d = fuzz.next();
        const ModelParams p = params_of(d);
        const CompoundCallSpec spec{0.1 * d.strike, d.t1, d.strike, d.t2, d.t0};
        const double compound = compound_call_price(p, d.s0, spec).value;
        const double vanilla = call_price(p, d.s0, {d.strike, {d.t0, d.t2}}).value;
        EXPECT_GE(compound, 0.0) << "draw " << i;
        EXPECT_LE(compound, vanilla + 1e-9 * std::max(1.0, vanilla)) << "draw " << i;
    }
}

TEST(PropertySuite, CorrelationAlwaysInUnitInterval) {
    oracles::ParamFuzzer fuzz(3003);
    for (int i = 0; i < 150; ++i) {
        const auto d = fuzz.next();
        const ModelParams p = params_of(d);
        const int n1 = i % 4;
        const int m = n1 + (i % 3);
        const double rho = log_return_correlation(p, d.t0, d.t1, d.t2, n1, m);
        EXPECT_GT(rho, 0.0) << "draw " << i;
        EXPECT_LE(rho, 1.0) << "draw " << i;
    }
}

TEST(PropertySuite, PricersAreDeterministic) {
    oracles::ParamFuzzer fuzz(4004);
    for (int i = 0; i < 25; ++i) {
        const auto d = fuzz.next();
        const ModelParams p = params_of(d);
        const VanillaCallSpec vs{d.strike, {d.t0, d.t1}};
        EXPECT_EQ(call_price(p, d.s0, vs).value, call_price(p, d.s0, vs).value);
        const CompoundCallSpec cs{0.1 * d.strike, d.t1, d.strike, d.t2, d.t0};
        EXPECT_EQ(compound_call_price(p, d.s0, cs).value, compound_call_price(p, d.s0, cs).value);
    }
}

TEST(PropertySuite, ExtendiblePremiumMonotoneWithResolvedLevels) {
    oracles::ParamFuzzer fuzz(5005);
    int checked = 0;
    for (int i = 0; i < 200 && checked < 100; ++i) {
        const auto d = fuzz.next();
        const ModelParams p = params_of(d);
        const double a_low = 0.005 * d.strike;
        ExtendibleCallSpec lo{d.strike, d.t1, d.strike * 1.02, d.t2, a_low, d.t0, std::nullopt};
        ExtendibleCallSpec hi = lo;
        hi.premium = a_low * 2.0;
        try {
            const double v_lo = extendible_call_price(p, d.s0, lo).value;
            const double v_hi = extendible_call_price(p, d.s0, hi).value;
            EXPECT_LE(v_hi, v_lo + 1e-9 * std::max(1.0, v_lo)) << "draw " << i;
            ++checked;
        } catch (const NoExtensionRegion&) {
            continue;
        }
    }
    EXPECT_GE(checked, 100);
}
