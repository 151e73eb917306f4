#pragma once

// Call-on-call pricing.  The critical spot S1* solves C(S1*, K, T1, T2) = K1;
// the price is a double Poisson series over the jump counts (n1, n2) of the
// two legs, each term a bivariate-normal expression in the thresholds built
// from the conditional log-return moments, with correlation
// rho = sd(x_{T1} | n1) / sd(x_{T2} | m), m = n1 + n2.
//
// Strike legs are discounted at the jump-adjusted rates r_m and r_{n1} (the
// same convention as the vanilla series), which makes the series the exact
// Poisson mixture of conditional discounted cashflows; with k = 0 the
// adjusted rates collapse to r.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "model.hpp"
#include "normal.hpp"
#include "root_finding.hpp"
#include "vanilla.hpp"

namespace jmfbm {

/// Compound call contract: at T1 pay K1 to receive the call (K, T2).
struct CompoundCallSpec {
    double outer_strike = 0.0; ///< K1, paid at T1 (0 degenerates to the inner call)
    double outer_expiry = 0.0; ///< T1
    double inner_strike = 0.0; ///< K
    double inner_expiry = 0.0; ///< T2
    double valuation_time = 0.0; ///< T0

    void validate() const {
        if (!(outer_strike >= 0.0))
            throw std::invalid_argument("CompoundCallSpec: outer_strike must be >= 0");
        if (!(inner_strike > 0.0))
            throw std::invalid_argument("CompoundCallSpec: inner_strike must be > 0");
        if (!(valuation_time >= 0.0 && valuation_time < outer_expiry && outer_expiry < inner_expiry))
            throw std::invalid_argument("CompoundCallSpec: need T0 < T1 < T2");
    }
};

/// Indifference spot at T1 together with the re-priced residual.
struct CriticalPrice {
    double value = 0.0;
    double residual = 0.0;
};

namespace detail {

/// (log_ratio + mean + var) / sd, saturating to +/-inf when the variance
/// vanishes (the event becomes deterministic).
inline double tilted_threshold(double log_ratio, double mean, double var) {
    if (var > 0.0) return (log_ratio + mean + var) / std::sqrt(var);
    return log_ratio + mean >= 0.0 ? kInf : -kInf;
}

inline double jump_adjusted_rate(const ModelParams& params, int n, double dt) {
    return params.r - params.lambda * params.k + n * std::log1p(params.k) / dt;
}

inline SeriesControl split_tolerance(const SeriesControl& control, int dims) {
    SeriesControl per_dim = control;
    per_dim.tail_tolerance = control.tail_tolerance / dims;
    return per_dim;
}

} // namespace detail

/// Solve C(s, K, T1, T2) = K1 for the critical spot S1* at T1.
inline CriticalPrice critical_price(const ModelParams& params, const CompoundCallSpec& spec,
                                    const SeriesControl& control = {}, double tol = 1e-10) {
    params.validate();
    spec.validate();
    if (spec.outer_strike <= 0.0) return {0.0, 0.0}; // every state exercises

    const VanillaCallSpec inner{spec.inner_strike, {spec.outer_expiry, spec.inner_expiry}};
    const CallPriceCurve curve(params, inner, control);
    const auto objective = [&](double s) { return curve(s) - spec.outer_strike; };

    const double start = spec.outer_strike +
                         spec.inner_strike * std::exp(-params.r * inner.window.dt());
    const Bracket bracket = expand_bracket(objective, start);
    const double root = find_root(objective, bracket, 1e-13 * start, tol);

    // The root is unique only because the call is strictly increasing in spot.
    const double eps = 1e-6 * root;
    if (!(curve(root + eps) > curve(root - eps)))
        throw std::runtime_error("critical_price: call price not increasing at root");

    return {root, std::abs(curve(root) - spec.outer_strike)};
}

/// Compound call value by the double Poisson series.
inline PriceResult compound_call_price(const ModelParams& params, double s0,
                                       const CompoundCallSpec& spec,
                                       const SeriesControl& control = {}) {
    params.validate();
    spec.validate();
    control.validate();
    if (!(s0 > 0.0)) throw std::invalid_argument("compound_call_price: s0 must be > 0");

    const double t0 = spec.valuation_time;
    const double t1 = spec.outer_expiry;
    const double t2 = spec.inner_expiry;
    const double dt1 = t1 - t0;
    const double dt2 = t2 - t0;

    const CriticalPrice critical = critical_price(params, spec, control);
    const double log_s_over_scrit =
        critical.value > 0.0 ? std::log(s0 / critical.value) : kInf;
    const double log_s_over_k = std::log(s0 / spec.inner_strike);

    const SeriesControl per_dim = detail::split_tolerance(control, 2);
    const PoissonWeights w1 = poisson_weights(params.lambda_prime() * dt1, per_dim);
    const PoissonWeights w2 = poisson_weights(params.lambda_prime() * (t2 - t1), per_dim);

    const double spot_leg2 = s0 * std::exp(-params.q * dt2);

    double value = 0.0;
    for (int n1 = 0; n1 < w1.terms(); ++n1) {
        const ConditionalMoments m1 = conditional_moments(params, {t0, t1}, n1);
        const double sd1 = m1.std_dev();
        const double a1 = detail::tilted_threshold(log_s_over_scrit, m1.mean, m1.variance);
        const double a2 = std::isfinite(a1) ? a1 - sd1 : a1;

        // Strike payment at T1 on {S_{T1} > S1*}.
        const double disc1 = std::exp(-detail::jump_adjusted_rate(params, n1, dt1) * dt1);
        value -= w1.weight[static_cast<std::size_t>(n1)] * spec.outer_strike * disc1 * norm_cdf(a2);

        for (int n2 = 0; n2 < w2.terms(); ++n2) {
            const int m = n1 + n2;
            const ConditionalMoments m2 = conditional_moments(params, {t0, t2}, m);
            const double sd2 = m2.std_dev();
            const double b1 = detail::tilted_threshold(log_s_over_k, m2.mean, m2.variance);
            const double b2 = std::isfinite(b1) ? b1 - sd2 : b1;
            const double rho = sd2 > 0.0 ? sd1 / sd2 : 0.0;

            const double w = w1.weight[static_cast<std::size_t>(n1)] *
                             w2.weight[static_cast<std::size_t>(n2)];
            const double disc2 = std::exp(-detail::jump_adjusted_rate(params, m, dt2) * dt2);
            value += w * (spot_leg2 * binorm_cdf(a1, b1, rho) -
                          spec.inner_strike * disc2 * binorm_cdf(a2, b2, rho));
        }
    }

    PriceResult res;
    res.value = std::max(0.0, value);
    res.terms_used = {w1.terms(), w2.terms()};
    res.tail_shortfall = w1.shortfall + w2.shortfall;
    if (w1.capped || w2.capped) res.flags |= price_flags::series_capped;
    return res;
}

} // namespace jmfbm
