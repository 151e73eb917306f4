#pragma once

// Extendible call pricing.  At T1 the holder abandons (S < L), extends to T2
// with strike K2 for a premium A (L <= S <= M), or exercises (S > M).  The
// critical values L and M solve C(L, K2, T1, T2) = A and
// M - K1 = C(M, K2, T1, T2) - A.  The price is a Poisson series mixing
// univariate terms (exercise leg) and bivariate terms (extension leg), with
// the same nested-interval correlation and jump-adjusted discounting as the
// compound pricer.
//
// The N-stage generalization values a schedule of up to three extension
// opportunities by backward induction for the per-stage critical values and a
// multivariate-normal rectangle expansion per decision path.

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "compound.hpp"
#include "model.hpp"
#include "normal.hpp"
#include "root_finding.hpp"
#include "vanilla.hpp"

namespace jmfbm {

/// Raised when the extension region at a decision date is empty or unbounded:
/// the contract degenerates (an empty region leaves a vanilla call on K1).
struct NoExtensionRegion : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Extendible call contract with a single extension opportunity.
struct ExtendibleCallSpec {
    double strike1 = 0.0;  ///< K1, strike at T1
    double expiry1 = 0.0;  ///< T1
    double strike2 = 0.0;  ///< K2, strike after extension
    double expiry2 = 0.0;  ///< T2
    double premium = 0.0;  ///< A, paid at T1 to extend
    double valuation_time = 0.0;
    /// Exogenous (L, M); when absent the solver supplies them.
    std::optional<std::pair<double, double>> critical_values;

    void validate() const {
        if (!(strike1 > 0.0 && strike2 > 0.0))
            throw std::invalid_argument("ExtendibleCallSpec: strikes must be > 0");
        if (!(premium >= 0.0)) throw std::invalid_argument("ExtendibleCallSpec: premium must be >= 0");
        if (!(valuation_time >= 0.0 && valuation_time < expiry1 && expiry1 < expiry2))
            throw std::invalid_argument("ExtendibleCallSpec: need T0 < T1 < T2");
        if (critical_values) {
            const auto [l, m] = *critical_values;
            if (!(l > 0.0 && l <= m))
                throw std::invalid_argument("ExtendibleCallSpec: need 0 < L <= M");
        }
    }
};

/// Schedule for an option extendible N times (N <= 3).  stages[j] holds the
/// j-th expiry and strike together with the premium paid at the previous
/// decision date to extend into it; stages[0].premium must be 0.
struct NExtendibleSpec {
    struct Stage {
        double expiry = 0.0;
        double strike = 0.0;
        double premium = 0.0;
    };

    std::vector<Stage> stages;
    double valuation_time = 0.0;

    int extensions() const { return static_cast<int>(stages.size()) - 1; }

    void validate() const {
        if (stages.empty() || stages.size() > 4)
            throw std::invalid_argument("NExtendibleSpec: need 1..4 stages (N <= 3)");
        if (stages.front().premium != 0.0)
            throw std::invalid_argument("NExtendibleSpec: first-stage premium must be 0");
        double prev = valuation_time;
        for (const auto& s : stages) {
            if (!(s.expiry > prev))
                throw std::invalid_argument("NExtendibleSpec: expiries must be strictly increasing");
            if (!(s.strike > 0.0)) throw std::invalid_argument("NExtendibleSpec: strikes must be > 0");
            if (!(s.premium >= 0.0))
                throw std::invalid_argument("NExtendibleSpec: premiums must be >= 0");
            prev = s.expiry;
        }
        if (!(valuation_time >= 0.0))
            throw std::invalid_argument("NExtendibleSpec: valuation_time must be >= 0");
    }
};

/// Two-point Richardson extrapolation of an extension-count sequence.
inline double richardson_extrapolate(double ec0, double ec1) { return 2.0 * ec1 - ec0; }

namespace detail {

/// Standardized bound saturation for degenerate (zero-variance) legs: a
/// satisfied constraint becomes unbounded, a violated one impossible.
inline double lower_bound_z(double bound_log, double mean, double sd) {
    if (bound_log == -kInf) return -kInf;
    if (bound_log == kInf) return kInf;
    if (sd > 0.0) return (bound_log - mean) / sd;
    return bound_log - mean <= 0.0 ? -kInf : kInf;
}

inline double upper_bound_z(double bound_log, double mean, double sd) {
    if (bound_log == kInf) return kInf;
    if (bound_log == -kInf) return -kInf;
    if (sd > 0.0) return (bound_log - mean) / sd;
    return bound_log - mean >= 0.0 ? kInf : -kInf;
}

inline double shift_z(double z, double sd) { return std::isfinite(z) ? z - sd : z; }

/// Per-stage critical levels.  M == +inf marks a stage where exercise is
/// never optimal; L == M == strike marks an empty extension region (the
/// decision collapses to plain exercise).
struct StageLevels {
    double l = 0.0;
    double m = 0.0;
};

/// Solve V(L) = A and V(M) - A = M - K for a decision date with continuation
/// value V.  `empty_to_error` selects between throwing (single-extension
/// contract semantics) and degrading to the exercise-only stage.
template <typename ValueFn>
StageLevels solve_stage_levels(const ValueFn& continuation, double strike, double premium,
                               double start_hint, bool empty_to_error, double tol) {
    StageLevels out;
    if (premium > 0.0) {
        const auto g = [&](double s) { return continuation(s) - premium; };
        const Bracket b = expand_bracket(g, start_hint);
        out.l = find_root(g, b, 1e-13 * start_hint, tol);
    } else {
        out.l = 0.0; // extension is free, abandoning is never strictly better
    }

    const auto h = [&](double s) { return continuation(s) - premium - (s - strike); };
    double probe = out.l > 0.0 ? out.l : strike;
    if (h(probe) <= 0.0) {
        if (out.l > 0.0 && h(out.l) <= 0.0) {
            // Exercise already dominates at L: the extension region is empty.
            if (empty_to_error)
                throw NoExtensionRegion(
                    "extension region is empty (premium too large); the contract degenerates to a "
                    "vanilla call on the first strike");
            out.l = strike;
            out.m = strike;
            return out;
        }
        // h(probe) <= 0 with L == 0: root lies in (0, probe].
        double lo = probe;
        for (int i = 0; i < 120 && h(lo) <= 0.0; ++i) lo /= 2.0;
        out.m = find_root(h, {lo, probe}, 1e-13 * probe, tol);
        return out;
    }
    double hi = probe;
    for (int i = 0; i < 60; ++i) {
        hi *= 2.0;
        if (h(hi) < 0.0) {
            out.m = find_root(h, {probe, hi}, 1e-13 * probe, tol);
            return out;
        }
    }
    if (empty_to_error)
        throw NoExtensionRegion("exercise is never optimal (no finite upper critical value)");
    out.m = kInf;
    return out;
}

} // namespace detail

/// Critical values (L, M) of the single-extension contract.
inline std::pair<double, double> critical_values(const ModelParams& params,
                                                 const ExtendibleCallSpec& spec,
                                                 const SeriesControl& control = {},
                                                 double tol = 1e-10) {
    params.validate();
    spec.validate();
    if (!(spec.premium > 0.0))
        throw std::invalid_argument("critical_values: premium must be > 0 (A = 0 degenerates L to 0)");

    const VanillaCallSpec cont{spec.strike2, {spec.expiry1, spec.expiry2}};
    const CallPriceCurve curve(params, cont, control);
    const double start = spec.premium + spec.strike2 * std::exp(-params.r * cont.window.dt());
    const detail::StageLevels lv = detail::solve_stage_levels(
        curve, spec.strike1, spec.premium, start, /*empty_to_error=*/true, tol);
    return {lv.l, lv.m};
}

/// Extendible call value per the single-extension series formula.
inline PriceResult extendible_call_price(const ModelParams& params, double s0,
                                         const ExtendibleCallSpec& spec,
                                         const SeriesControl& control = {}) {
    params.validate();
    spec.validate();
    control.validate();
    if (!(s0 > 0.0)) throw std::invalid_argument("extendible_call_price: s0 must be > 0");

    double level_l, level_m;
    unsigned flags = 0;
    if (spec.critical_values) {
        std::tie(level_l, level_m) = *spec.critical_values;
        flags |= price_flags::supplied_critical;
    } else {
        std::tie(level_l, level_m) = critical_values(params, spec, control);
    }

    const double t0 = spec.valuation_time;
    const double dt1 = spec.expiry1 - t0;
    const double dt2 = spec.expiry2 - t0;
    const double log_m = std::log(s0 / level_m);
    const double log_l = level_l > 0.0 ? std::log(s0 / level_l) : kInf;
    const double log_k2 = std::log(s0 / spec.strike2);

    const SeriesControl per_dim = detail::split_tolerance(control, 2);
    const PoissonWeights w1 = poisson_weights(params.lambda_prime() * dt1, per_dim);
    const PoissonWeights w2 =
        poisson_weights(params.lambda_prime() * (spec.expiry2 - spec.expiry1), per_dim);

    const double spot_leg1 = s0 * std::exp(-params.q * dt1);
    const double spot_leg2 = s0 * std::exp(-params.q * dt2);

    double value = 0.0;
    for (int n1 = 0; n1 < w1.terms(); ++n1) {
        const double wn1 = w1.weight[static_cast<std::size_t>(n1)];
        const ConditionalMoments m1 = conditional_moments(params, {t0, spec.expiry1}, n1);
        const double sd1 = m1.std_dev();
        const double a1 = detail::tilted_threshold(log_m, m1.mean, m1.variance);
        const double a2 = std::isfinite(a1) ? a1 - sd1 : a1;
        const double b1 = detail::tilted_threshold(log_l, m1.mean, m1.variance);
        const double b2 = std::isfinite(b1) ? b1 - sd1 : b1;

        const double disc1 = std::exp(-detail::jump_adjusted_rate(params, n1, dt1) * dt1);

        // Exercise leg at T1 on {S > M} and premium paid on {L <= S <= M}.
        value += wn1 * (spot_leg1 * norm_cdf(a1) - spec.strike1 * disc1 * norm_cdf(a2));
        value -= wn1 * spec.premium * disc1 * (norm_cdf(b2) - norm_cdf(a2));

        for (int n2 = 0; n2 < w2.terms(); ++n2) {
            const int m = n1 + n2;
            const ConditionalMoments m2 = conditional_moments(params, {t0, spec.expiry2}, m);
            const double sd2 = m2.std_dev();
            const double c1 = detail::tilted_threshold(log_k2, m2.mean, m2.variance);
            const double c2 = std::isfinite(c1) ? c1 - sd2 : c1;
            const double rho = sd2 > 0.0 ? sd1 / sd2 : 0.0;

            const double w = wn1 * w2.weight[static_cast<std::size_t>(n2)];
            const double disc2 = std::exp(-detail::jump_adjusted_rate(params, m, dt2) * dt2);
            // Extension leg: payoff of the T2 call collected on {S_{T1} >= L}
            // minus the part already counted by the exercise event {S_{T1} > M}.
            value += w * (spot_leg2 * binorm_cdf(b1, c1, rho) -
                          spec.strike2 * disc2 * binorm_cdf(b2, c2, rho));
            value -= w * (spot_leg2 * binorm_cdf(a1, c1, rho) -
                          spec.strike2 * disc2 * binorm_cdf(a2, c2, rho));
        }
    }

    PriceResult res;
    res.value = std::max(0.0, value);
    res.terms_used = {w1.terms(), w2.terms()};
    res.tail_shortfall = w1.shortfall + w2.shortfall;
    res.flags = flags;
    if (w1.capped || w2.capped) res.flags |= price_flags::series_capped;
    return res;
}

/// Diffusion-only (lambda = 0) extendible call, written as a standalone
/// closed-form expression over the mixed Gaussian variances.  Kept
/// independent of the series evaluator so the two routes cross-check each
/// other.
inline PriceResult mfbm_extendible_price(const ModelParams& params, double s0,
                                         const ExtendibleCallSpec& spec,
                                         const SeriesControl& control = {}) {
    params.validate();
    spec.validate();
    if (params.lambda != 0.0)
        throw std::invalid_argument("mfbm_extendible_price: requires lambda = 0");
    if (!(s0 > 0.0)) throw std::invalid_argument("mfbm_extendible_price: s0 must be > 0");

    double level_l, level_m;
    unsigned flags = 0;
    if (spec.critical_values) {
        std::tie(level_l, level_m) = *spec.critical_values;
        flags |= price_flags::supplied_critical;
    } else {
        std::tie(level_l, level_m) = critical_values(params, spec, control);
    }

    const double t0 = spec.valuation_time;
    const double dt1 = spec.expiry1 - t0;
    const double dt2 = spec.expiry2 - t0;
    const double two_h = 2.0 * params.hurst;
    const double s2 = params.sigma * params.sigma;
    const double v1 = s2 * dt1 + s2 * (std::pow(spec.expiry1, two_h) - std::pow(t0, two_h));
    const double v2 = s2 * dt2 + s2 * (std::pow(spec.expiry2, two_h) - std::pow(t0, two_h));
    const double sd1 = std::sqrt(v1);
    const double sd2 = std::sqrt(v2);
    const double drift1 = (params.r - params.q) * dt1 - 0.5 * v1;
    const double drift2 = (params.r - params.q) * dt2 - 0.5 * v2;

    const double a1 = detail::tilted_threshold(std::log(s0 / level_m), drift1, v1);
    const double a2 = std::isfinite(a1) ? a1 - sd1 : a1;
    const double b1 = detail::tilted_threshold(
        level_l > 0.0 ? std::log(s0 / level_l) : kInf, drift1, v1);
    const double b2 = std::isfinite(b1) ? b1 - sd1 : b1;
    const double c1 = detail::tilted_threshold(std::log(s0 / spec.strike2), drift2, v2);
    const double c2 = std::isfinite(c1) ? c1 - sd2 : c1;
    const double rho = sd2 > 0.0 ? sd1 / sd2 : 0.0;

    const double df1 = std::exp(-params.r * dt1);
    const double df2 = std::exp(-params.r * dt2);
    const double spot1 = s0 * std::exp(-params.q * dt1);
    const double spot2 = s0 * std::exp(-params.q * dt2);

    const double value = spot1 * norm_cdf(a1) - spec.strike1 * df1 * norm_cdf(a2) +
                         spot2 * binorm_cdf(b1, c1, rho) - spec.strike2 * df2 * binorm_cdf(b2, c2, rho) -
                         (spot2 * binorm_cdf(a1, c1, rho) - spec.strike2 * df2 * binorm_cdf(a2, c2, rho)) -
                         spec.premium * df1 * (norm_cdf(b2) - norm_cdf(a2));

    PriceResult res;
    res.value = std::max(0.0, value);
    res.terms_used = {1, 1};
    res.flags = flags;
    return res;
}

namespace detail {

/// Value of the remaining schedule [stages, levels] seen from `t_from` with
/// spot s0.  Expands every decision path into standardized rectangle
/// probabilities of dimension <= stage count.
inline PriceResult n_extendible_value(const ModelParams& params, double s0,
                                      std::span<const NExtendibleSpec::Stage> stages,
                                      std::span<const StageLevels> levels, double t_from,
                                      const SeriesControl& control) {
    const int n_stages = static_cast<int>(stages.size());
    // Half the tail budget goes to per-dimension truncation, half to the
    // joint-weight pruning below, keeping the reported shortfall within the
    // configured tolerance.
    const SeriesControl per_dim = split_tolerance(control, 2 * n_stages);

    std::vector<PoissonWeights> w(static_cast<std::size_t>(n_stages));
    double prev = t_from;
    for (int i = 0; i < n_stages; ++i) {
        w[static_cast<std::size_t>(i)] =
            poisson_weights(params.lambda_prime() * (stages[i].expiry - prev), per_dim);
        prev = stages[i].expiry;
    }

    // Log levels of the decision corridor per intermediate stage.
    std::vector<double> log_lo(static_cast<std::size_t>(n_stages), -kInf);
    std::vector<double> log_hi(static_cast<std::size_t>(n_stages), kInf);
    for (int i = 0; i + 1 < n_stages; ++i) {
        log_lo[static_cast<std::size_t>(i)] =
            levels[i].l > 0.0 ? std::log(levels[i].l / s0) : -kInf;
        log_hi[static_cast<std::size_t>(i)] =
            std::isfinite(levels[i].m) ? std::log(levels[i].m / s0) : kInf;
    }

    // Moments over [t_from, T_i] conditional on the cumulative jump count.
    int max_total = 0;
    for (const auto& wi : w) max_total += wi.terms() - 1;
    std::vector<std::vector<ConditionalMoments>> moments(static_cast<std::size_t>(n_stages));
    for (int i = 0; i < n_stages; ++i) {
        auto& row = moments[static_cast<std::size_t>(i)];
        row.reserve(static_cast<std::size_t>(max_total) + 1);
        for (int c = 0; c <= max_total; ++c)
            row.push_back(conditional_moments(params, {t_from, stages[i].expiry}, c));
    }

    double value = 0.0;
    double skipped_mass = 0.0;
    for (int j = 1; j <= n_stages; ++j) {
        const double dt_j = stages[j - 1].expiry - t_from;
        const double spot_leg = s0 * std::exp(-params.q * dt_j);
        const bool last = j == n_stages;
        // Exercise threshold at stage j; the terminal stage exercises above
        // its own strike.
        const double log_exercise =
            last ? std::log(stages[j - 1].strike / s0)
                 : (std::isfinite(levels[j - 1].m) ? std::log(levels[j - 1].m / s0) : kInf);
        const double next_premium = last ? 0.0 : stages[j].premium;

        CorrelationMatrix corr(j);
        std::vector<int> counts(static_cast<std::size_t>(j), 0);
        std::vector<double> plain_lo(static_cast<std::size_t>(j));
        std::vector<double> plain_hi(static_cast<std::size_t>(j));
        std::vector<double> shift_lo(static_cast<std::size_t>(j));
        std::vector<double> shift_hi(static_cast<std::size_t>(j));
        std::vector<double> sd(static_cast<std::size_t>(j));

        // Jump-count vectors whose joint weight cannot move the sum by more
        // than the tail tolerance are skipped; the skipped mass is reported
        // together with the per-dimension truncation shortfalls.
        double grid_size = 1.0;
        for (int i = 0; i < j; ++i) grid_size *= w[static_cast<std::size_t>(i)].terms();
        const double weight_floor = 0.5 * control.tail_tolerance / (grid_size * n_stages);

        while (true) {
            // Assemble the rectangle for this jump-count vector.
            double weight = 1.0;
            int cumulative = 0;
            for (int i = 0; i < j; ++i) {
                cumulative += counts[static_cast<std::size_t>(i)];
                weight *= w[static_cast<std::size_t>(i)]
                              .weight[static_cast<std::size_t>(counts[static_cast<std::size_t>(i)])];
            }
            if (j > 1 && weight < weight_floor) {
                skipped_mass += weight;
                int pos2 = j - 1;
                while (pos2 >= 0) {
                    if (++counts[static_cast<std::size_t>(pos2)] <
                        w[static_cast<std::size_t>(pos2)].terms())
                        break;
                    counts[static_cast<std::size_t>(pos2)] = 0;
                    --pos2;
                }
                if (pos2 < 0) break;
                continue;
            }
            cumulative = 0;
            for (int i = 0; i < j; ++i) {
                cumulative += counts[static_cast<std::size_t>(i)];
                const ConditionalMoments& mi =
                    moments[static_cast<std::size_t>(i)][static_cast<std::size_t>(cumulative)];
                sd[static_cast<std::size_t>(i)] = mi.std_dev();
                const bool decision = i < j - 1;
                const double lo_log = decision ? log_lo[static_cast<std::size_t>(i)] : log_exercise;
                const double hi_log = decision ? log_hi[static_cast<std::size_t>(i)] : kInf;
                plain_lo[static_cast<std::size_t>(i)] =
                    lower_bound_z(lo_log, mi.mean, sd[static_cast<std::size_t>(i)]);
                plain_hi[static_cast<std::size_t>(i)] =
                    upper_bound_z(hi_log, mi.mean, sd[static_cast<std::size_t>(i)]);
                shift_lo[static_cast<std::size_t>(i)] =
                    shift_z(plain_lo[static_cast<std::size_t>(i)], sd[static_cast<std::size_t>(i)]);
                shift_hi[static_cast<std::size_t>(i)] =
                    shift_z(plain_hi[static_cast<std::size_t>(i)], sd[static_cast<std::size_t>(i)]);
            }
            for (int a = 0; a < j; ++a)
                for (int b = a + 1; b < j; ++b)
                    corr.set(a, b, sd[static_cast<std::size_t>(b)] > 0.0
                                       ? sd[static_cast<std::size_t>(a)] / sd[static_cast<std::size_t>(b)]
                                       : 0.0);

            const int m_j = cumulative;
            const double disc = std::exp(-jump_adjusted_rate(params, m_j, dt_j) * dt_j);
            const double p_plain = multinorm_rectangle(plain_lo, plain_hi, corr);
            const double p_shift = multinorm_rectangle(shift_lo, shift_hi, corr);
            value += weight * (spot_leg * p_shift - stages[j - 1].strike * disc * p_plain);

            if (next_premium > 0.0) {
                // Premium paid at T_j when extending: corridor at stage j too.
                const ConditionalMoments& mj =
                    moments[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(m_j)];
                plain_lo[static_cast<std::size_t>(j - 1)] =
                    lower_bound_z(log_lo[static_cast<std::size_t>(j - 1)], mj.mean,
                                  sd[static_cast<std::size_t>(j - 1)]);
                plain_hi[static_cast<std::size_t>(j - 1)] =
                    upper_bound_z(log_hi[static_cast<std::size_t>(j - 1)], mj.mean,
                                  sd[static_cast<std::size_t>(j - 1)]);
                value -= weight * next_premium * disc * multinorm_rectangle(plain_lo, plain_hi, corr);
            }

            // Odometer over the jump-count grid.
            int pos = j - 1;
            while (pos >= 0) {
                if (++counts[static_cast<std::size_t>(pos)] <
                    w[static_cast<std::size_t>(pos)].terms())
                    break;
                counts[static_cast<std::size_t>(pos)] = 0;
                --pos;
            }
            if (pos < 0) break;
        }
    }

    PriceResult res;
    res.value = std::max(0.0, value);
    res.terms_used.reserve(w.size());
    res.tail_shortfall = skipped_mass;
    for (const auto& wi : w) {
        res.terms_used.push_back(wi.terms());
        res.tail_shortfall += wi.shortfall;
        if (wi.capped) res.flags |= price_flags::series_capped;
    }
    return res;
}

inline std::vector<StageLevels> solve_schedule_levels(const ModelParams& params,
                                                      const NExtendibleSpec& spec,
                                                      const SeriesControl& control, double tol) {
    const int n_decisions = spec.extensions();
    std::vector<StageLevels> levels(static_cast<std::size_t>(n_decisions));
    for (int j = n_decisions - 1; j >= 0; --j) {
        const double t_j = spec.stages[static_cast<std::size_t>(j)].expiry;
        const std::span<const NExtendibleSpec::Stage> tail(spec.stages.data() + j + 1,
                                                           spec.stages.size() - j - 1);
        const std::span<const StageLevels> tail_levels(levels.data() + j + 1,
                                                       levels.size() - static_cast<std::size_t>(j) - 1);
        const auto continuation = [&](double s) {
            return n_extendible_value(params, s, tail, tail_levels, t_j, control).value;
        };
        const double start = spec.stages[static_cast<std::size_t>(j + 1)].premium +
                             spec.stages[static_cast<std::size_t>(j + 1)].strike *
                                 std::exp(-params.r * (spec.stages[static_cast<std::size_t>(j + 1)].expiry - t_j));
        levels[static_cast<std::size_t>(j)] = solve_stage_levels(
            continuation, spec.stages[static_cast<std::size_t>(j)].strike,
            spec.stages[static_cast<std::size_t>(j + 1)].premium, std::max(start, 1e-12),
            /*empty_to_error=*/false, tol);
    }
    return levels;
}

} // namespace detail

/// Value of an option extendible up to N times (N <= 3), with per-stage
/// critical values solved by backward induction.
inline PriceResult n_extendible_price(const ModelParams& params, double s0,
                                      const NExtendibleSpec& spec,
                                      const SeriesControl& control = {}, double tol = 1e-10) {
    params.validate();
    spec.validate();
    control.validate();
    if (!(s0 > 0.0)) throw std::invalid_argument("n_extendible_price: s0 must be > 0");

    const std::vector<detail::StageLevels> levels =
        detail::solve_schedule_levels(params, spec, control, tol);
    return detail::n_extendible_value(params, s0, spec.stages, levels, spec.valuation_time, control);
}

} // namespace jmfbm
