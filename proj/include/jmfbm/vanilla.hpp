#pragma once

// European call under the jump mixed-fractional model: a Poisson-weighted
// series of Black-Scholes-type terms.  Term n uses total variance
//   v_n^2 = sigma^2*dt + sigma^2*(te^{2H} - ts^{2H}) + n*sigma_j^2
// and the jump-adjusted rate r_n = r - lambda*k + n*ln(1+k)/dt, so that the
// series is exactly the Poisson mixture of conditional discounted
// expectations (the compensated weights at lambda' absorb the jump drift).
// Dividends enter the drift as r - q; the strike discount keeps r_n.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "model.hpp"
#include "normal.hpp"

namespace jmfbm {

/// Contract spec for a European call priced over `window` = [T0, T].
struct VanillaCallSpec {
    double strike = 0.0;
    TimeWindow window;

    void validate() const {
        if (!(strike > 0.0)) throw std::invalid_argument("VanillaCallSpec: strike must be > 0");
        window.validate();
    }
};

namespace price_flags {
inline constexpr unsigned series_capped = 1u << 0;   ///< Poisson cap hit before tolerance
inline constexpr unsigned supplied_critical = 1u << 1; ///< user-supplied critical values in use
} // namespace price_flags

/// Price plus convergence diagnostics.
struct PriceResult {
    double value = 0.0;
    std::vector<int> terms_used;  ///< terms per Poisson dimension
    double tail_shortfall = 0.0;  ///< summed truncated mass across dimensions
    unsigned flags = 0;

    bool flagged() const { return flags != 0; }
};

namespace detail {

/// s0*e^{-q*dt}*Phi(d1) - strike*e^{-rn*dt}*Phi(d2) with total variance `var`
/// over the window; the zero-variance limit is the discounted forward
/// intrinsic value.
inline double discounted_call_term(double s0, double strike, double dt, double var, double rn,
                                   double q) {
    const double spot_leg = s0 * std::exp(-q * dt);
    const double strike_leg = strike * std::exp(-rn * dt);
    if (var <= 0.0) return std::max(0.0, spot_leg - strike_leg);
    const double sd = std::sqrt(var);
    const double d1 = (std::log(s0 / strike) + (rn - q) * dt + 0.5 * var) / sd;
    const double d2 = d1 - sd;
    return spot_leg * norm_cdf(d1) - strike_leg * norm_cdf(d2);
}

/// Per-jump-count data for one series term.
struct SeriesTerm {
    double weight;
    double variance;
    double rn;
};

inline std::vector<SeriesTerm> build_series(const ModelParams& params, const TimeWindow& window,
                                            const PoissonWeights& weights) {
    const double dt = window.dt();
    const double base_var = conditional_moments(params, window, 0).variance;
    const double log1pk = std::log1p(params.k);
    const double drift_jump = params.lambda * params.k;

    std::vector<SeriesTerm> terms;
    terms.reserve(weights.weight.size());
    for (int n = 0; n < weights.terms(); ++n) {
        SeriesTerm t;
        t.weight = weights.weight[static_cast<std::size_t>(n)];
        t.variance = base_var + n * params.sigma_j * params.sigma_j;
        t.rn = params.r - drift_jump + n * log1pk / dt;
        terms.push_back(t);
    }
    return terms;
}

} // namespace detail

/// Single-argument view of the call price as a function of spot, with the
/// Poisson series data computed once.  Strictly increasing in s0; used by the
/// critical-price solvers and the Monte Carlo estimators.
class CallPriceCurve {
  public:
    CallPriceCurve(const ModelParams& params, const VanillaCallSpec& spec,
                   const SeriesControl& control = {}) {
        params.validate();
        spec.validate();
        control.validate();
        const PoissonWeights w = poisson_weights(params.lambda_prime() * spec.window.dt(), control);
        terms_ = detail::build_series(params, spec.window, w);
        strike_ = spec.strike;
        dt_ = spec.window.dt();
        q_ = params.q;
        tail_shortfall_ = w.shortfall;
        capped_ = w.capped;
    }

    double operator()(double s0) const {
        if (!(s0 > 0.0)) throw std::invalid_argument("CallPriceCurve: s0 must be > 0");
        double value = 0.0;
        for (const auto& t : terms_)
            value += t.weight * detail::discounted_call_term(s0, strike_, dt_, t.variance, t.rn, q_);
        return std::max(0.0, value);
    }

    PriceResult result(double s0) const {
        PriceResult res;
        res.value = (*this)(s0);
        res.terms_used = {static_cast<int>(terms_.size())};
        res.tail_shortfall = tail_shortfall_;
        if (capped_) res.flags |= price_flags::series_capped;
        return res;
    }

    int terms() const { return static_cast<int>(terms_.size()); }
    double tail_shortfall() const { return tail_shortfall_; }
    bool capped() const { return capped_; }

  private:
    std::vector<detail::SeriesTerm> terms_;
    double strike_ = 0.0;
    double dt_ = 0.0;
    double q_ = 0.0;
    double tail_shortfall_ = 0.0;
    bool capped_ = false;
};

/// European call price under the jump mixed-fractional model.
inline PriceResult call_price(const ModelParams& params, double s0, const VanillaCallSpec& spec,
                              const SeriesControl& control = {}) {
    if (!(s0 > 0.0)) throw std::invalid_argument("call_price: s0 must be > 0");
    return CallPriceCurve(params, spec, control).result(s0);
}

/// The spot-to-price map used by the critical-price equations.
inline CallPriceCurve call_price_in_spot(const ModelParams& params, const VanillaCallSpec& spec,
                                         const SeriesControl& control = {}) {
    return CallPriceCurve(params, spec, control);
}

} // namespace jmfbm
