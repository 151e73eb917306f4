#pragma once

// Risk-neutral model parameters and the conditional log-return moments shared
// by every pricing routine in this library.
//
// The asset follows a mixed fractional diffusion with compound-Poisson jumps:
// two Gaussian drivers (a Brownian motion and an independent fractional
// Brownian motion with Hurst exponent H, both scaled by the same sigma) plus
// lognormal jumps arriving at rate lambda.  Log-return variance over a window
// [t0, t1] is booked as sigma^2*(t1 - t0) + sigma^2*(t1^{2H} - t0^{2H}) plus
// one sigma_j^2 per jump; all series pricers expand over the jump count with
// Poisson weights at the compensated rate lambda' = lambda*(1 + k).

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace jmfbm {

/// Risk-neutral model parameters.  One authoritative home for every model
/// symbol; immutable by convention once constructed.
struct ModelParams {
    double r = 0.0;       ///< risk-free rate, per year, continuously compounded
    double q = 0.0;       ///< continuous dividend yield, per year
    double sigma = 0.0;   ///< diffusion volatility applied to both Gaussian drivers
    double hurst = 0.5;   ///< Hurst exponent H in (0, 1)
    double lambda = 0.0;  ///< jump intensity, expected jumps per year
    double k = 0.0;       ///< mean proportional jump size, E[J - 1]
    double sigma_j = 0.0; ///< standard deviation of ln J

    /// Compensated jump intensity lambda' = lambda * (1 + k).
    double lambda_prime() const { return lambda * (1.0 + k); }

    /// Mean of ln J: ln(1 + k) - sigma_j^2 / 2.
    double mu_j() const { return std::log1p(k) - 0.5 * sigma_j * sigma_j; }

    void validate() const {
        // sigma == 0 is accepted as the degenerate deterministic limit; it is
        // needed by the Monte Carlo drift checks and the zero-variance
        // critical-price identities.
        if (!(sigma >= 0.0)) throw std::invalid_argument("ModelParams: sigma must be >= 0");
        if (!(lambda >= 0.0)) throw std::invalid_argument("ModelParams: lambda must be >= 0");
        if (!(sigma_j >= 0.0)) throw std::invalid_argument("ModelParams: sigma_j must be >= 0");
        if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("ModelParams: hurst must lie in (0, 1)");
        if (!(k > -1.0)) throw std::invalid_argument("ModelParams: k must exceed -1");
    }
};

/// Closed time interval [t_start, t_end] in years.
struct TimeWindow {
    double t_start = 0.0;
    double t_end = 0.0;

    double dt() const { return t_end - t_start; }

    void validate() const {
        if (!(t_start >= 0.0 && t_start < t_end))
            throw std::invalid_argument("TimeWindow: need 0 <= t_start < t_end");
    }
};

/// Mean and variance of the log-return over a window, conditional on the
/// number of jumps in that window.
struct ConditionalMoments {
    double mean = 0.0;
    double variance = 0.0;

    double std_dev() const { return std::sqrt(variance); }
};

/// Truncation policy for the Poisson jump-count series.
struct SeriesControl {
    double tail_tolerance = 1e-12; ///< maximum untruncated probability mass
    int max_terms = 170;           ///< hard cap on terms per Poisson dimension

    void validate() const {
        if (!(tail_tolerance > 0.0 && tail_tolerance < 1.0))
            throw std::invalid_argument("SeriesControl: tail_tolerance must lie in (0, 1)");
        if (max_terms < 1) throw std::invalid_argument("SeriesControl: max_terms must be >= 1");
    }
};

/// Truncated Poisson weight sequence.  weight[n] is the probability of n
/// events; the tail mass beyond the last term is reported, never folded back
/// into the weights.
struct PoissonWeights {
    std::vector<double> weight;
    double shortfall = 0.0; ///< 1 - sum(weight), the truncated tail mass
    bool capped = false;    ///< true when max_terms was hit before tolerance

    int terms() const { return static_cast<int>(weight.size()); }
};

/// Conditional moments of the log-return over `window` given `n_jumps` jumps.
///
/// mean     = (r - q - lambda*k)*dt - sigma^2*dt/2 - sigma^2*(te^{2H} - ts^{2H})/2
///            + n*(ln(1+k) - sigma_j^2/2)
/// variance = sigma^2*dt + sigma^2*(te^{2H} - ts^{2H}) + n*sigma_j^2
inline ConditionalMoments conditional_moments(const ModelParams& params,
                                              const TimeWindow& window,
                                              int n_jumps) {
    params.validate();
    window.validate();
    if (n_jumps < 0) throw std::invalid_argument("conditional_moments: n_jumps must be >= 0");

    const double dt = window.dt();
    const double two_h = 2.0 * params.hurst;
    const double s2 = params.sigma * params.sigma;
    const double frac_span = std::pow(window.t_end, two_h) - std::pow(window.t_start, two_h);
    const double gauss_var = s2 * dt + s2 * frac_span;
    const double n = static_cast<double>(n_jumps);

    ConditionalMoments m;
    m.variance = gauss_var + n * params.sigma_j * params.sigma_j;
    m.mean = (params.r - params.q - params.lambda * params.k) * dt - 0.5 * gauss_var +
             n * params.mu_j();
    return m;
}

/// Correlation between the log-returns over [t0, t1] and [t0, t2], conditional
/// on n1 jumps in the first window and m >= n1 jumps in the second.
///
/// The covariance is taken as the nested-interval value var(x_{t1} | n1), so
/// rho = sd(x_{t1}) / sd(x_{t2}).  This matches the variance bookkeeping used
/// by the series pricers (increments carry the difference of the fractional
/// marginal variances and are independent of the past).
inline double log_return_correlation(const ModelParams& params, double t0, double t1,
                                     double t2, int n1, int m) {
    if (!(t0 < t1 && t1 < t2)) throw std::invalid_argument("log_return_correlation: need t0 < t1 < t2");
    if (m < n1) throw std::invalid_argument("log_return_correlation: need m >= n1");

    const double var1 = conditional_moments(params, {t0, t1}, n1).variance;
    const double var2 = conditional_moments(params, {t0, t2}, m).variance;
    if (!(var2 > 0.0))
        throw std::domain_error("log_return_correlation: zero variance, model is deterministic");
    return std::sqrt(var1 / var2);
}

/// Poisson probabilities for mean `rate_times_dt`, computed by the recurrence
/// w(n+1) = w(n) * rate / (n+1) and truncated at the smallest N whose
/// cumulative mass reaches 1 - tail_tolerance (capped at max_terms).
inline PoissonWeights poisson_weights(double rate_times_dt,
                                      const SeriesControl& control = {}) {
    if (!(rate_times_dt >= 0.0)) throw std::invalid_argument("poisson_weights: rate must be >= 0");
    control.validate();

    PoissonWeights out;
    if (rate_times_dt == 0.0) {
        out.weight = {1.0};
        return out;
    }

    double w = std::exp(-rate_times_dt);
    double cum = 0.0;
    const double target = 1.0 - control.tail_tolerance;
    for (int n = 0; n < control.max_terms; ++n) {
        out.weight.push_back(w);
        cum += w;
        if (cum >= target) break;
        w = w * rate_times_dt / static_cast<double>(n + 1);
    }
    out.shortfall = std::max(0.0, 1.0 - cum);
    out.capped = cum < target;
    return out;
}

} // namespace jmfbm
