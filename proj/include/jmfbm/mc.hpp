#pragma once

// Independent Monte Carlo valuation via the exact solution of the asset-price
// dynamics: the mixed Gaussian component is drawn jointly at the contract
// dates from its true covariance (Brownian min(s,t) plus the fractional
// (s^{2H} + t^{2H} - |t-s|^{2H})/2 kernel), and jumps are sampled exactly as
// a Poisson count per interval with i.i.d. lognormal factors.  This makes the
// oracle an independent referee for the series pricers, which book the
// fractional variance by marginal differences instead.
//
// Every path owns an RNG substream derived from (seed, path index), so
// estimates are bit-identical for identical inputs regardless of batching.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "compound.hpp"
#include "extendible.hpp"
#include "model.hpp"
#include "vanilla.hpp"

namespace jmfbm {

struct McConfig {
    std::int64_t paths = 100000;
    std::uint64_t seed = 42;
    std::int64_t batch = 4096;  ///< paths per accumulation batch
    bool antithetic = false;    ///< mirror the Gaussian draws path-pairwise

    void validate() const {
        if (paths < 1) throw std::invalid_argument("McConfig: paths must be >= 1");
        if (batch < 1) throw std::invalid_argument("McConfig: batch must be >= 1");
        if (antithetic && paths % 2 != 0)
            throw std::invalid_argument("McConfig: antithetic sampling needs an even path count");
    }
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t paths = 0;
};

/// Which continuation estimator the compound/extendible payoffs use at the
/// first decision date.
enum class McMode {
    analytic_inner, ///< plug the simulated spot into the series continuation value
    nested          ///< simulate the continuation leg to the final maturity
};

/// Covariance of the mixed Gaussian component at a set of absolute dates
/// (paths always start at time 0, where the component vanishes).
struct GaussianCov {
    std::vector<double> dates;
    std::vector<double> cov;  ///< row-major d x d
    std::vector<double> chol; ///< lower-triangular factor, row-major

    int dim() const { return static_cast<int>(dates.size()); }
    double at(int i, int j) const { return cov[static_cast<std::size_t>(i) * dates.size() + j]; }
};

inline GaussianCov make_gaussian_cov(const ModelParams& params, std::span<const double> dates) {
    params.validate();
    for (std::size_t i = 0; i < dates.size(); ++i) {
        const bool ok = i == 0 ? dates[i] >= 0.0 : dates[i] > dates[i - 1];
        if (!ok)
            throw std::invalid_argument("make_gaussian_cov: dates must be strictly increasing, >= 0");
    }
    const std::size_t d = dates.size();
    const double s2 = params.sigma * params.sigma;
    const double two_h = 2.0 * params.hurst;

    GaussianCov out;
    out.dates.assign(dates.begin(), dates.end());
    out.cov.assign(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double s = dates[i], t = dates[j];
            const double frac = 0.5 * (std::pow(s, two_h) + std::pow(t, two_h) -
                                       std::pow(std::abs(t - s), two_h));
            out.cov[i * d + j] = s2 * std::min(s, t) + s2 * frac;
        }

    // Guarded Cholesky; the mixed kernel is positive semidefinite for any
    // valid Hurst exponent, so a failure here is an internal error.
    out.chol.assign(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = out.cov[i * d + j];
            for (std::size_t p = 0; p < j; ++p) s -= out.chol[i * d + p] * out.chol[j * d + p];
            if (i == j) {
                if (s < -1e-10 * (1.0 + out.cov[i * d + i]))
                    throw std::runtime_error("make_gaussian_cov: covariance not PSD");
                out.chol[i * d + i] = std::sqrt(std::max(s, 0.0));
            } else {
                out.chol[i * d + j] = out.chol[j * d + j] > 0.0 ? s / out.chol[j * d + j] : 0.0;
            }
        }
    }
    return out;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Per-path random stream with explicit, implementation-pinned draw rules
/// (53-bit uniforms, Box-Muller normals, Knuth Poisson sampling).
class PathRng {
  public:
    PathRng(std::uint64_t seed, std::uint64_t path)
        : gen_(splitmix64(seed ^ splitmix64(path + 0x51ED2700FFEE1234ull))) {}

    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        const double u2 = uniform();
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * std::numbers::pi * u2;
        spare_ = rad * std::sin(ang);
        has_spare_ = true;
        return rad * std::cos(ang);
    }

    int poisson(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        int count = 0;
        double prod = uniform();
        while (prod > limit) {
            ++count;
            prod *= uniform();
        }
        return count;
    }

  private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Streams terminal asset values at a list of absolute dates.  One draw pass
/// per path: the joint Gaussian vector first, then per-interval jump counts
/// and jump normals.
class PathSampler {
  public:
    PathSampler(const ModelParams& params, std::vector<double> dates)
        : params_(params), dates_(std::move(dates)), cov_(make_gaussian_cov(params_, dates_)) {
        const std::size_t d = dates_.size();
        drift_.resize(d);
        interval_len_.resize(d);
        const double two_h = 2.0 * params.hurst;
        const double s2 = params.sigma * params.sigma;
        double prev = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double t = dates_[i];
            drift_[i] = (params.r - params.q - params.lambda * params.k) * t - 0.5 * s2 * t -
                        0.5 * s2 * std::pow(t, two_h);
            interval_len_[i] = t - prev;
            prev = t;
        }
    }

    int dim() const { return static_cast<int>(dates_.size()); }
    const GaussianCov& cov() const { return cov_; }

    struct Draws {
        std::vector<double> z;          ///< iid standard normals for the Gaussian vector
        std::vector<int> jump_count;    ///< per interval
        std::vector<double> jump_zsum;  ///< per interval, sum of jump normals
    };

    void draw(PathRng& rng, Draws& out) const {
        const std::size_t d = dates_.size();
        out.z.resize(d);
        out.jump_count.resize(d);
        out.jump_zsum.resize(d);
        for (std::size_t i = 0; i < d; ++i) out.z[i] = rng.normal();
        for (std::size_t i = 0; i < d; ++i) {
            const int n = rng.poisson(params_.lambda * interval_len_[i]);
            double zsum = 0.0;
            for (int c = 0; c < n; ++c) zsum += rng.normal();
            out.jump_count[i] = n;
            out.jump_zsum[i] = zsum;
        }
    }

    /// Asset values at every date for one realization; `sign` of -1 selects
    /// the antithetic mirror (all Gaussian draws negated, jump counts kept).
    void assemble(const Draws& draws, double s0, double sign, std::span<double> s_out) const {
        const std::size_t d = dates_.size();
        const double mu_j = params_.mu_j();
        double jump_log = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double g = 0.0;
            for (std::size_t j = 0; j <= i; ++j) g += cov_.chol[i * d + j] * draws.z[j];
            jump_log += draws.jump_count[i] * mu_j + params_.sigma_j * sign * draws.jump_zsum[i];
            s_out[i] = s0 * std::exp(drift_[i] + sign * g + jump_log);
        }
    }

  private:
    ModelParams params_;
    std::vector<double> dates_;
    GaussianCov cov_;
    std::vector<double> drift_;
    std::vector<double> interval_len_;
};

/// Batched fixed-order payoff accumulation shared by all estimators.  The
/// payoff receives spot values at the contract dates renormalized so the
/// window start carries exactly s0.
template <typename PayoffFn>
McEstimate run_estimator(const ModelParams& params, double s0, double t_start,
                         std::vector<double> contract_dates, const McConfig& config,
                         PayoffFn&& payoff) {
    params.validate();
    config.validate();
    if (!(s0 > 0.0)) throw std::invalid_argument("monte carlo: s0 must be > 0");

    std::vector<double> all_dates;
    const bool explicit_start = t_start > 0.0;
    if (explicit_start) all_dates.push_back(t_start);
    for (double t : contract_dates) all_dates.push_back(t);

    const PathSampler sampler(params, std::move(all_dates));
    const std::size_t d = static_cast<std::size_t>(sampler.dim());
    const std::size_t n_contract = contract_dates.size();

    PathSampler::Draws draws;
    std::vector<double> s_all(d);
    std::vector<double> s_eff(n_contract);

    const std::int64_t n_samples = config.antithetic ? config.paths / 2 : config.paths;
    // Sums are accumulated relative to the first sample: shift-invariant for
    // the variance, and a degenerate model yields an exact zero error.
    double shift = 0.0;
    double total = 0.0, total_sq = 0.0;
    double batch_sum = 0.0, batch_sum_sq = 0.0;
    std::int64_t in_batch = 0;

    for (std::int64_t p = 0; p < n_samples; ++p) {
        PathRng rng(config.seed, static_cast<std::uint64_t>(p));
        sampler.draw(rng, draws);

        double sample = 0.0;
        const int mirrors = config.antithetic ? 2 : 1;
        for (int m = 0; m < mirrors; ++m) {
            const double sign = m == 0 ? 1.0 : -1.0;
            sampler.assemble(draws, s0, sign, s_all);
            const double start_value = explicit_start ? s_all[0] : s0;
            for (std::size_t i = 0; i < n_contract; ++i)
                s_eff[i] = s0 * (s_all[i + (explicit_start ? 1 : 0)] / start_value);
            sample += payoff(std::span<const double>(s_eff));
        }
        sample /= mirrors;

        if (p == 0) shift = sample;
        const double centered = sample - shift;
        batch_sum += centered;
        batch_sum_sq += centered * centered;
        if (++in_batch == config.batch) {
            total += batch_sum;
            total_sq += batch_sum_sq;
            batch_sum = batch_sum_sq = 0.0;
            in_batch = 0;
        }
    }
    total += batch_sum;
    total_sq += batch_sum_sq;

    McEstimate est;
    est.paths = config.paths;
    est.mean = shift + total / static_cast<double>(n_samples);
    if (n_samples > 1) {
        const double var =
            std::max(0.0, (total_sq - total * total / static_cast<double>(n_samples)) /
                              static_cast<double>(n_samples - 1));
        est.std_error = std::sqrt(var / static_cast<double>(n_samples));
    }
    return est;
}

} // namespace detail

/// Terminal asset values for `paths` realizations at the given absolute
/// dates (no antithetic mirroring; every path owns substream `path index`).
struct TerminalPaths {
    std::vector<double> dates;
    std::int64_t paths = 0;
    std::vector<double> values; ///< row-major paths x dates

    double at(std::int64_t path, int date) const {
        return values[static_cast<std::size_t>(path) * dates.size() + static_cast<std::size_t>(date)];
    }
};

inline TerminalPaths simulate_terminal_values(const ModelParams& params, double s0,
                                              std::span<const double> dates,
                                              const McConfig& config) {
    params.validate();
    config.validate();
    if (!(s0 > 0.0)) throw std::invalid_argument("simulate_terminal_values: s0 must be > 0");

    const detail::PathSampler sampler(params, std::vector<double>(dates.begin(), dates.end()));
    TerminalPaths out;
    out.dates.assign(dates.begin(), dates.end());
    out.paths = config.paths;
    out.values.resize(static_cast<std::size_t>(config.paths) * dates.size());

    detail::PathSampler::Draws draws;
    for (std::int64_t p = 0; p < config.paths; ++p) {
        detail::PathRng rng(config.seed, static_cast<std::uint64_t>(p));
        sampler.draw(rng, draws);
        sampler.assemble(draws, s0, 1.0,
                         std::span<double>(out.values).subspan(
                             static_cast<std::size_t>(p) * dates.size(), dates.size()));
    }
    return out;
}

/// Discounted-payoff estimate for the European call.
inline McEstimate mc_vanilla_price(const ModelParams& params, double s0,
                                   const VanillaCallSpec& spec, const McConfig& config) {
    spec.validate();
    const double t0 = spec.window.t_start;
    const double df = std::exp(-params.r * spec.window.dt());
    return detail::run_estimator(params, s0, t0, {spec.window.t_end}, config,
                                 [&](std::span<const double> s) {
                                     return df * std::max(0.0, s[0] - spec.strike);
                                 });
}

/// Compound call estimate.  The default mode applies the analytic inner-call
/// value to the simulated spot at T1 (testing the outer layer against the
/// exact T1 marginal); nested mode simulates the T2 payoff conditional on
/// {S_{T1} > S1*}.
inline McEstimate mc_compound_price(const ModelParams& params, double s0,
                                    const CompoundCallSpec& spec, const McConfig& config,
                                    const SeriesControl& control = {},
                                    McMode mode = McMode::analytic_inner) {
    spec.validate();
    const double t0 = spec.valuation_time;
    const double df1 = std::exp(-params.r * (spec.outer_expiry - t0));

    if (mode == McMode::analytic_inner) {
        const CallPriceCurve inner(params,
                                   {spec.inner_strike, {spec.outer_expiry, spec.inner_expiry}},
                                   control);
        return detail::run_estimator(params, s0, t0, {spec.outer_expiry}, config,
                                     [&](std::span<const double> s) {
                                         return df1 * std::max(0.0, inner(s[0]) - spec.outer_strike);
                                     });
    }

    const double s_crit = critical_price(params, spec, control).value;
    const double df2 = std::exp(-params.r * (spec.inner_expiry - t0));
    return detail::run_estimator(
        params, s0, t0, {spec.outer_expiry, spec.inner_expiry}, config,
        [&](std::span<const double> s) {
            if (!(s[0] > s_crit)) return 0.0;
            return df2 * std::max(0.0, s[1] - spec.inner_strike) - df1 * spec.outer_strike;
        });
}

/// Extendible call estimate applying the abandon/extend/exercise cases at T1.
inline McEstimate mc_extendible_price(const ModelParams& params, double s0,
                                      const ExtendibleCallSpec& spec, const McConfig& config,
                                      const SeriesControl& control = {},
                                      McMode mode = McMode::analytic_inner) {
    spec.validate();
    double level_l, level_m;
    if (spec.critical_values)
        std::tie(level_l, level_m) = *spec.critical_values;
    else
        std::tie(level_l, level_m) = critical_values(params, spec, control);

    const double t0 = spec.valuation_time;
    const double df1 = std::exp(-params.r * (spec.expiry1 - t0));

    if (mode == McMode::analytic_inner) {
        const CallPriceCurve cont(params, {spec.strike2, {spec.expiry1, spec.expiry2}}, control);
        return detail::run_estimator(params, s0, t0, {spec.expiry1}, config,
                                     [&](std::span<const double> s) {
                                         if (s[0] > level_m) return df1 * (s[0] - spec.strike1);
                                         if (s[0] >= level_l) return df1 * (cont(s[0]) - spec.premium);
                                         return 0.0;
                                     });
    }

    const double df2 = std::exp(-params.r * (spec.expiry2 - t0));
    return detail::run_estimator(params, s0, t0, {spec.expiry1, spec.expiry2}, config,
                                 [&](std::span<const double> s) {
                                     if (s[0] > level_m) return df1 * (s[0] - spec.strike1);
                                     if (s[0] >= level_l)
                                         return df2 * std::max(0.0, s[1] - spec.strike2) -
                                                df1 * spec.premium;
                                     return 0.0;
                                 });
}

/// Semi-analytic estimate for the N-extendible schedule: the first decision
/// is simulated, deeper stages enter through their analytic value.
inline McEstimate mc_n_extendible_price(const ModelParams& params, double s0,
                                        const NExtendibleSpec& spec, const McConfig& config,
                                        const SeriesControl& control = {}) {
    params.validate();
    spec.validate();
    const double t0 = spec.valuation_time;
    const double t1 = spec.stages.front().expiry;
    const double k1 = spec.stages.front().strike;
    const double df1 = std::exp(-params.r * (t1 - t0));

    if (spec.extensions() == 0) {
        return detail::run_estimator(params, s0, t0, {t1}, config, [&](std::span<const double> s) {
            return df1 * std::max(0.0, s[0] - k1);
        });
    }

    const std::vector<detail::StageLevels> levels =
        detail::solve_schedule_levels(params, spec, control, 1e-10);
    const std::span<const NExtendibleSpec::Stage> tail(spec.stages.data() + 1,
                                                       spec.stages.size() - 1);
    const std::span<const detail::StageLevels> tail_levels(levels.data() + 1, levels.size() - 1);
    const double premium2 = spec.stages[1].premium;

    return detail::run_estimator(
        params, s0, t0, {t1}, config, [&](std::span<const double> s) {
            if (s[0] > levels[0].m) return df1 * (s[0] - k1);
            if (s[0] >= levels[0].l) {
                const double cont =
                    detail::n_extendible_value(params, s[0], tail, tail_levels, t1, control).value;
                return df1 * (cont - premium2);
            }
            return 0.0;
        });
}

} // namespace jmfbm
