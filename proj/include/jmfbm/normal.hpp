#pragma once

// Normal distribution machinery: univariate, bivariate and small-dimension
// multivariate CDFs.  +/-infinity upper limits are first-class inputs
// throughout so pricing code can express degenerate thresholds without
// branching.
//
// The bivariate CDF follows Genz's rearrangement of the Drezner-Wesolowsky
// single integral: Gauss-Legendre quadrature on the arcsin form for
// |rho| <= 0.925 and the complementary sqrt(1-rho^2) expansion near unit
// correlation.  Dimensions 3 and 4 are reduced by conditioning on the
// variable with the smallest limit and integrating the conditional CDF with
// deterministic adaptive quadrature.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace jmfbm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) * (0.5 * std::numbers::sqrt2 * std::numbers::inv_sqrtpi);
}

/// Standard normal CDF via the complementary error function; absolute error
/// is at the level of a few ulp across the whole real line.
inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

namespace detail {

/// Gauss-Legendre nodes and weights on [-1, 1], generated once per order by
/// Newton iteration on the Legendre recurrence.
struct GaussLegendre {
    std::vector<double> node;
    std::vector<double> weight;

    explicit GaussLegendre(int n) : node(n), weight(n) {
        for (int i = 0; i < n; ++i) {
            // Tricomi initial guess, then Newton.
            double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int j = 2; j <= n; ++j) {
                    const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            node[i] = x;
            weight[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }
};

inline const GaussLegendre& gl24() {
    static const GaussLegendre rule(24);
    return rule;
}

inline const GaussLegendre& gl20() {
    static const GaussLegendre rule(20);
    return rule;
}

inline const GaussLegendre& gl16() {
    static const GaussLegendre rule(16);
    return rule;
}

/// Upper-orthant bivariate probability P(X > h, Y > k) for |rho| > 0.925,
/// after Genz: the rho-derivative identity is integrated in s = sqrt(1-rho^2)
/// with the smooth part expanded to fourth order and integrated in closed
/// form, leaving a tiny numerically integrated remainder.
inline double bvn_upper_high_rho(double h, double k, double rho) {
    const double two_pi = 2.0 * std::numbers::pi;
    double hk = h * k;
    double bvn = 0.0;
    if (rho < 0.0) {
        k = -k;
        hk = -hk;
    }
    const double as = (1.0 - rho) * (1.0 + rho);
    const double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    double asr = -(bs / as + hk) / 2.0;
    if (asr > -100.0)
        bvn = a * std::exp(asr) *
              (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (-hk < 100.0) {
        const double b = std::sqrt(bs);
        bvn -= std::exp(-hk / 2.0) * std::sqrt(two_pi) * norm_cdf(-b / a) * b *
               (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    const double half_a = a / 2.0;
    const auto& rule = gl20();
    for (std::size_t i = 0; i < rule.node.size(); ++i) {
        const double xs = std::pow(half_a * (rule.node[i] + 1.0), 2);
        const double rs = std::sqrt(1.0 - xs);
        asr = -(bs / xs + hk) / 2.0;
        if (asr > -100.0)
            bvn += half_a * rule.weight[i] * std::exp(asr) *
                   (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                    (1.0 + c * xs * (1.0 + d * xs)));
    }
    bvn = -bvn / two_pi;
    if (rho > 0.0) {
        bvn += norm_cdf(-std::max(h, k));
    } else {
        bvn = -bvn;
        if (k > h) bvn += norm_cdf(k) - norm_cdf(h);
    }
    return std::clamp(bvn, 0.0, 1.0);
}

} // namespace detail

/// Standard bivariate normal CDF P(X <= x, Y <= y) with correlation rho.
/// Absolute error is below 5e-14 over the full parameter range.
inline double binorm_cdf(double x, double y, double rho) {
    if (!(std::abs(rho) <= 1.0)) throw std::invalid_argument("binorm_cdf: |rho| must be <= 1");
    if (x == -kInf || y == -kInf) return 0.0;
    if (x == kInf) return norm_cdf(y);
    if (y == kInf) return norm_cdf(x);
    if (y < x) std::swap(x, y); // canonical order keeps the symmetry bit-exact
    if (rho == 1.0) return norm_cdf(std::min(x, y));
    if (rho == -1.0) return std::max(0.0, norm_cdf(x) + norm_cdf(y) - 1.0);
    if (rho == 0.0) return norm_cdf(x) * norm_cdf(y);

    if (std::abs(rho) <= 0.925) {
        // Phi(x)*Phi(y) + (1/2pi) Int_0^{asin rho} exp((xy sin t - (x^2+y^2)/2)
        //                                             / cos^2 t) dt
        const double hs = 0.5 * (x * x + y * y);
        const double asr = std::asin(rho);
        const auto& rule = detail::gl24();
        double sum = 0.0;
        for (std::size_t i = 0; i < rule.node.size(); ++i) {
            const double sn = std::sin(asr * 0.5 * (rule.node[i] + 1.0));
            sum += rule.weight[i] * std::exp((sn * x * y - hs) / (1.0 - sn * sn));
        }
        const double val = norm_cdf(x) * norm_cdf(y) +
                           sum * asr / (4.0 * std::numbers::pi);
        return std::clamp(val, 0.0, 1.0);
    }
    // P(X <= x, Y <= y) = P(-X > -x... ) handled by the upper-orthant routine.
    return detail::bvn_upper_high_rho(-x, -y, rho);
}

/// Symmetric correlation matrix for dimensions 1..4 with unit diagonal.
class CorrelationMatrix {
  public:
    explicit CorrelationMatrix(int dimension) : dim_(dimension) {
        if (dimension < 1 || dimension > 4)
            throw std::invalid_argument("CorrelationMatrix: dimension must be 1..4");
        m_.fill(0.0);
        for (int i = 0; i < dimension; ++i) at(i, i) = 1.0;
    }

    static CorrelationMatrix identity(int dimension) { return CorrelationMatrix(dimension); }

    int dimension() const { return dim_; }

    double operator()(int i, int j) const { return m_[index(i, j)]; }

    void set(int i, int j, double value) {
        if (i == j) {
            if (value != 1.0) throw std::invalid_argument("CorrelationMatrix: diagonal must be 1");
            return;
        }
        if (!(std::abs(value) <= 1.0))
            throw std::invalid_argument("CorrelationMatrix: entries must lie in [-1, 1]");
        m_[index(i, j)] = value;
        m_[index(j, i)] = value;
    }

    /// Positive semidefiniteness check by attempted Cholesky factorization.
    void validate() const {
        std::array<double, 16> l{};
        for (int i = 0; i < dim_; ++i) {
            for (int j = 0; j <= i; ++j) {
                double s = (*this)(i, j);
                for (int p = 0; p < j; ++p) s -= l[i * 4 + p] * l[j * 4 + p];
                if (i == j) {
                    if (s < -1e-12)
                        throw std::domain_error("CorrelationMatrix: not positive semidefinite");
                    l[i * 4 + i] = std::sqrt(std::max(s, 0.0));
                } else {
                    l[i * 4 + j] = l[j * 4 + j] > 0.0 ? s / l[j * 4 + j] : 0.0;
                }
            }
        }
    }

  private:
    double& at(int i, int j) { return m_[index(i, j)]; }

    std::size_t index(int i, int j) const {
        if (i < 0 || j < 0 || i >= dim_ || j >= dim_)
            throw std::out_of_range("CorrelationMatrix: index");
        return static_cast<std::size_t>(i) * 4 + static_cast<std::size_t>(j);
    }

    int dim_;
    std::array<double, 16> m_;
};

namespace detail {

// Integration beyond +/-8.5 standard deviations contributes less than 1e-17.
inline constexpr double kGaussCut = 8.5;

template <typename F>
double composite_gauss(const F& f, double a, double b, double panel_width,
                       const GaussLegendre& rule) {
    const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / panel_width)));
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        double panel_sum = 0.0;
        for (std::size_t i = 0; i < rule.node.size(); ++i)
            panel_sum += rule.weight[i] * f(lo + 0.5 * h * (rule.node[i] + 1.0));
        total += 0.5 * h * panel_sum;
    }
    return total;
}

/// Deterministic quadrature with one step of panel refinement: the coarse
/// pass is accepted once halving the panels moves the result below `tol`.
template <typename F>
double adaptive_gauss(const F& f, double a, double b, double tol) {
    if (!(b > a)) return 0.0;
    double width = 2.5;
    double coarse = composite_gauss(f, a, b, width, gl24());
    for (int level = 0; level < 3; ++level) {
        width *= 0.5;
        const double fine = composite_gauss(f, a, b, width, gl24());
        if (std::abs(fine - coarse) <= tol) return fine;
        coarse = fine;
    }
    return coarse;
}

inline double multinorm_impl(std::vector<double> upper, CorrelationMatrix corr, double tol,
                             bool inner);

/// One conditioning step: integrate out the variable with the smallest upper
/// limit and recurse on the conditional (d-1)-dimensional CDF.
inline double multinorm_condition(const std::vector<double>& upper, const CorrelationMatrix& corr,
                                  double tol, bool inner) {
    const int d = static_cast<int>(upper.size());
    // Condition on the variable with the smallest limit; short integration
    // ranges keep the quadrature cheap and well scaled.
    int lead = 0;
    for (int i = 1; i < d; ++i)
        if (upper[i] < upper[lead]) lead = i;

    std::vector<int> rest;
    rest.reserve(d - 1);
    for (int i = 0; i < d; ++i)
        if (i != lead) rest.push_back(i);

    // Exactly correlated companions fold into hard limits on the integration
    // variable instead of entering the conditional law.
    double t_hi = std::min(upper[lead], kGaussCut);
    double t_lo = -kGaussCut;
    std::vector<int> active;
    for (int i : rest) {
        const double r = corr(lead, i);
        if (r == 1.0)
            t_hi = std::min(t_hi, upper[i]);
        else if (r == -1.0)
            t_lo = std::max(t_lo, -upper[i]);
        else
            active.push_back(i);
    }
    if (!(t_lo < t_hi)) return 0.0;

    if (active.empty()) return std::max(0.0, norm_cdf(t_hi) - norm_cdf(t_lo));

    const int dr = static_cast<int>(active.size());
    std::vector<double> denom(dr);
    CorrelationMatrix sub(dr);
    for (int a = 0; a < dr; ++a) denom[a] = std::sqrt(1.0 - corr(lead, active[a]) * corr(lead, active[a]));
    for (int a = 0; a < dr; ++a)
        for (int b = a + 1; b < dr; ++b) {
            const double num = corr(active[a], active[b]) -
                               corr(lead, active[a]) * corr(lead, active[b]);
            double rc = num / (denom[a] * denom[b]);
            rc = std::clamp(rc, -1.0, 1.0);
            sub.set(a, b, rc);
        }

    const auto integrand = [&](double t) {
        std::vector<double> cond(dr);
        for (int a = 0; a < dr; ++a) {
            const int i = active[a];
            cond[a] = upper[i] == kInf ? kInf : (upper[i] - corr(lead, i) * t) / denom[a];
        }
        return norm_pdf(t) * multinorm_impl(std::move(cond), sub, 0.0, /*inner=*/true);
    };
    // Recursive integrands run a single composite pass; the top level keeps
    // the panel-refinement confirmation.
    if (inner) return composite_gauss(integrand, t_lo, t_hi, 2.0, gl16());
    return adaptive_gauss(integrand, t_lo, t_hi, tol);
}

inline double multinorm_impl(std::vector<double> upper, CorrelationMatrix corr, double tol,
                             bool inner) {
    // Drop +inf limits (they do not constrain) by rebuilding the reduced
    // problem; -inf limits force probability zero.
    const int d = static_cast<int>(upper.size());
    std::vector<int> keep;
    for (int i = 0; i < d; ++i) {
        if (upper[i] == -kInf) return 0.0;
        if (upper[i] != kInf) keep.push_back(i);
    }
    if (keep.empty()) return 1.0;
    if (static_cast<int>(keep.size()) != d) {
        std::vector<double> u2;
        CorrelationMatrix c2(static_cast<int>(keep.size()));
        for (std::size_t a = 0; a < keep.size(); ++a) {
            u2.push_back(upper[keep[a]]);
            for (std::size_t b = a + 1; b < keep.size(); ++b)
                c2.set(static_cast<int>(a), static_cast<int>(b), corr(keep[a], keep[b]));
        }
        return multinorm_impl(std::move(u2), c2, tol, inner);
    }

    switch (d) {
        case 1:
            return norm_cdf(upper[0]);
        case 2:
            return binorm_cdf(upper[0], upper[1], corr(0, 1));
        case 3:
            return multinorm_condition(upper, corr, tol > 0.0 ? tol : 1e-10, inner);
        default:
            return multinorm_condition(upper, corr, tol > 0.0 ? tol : 1e-9, inner);
    }
}

} // namespace detail

/// Multivariate normal CDF P(X_i <= upper_i) for dimension <= 4 with a fixed
/// deterministic accuracy budget (absolute error well below 1e-8).
inline double multinorm_cdf(std::span<const double> upper, const CorrelationMatrix& corr) {
    if (static_cast<int>(upper.size()) != corr.dimension())
        throw std::invalid_argument("multinorm_cdf: dimension mismatch");
    if (corr.dimension() > 4) throw std::invalid_argument("multinorm_cdf: dimension > 4 unsupported");
    corr.validate();
    const double p = detail::multinorm_impl(std::vector<double>(upper.begin(), upper.end()), corr,
                                            0.0, /*inner=*/false);
    return std::clamp(p, 0.0, 1.0);
}

/// Rectangle probability P(lower_i <= X_i <= upper_i) by inclusion-exclusion
/// over the 2^d corners of the box.  +/-inf bounds are permitted.
inline double multinorm_rectangle(std::span<const double> lower, std::span<const double> upper,
                                  const CorrelationMatrix& corr) {
    const int d = corr.dimension();
    if (static_cast<int>(lower.size()) != d || static_cast<int>(upper.size()) != d)
        throw std::invalid_argument("multinorm_rectangle: dimension mismatch");
    for (int i = 0; i < d; ++i)
        if (!(lower[i] <= upper[i])) return 0.0;

    double p = 0.0;
    for (unsigned corner = 0; corner < (1u << d); ++corner) {
        std::vector<double> point(static_cast<std::size_t>(d));
        int sign = 1;
        for (int i = 0; i < d; ++i) {
            if (corner & (1u << i)) {
                point[static_cast<std::size_t>(i)] = lower[i];
                sign = -sign;
            } else {
                point[static_cast<std::size_t>(i)] = upper[i];
            }
        }
        if (std::any_of(point.begin(), point.end(), [](double v) { return v == -kInf; })) {
            continue; // corner has probability zero
        }
        p += sign * multinorm_cdf(point, corr);
    }
    return std::clamp(p, 0.0, 1.0);
}

} // namespace jmfbm
