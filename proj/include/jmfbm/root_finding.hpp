#pragma once

// Safeguarded scalar root finding: geometric bracket expansion plus a
// Brent-style bracket-shrinking solver (inverse quadratic / secant steps with
// a bisection fallback, so convergence is guaranteed on any sign-changing
// bracket).

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace jmfbm {

/// Interval [lo, hi] on which the target function changes sign.
struct Bracket {
    double lo = 0.0;
    double hi = 0.0;
};

struct BracketError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Expand a bracket geometrically around x0 > 0 (halving downward, doubling
/// upward) until the function changes sign.  Throws BracketError after
/// `max_doublings` steps in each direction (default factor 2^60).
template <typename F>
Bracket expand_bracket(F&& f, double x0, int max_doublings = 60) {
    if (!(x0 > 0.0)) throw std::invalid_argument("expand_bracket: x0 must be > 0");
    const double f0 = f(x0);
    if (!std::isfinite(f0)) throw std::runtime_error("expand_bracket: non-finite function value");
    if (f0 == 0.0) return {x0, x0};

    double lo = x0, hi = x0;
    double flo = f0, fhi = f0;
    for (int step = 0; step < max_doublings; ++step) {
        const double next_lo = lo / 2.0;
        const double fl = f(next_lo);
        if (!std::isfinite(fl)) throw std::runtime_error("expand_bracket: non-finite function value");
        if (fl == 0.0) return {next_lo, next_lo};
        if (std::signbit(fl) != std::signbit(flo)) return {next_lo, lo};
        lo = next_lo;
        flo = fl;

        const double next_hi = hi * 2.0;
        const double fh = f(next_hi);
        if (!std::isfinite(fh)) throw std::runtime_error("expand_bracket: non-finite function value");
        if (fh == 0.0) return {next_hi, next_hi};
        if (std::signbit(fh) != std::signbit(fhi)) return {hi, next_hi};
        hi = next_hi;
        fhi = fh;
    }
    throw BracketError("expand_bracket: no sign change within expansion cap");
}

/// Brent's method.  Returns x with |f(x)| <= f_tol or bracket width <= x_tol.
/// Deterministic: identical inputs give bit-identical results.
template <typename F>
double find_root(F&& f, Bracket bracket, double x_tol = 1e-12, double f_tol = 0.0) {
    double a = bracket.lo, b = bracket.hi;
    if (!(a <= b)) throw std::invalid_argument("find_root: bracket.lo must be <= bracket.hi");
    double fa = f(a);
    double fb = f(b);
    if (!std::isfinite(fa) || !std::isfinite(fb))
        throw std::runtime_error("find_root: non-finite function value");
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (std::signbit(fa) == std::signbit(fb))
        throw BracketError("find_root: no sign change across bracket");

    double c = a, fc = fa;
    double d = b - a, e = d;
    for (int iter = 0; iter < 200; ++iter) {
        if (std::abs(fc) < std::abs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol1 = 2.0 * 2.220446049250313e-16 * std::abs(b) + 0.5 * x_tol;
        const double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0.0 || std::abs(fb) <= f_tol) return b;

        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            double p, q2;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * xm * s;
                q2 = 1.0 - s;
            } else {
                const double q = fa / fc;
                const double r = fb / fc;
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
                q2 = (q - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q2 = -q2;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * xm * q2 - std::abs(tol1 * q2), std::abs(e * q2))) {
                e = d;
                d = p / q2;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += std::abs(d) > tol1 ? d : (xm > 0.0 ? tol1 : -tol1);
        fb = f(b);
        if (!std::isfinite(fb)) throw std::runtime_error("find_root: non-finite function value");
        if (std::signbit(fb) == std::signbit(fc)) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    return b;
}

} // namespace jmfbm
