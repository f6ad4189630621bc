#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace ccv {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// Standard normal pdf/cdf. The cdf goes through erfc so the left tail keeps
// full relative accuracy down to ~1e-300.
inline double norm_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

// log Phi(x), stays accurate deep into the left tail where the cdf underflows.
inline double log_norm_cdf(double x) {
    if (x > -30.0) {
        double c = norm_cdf(x);
        if (c > 0.0) return std::log(c);
    }
    // asymptotic expansion: Phi(x) ~ phi(x)/(-x) * (1 - 1/x^2 + 3/x^4 - 15/x^6)
    double x2 = x * x;
    double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return -0.5 * x2 - kLogSqrt2Pi - std::log(-x) + std::log(series);
}

// Inverse standard normal cdf, Wichura's AS241 (PPND16), ~1e-15 absolute.
inline double inv_norm_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inv_norm_cdf: p outside (0,1)");
    double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        double r = 0.180625 - q * q;
        return q *
               (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                    45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
                 133.14166789178437745) * r + 3.387132872796366608) /
               (((((((5226.495278852545703 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                    21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
                 42.313330701600911252) * r + 1.0);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                   1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
                4.6303378461565452959) * r + 1.42343711074968357734) /
              (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                   0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
                2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                   0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
                5.4637849111641143699) * r + 6.6579046435011037772) /
              (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                   7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
                0.59983220655588793769) * r + 1.0);
    }
    return (q < 0.0) ? -val : val;
}

inline double log_sum_exp(std::span<const double> xs) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

inline double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double log_binom(int64_t n, int64_t k) {
    if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
    return std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) - std::lgamma(double(n - k) + 1.0);
}

// Adaptive Simpson quadrature with absolute tolerance.
namespace detail {
template <class F>
double simpson_step(const F& f, double a, double fa, double b, double fb, double m, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adapt(const F& f, double a, double fa, double b, double fb, double m, double fm, double whole, double tol,
             int depth) {
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = simpson_step(f, a, fa, m, fm, lm, flm);
    double right = simpson_step(f, m, fm, b, fb, rm, frm);
    double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adapt(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           adapt(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

template <class F>
double integrate_adaptive(const F& f, double a, double b, double abs_tol, int max_depth = 40) {
    if (!(b > a)) return 0.0;
    // seed with a handful of panels so narrow features are not stepped over
    const int panels = 16;
    double h = (b - a) / panels;
    double total = 0.0;
    for (int i = 0; i < panels; ++i) {
        double x0 = a + i * h, x1 = x0 + h, xm = 0.5 * (x0 + x1);
        double f0 = f(x0), f1 = f(x1), fm = f(xm);
        double whole = detail::simpson_step(f, x0, f0, x1, f1, xm, fm);
        total += detail::adapt(f, x0, f0, x1, f1, xm, fm, whole, abs_tol / panels, max_depth);
    }
    return total;
}

// Nelder-Mead on a small dimension, deterministic.
template <class F>
std::vector<double> nelder_mead(const F& f, std::vector<double> x0, double step, int max_iter, double ftol) {
    const size_t d = x0.size();
    std::vector<std::vector<double>> sim(d + 1, x0);
    std::vector<double> fv(d + 1);
    for (size_t i = 0; i < d; ++i) sim[i + 1][i] += step;
    for (size_t i = 0; i <= d; ++i) fv[i] = f(sim[i]);
    for (int it = 0; it < max_iter; ++it) {
        // order
        std::vector<size_t> idx(d + 1);
        for (size_t i = 0; i <= d; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return fv[a] < fv[b]; });
        std::vector<std::vector<double>> s2;
        std::vector<double> f2;
        for (size_t i = 0; i <= d; ++i) {
            s2.push_back(sim[idx[i]]);
            f2.push_back(fv[idx[i]]);
        }
        sim.swap(s2);
        fv.swap(f2);
        if (std::fabs(fv[d] - fv[0]) < ftol) break;
        std::vector<double> cen(d, 0.0);
        for (size_t i = 0; i < d; ++i)
            for (size_t j = 0; j < d; ++j) cen[j] += sim[i][j] / double(d);
        auto blend = [&](double t) {
            std::vector<double> y(d);
            for (size_t j = 0; j < d; ++j) y[j] = cen[j] + t * (sim[d][j] - cen[j]);
            return y;
        };
        auto xr = blend(-1.0);
        double fr = f(xr);
        if (fr < fv[0]) {
            auto xe = blend(-2.0);
            double fe = f(xe);
            if (fe < fr) { sim[d] = xe; fv[d] = fe; }
            else { sim[d] = xr; fv[d] = fr; }
        } else if (fr < fv[d - 1]) {
            sim[d] = xr; fv[d] = fr;
        } else {
            auto xc = blend(fr < fv[d] ? -0.5 : 0.5);
            double fc = f(xc);
            if (fc < std::min(fr, fv[d])) { sim[d] = xc; fv[d] = fc; }
            else {
                for (size_t i = 1; i <= d; ++i) {
                    for (size_t j = 0; j < d; ++j) sim[i][j] = sim[0][j] + 0.5 * (sim[i][j] - sim[0][j]);
                    fv[i] = f(sim[i]);
                }
            }
        }
    }
    size_t best = 0;
    for (size_t i = 1; i <= d; ++i)
        if (fv[i] < fv[best]) best = i;
    return sim[best];
}

}  // namespace ccv
