#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace appusage {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730950488); }

namespace kernels {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 500;

// regularized lower incomplete gamma P(a, x): series for x < a+1, continued
// fraction otherwise
inline double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::domain_error("gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < kMaxIter; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * kEps) break;
        }
        return sum * std::exp(-x + a * std::log(x) - lg);
    }
    // Lentz continued fraction for Q(a, x)
    double b = x + 1.0 - a, c = 1.0 / 1e-300, d = 1.0 / b, h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::fabs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return 1.0 - std::exp(-x + a * std::log(x) - lg) * h;
}

inline double betacf(double a, double b, double x) {
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < 1e-300) d = 1e-300;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < 1e-300) d = 1e-300;
        c = 1.0 + aa / c;
        if (std::fabs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < 1e-300) d = 1e-300;
        c = 1.0 + aa / c;
        if (std::fabs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

// regularized incomplete beta I_x(a, b)
inline double beta_inc(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw std::domain_error("beta_inc: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(ln) * betacf(a, b, x) / a;
    return 1.0 - std::exp(ln) * betacf(b, a, 1.0 - x) / b;
}

}  // namespace kernels

inline double chi2_cdf(double x, double dof) {
    if (x <= 0.0) return 0.0;
    return kernels::gamma_p(dof / 2.0, x / 2.0);
}

inline double t_cdf(double t, double dof) {
    if (t == 0.0) return 0.5;
    const double x = dof / (dof + t * t);
    const double half_tail = 0.5 * kernels::beta_inc(dof / 2.0, 0.5, x);
    return t > 0.0 ? 1.0 - half_tail : half_tail;
}

inline double f_cdf(double x, double d1, double d2) {
    if (x <= 0.0) return 0.0;
    return kernels::beta_inc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2));
}

// two-sided p from a t statistic
inline double t_two_sided_p(double t, double dof) {
    const double p = 2.0 * (1.0 - t_cdf(std::fabs(t), dof));
    return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
}

}  // namespace appusage
