#pragma once
// Shared numeric helpers: normal distribution, normal quantile, Wilson
// intervals, Kolmogorov-Smirnov critical values.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

namespace perpetua::mathutil {

inline double norm_pdf(double t) {
    return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
}

inline double norm_cdf(double t) {
    return 0.5 * std::erfc(-t / std::numbers::sqrt2);
}

inline double norm_sf(double t) {
    return 0.5 * std::erfc(t / std::numbers::sqrt2);
}

// Acklam's inverse normal CDF with one Halley refinement.
inline double inv_norm_cdf(double p) {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
            q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
              c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = norm_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

// two-sided z for a given confidence level, e.g. 0.99 -> 2.5758...
inline double z_value(double confidence) {
    return inv_norm_cdf(0.5 * (1.0 + confidence));
}

// Wilson score interval for k successes out of n.
inline std::pair<double, double> wilson_interval(uint64_t k, uint64_t n,
                                                 double z) {
    if (n == 0) return {0.0, 1.0};
    const double nn = static_cast<double>(n);
    const double phat = static_cast<double>(k) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (phat + z2 / (2.0 * nn)) / denom;
    const double half =
        z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
    const double lo = center - half, hi = center + half;
    return {lo < 0 ? 0 : lo, hi > 1 ? 1 : hi};
}

// Asymptotic Kolmogorov-Smirnov critical values.
inline double ks_coefficient(double alpha) {
    return std::sqrt(-0.5 * std::log(alpha / 2.0));
}

inline double ks_critical_one_sample(double alpha, uint64_t n) {
    return ks_coefficient(alpha) / std::sqrt(static_cast<double>(n));
}

inline double ks_critical_two_sample(double alpha, uint64_t n, uint64_t m) {
    const double nn = static_cast<double>(n), mm = static_cast<double>(m);
    return ks_coefficient(alpha) * std::sqrt((nn + mm) / (nn * mm));
}

// Two-sample KS statistic; both inputs must be sorted ascending.
inline double ks_two_sample_sorted(const std::vector<double>& a,
                                   const std::vector<double>& b) {
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    size_t i = 0, j = 0;
    double d = 0;
    while (i < a.size() && j < b.size()) {
        const double v = a[i] < b[j] ? a[i] : b[j];
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / na -
                                  static_cast<double>(j) / nb));
    }
    return d;
}

}  // namespace perpetua::mathutil
