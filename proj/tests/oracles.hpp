#pragma once

// Reference values computed without the library: Gaussian closed forms for the
// OU flow and a composite Simpson rule in long double.

#include <cmath>
#include <functional>

namespace oracle {

inline double ou_mean(double m0, double t) { return m0 * std::exp(-t); }
inline double ou_variance(double v0, double t) { return 0.5 + (v0 - 0.5) * std::exp(-2.0 * t); }

// KL(N(m, v) || N(0, 1/2)).
inline double gaussian_kl(double m, double v) { return 0.5 * (2.0 * v + 2.0 * m * m - 1.0 - std::log(2.0 * v)); }

// Relative Fisher information of N(m, v) against N(0, 1/2).
inline double gaussian_fisher(double m, double v) {
    const double a = 2.0 - 1.0 / v;
    return a * a * v + 4.0 * m * m;
}

inline double ou_entropy(double m0, double v0, double t) { return gaussian_kl(ou_mean(m0, t), ou_variance(v0, t)); }

inline double gaussian_pdf(double x, double m, double v) {
    return std::exp(-(x - m) * (x - m) / (2.0 * v)) / std::sqrt(2.0 * M_PI * v);
}

inline long double simpson(const std::function<long double(long double)>& f, long double a, long double b,
                           long n) {
    if (n % 2 != 0) ++n;
    const long double h = (b - a) / n;
    long double s = f(a) + f(b);
    for (long i = 1; i < n; ++i) s += (i % 2 == 1 ? 4.0L : 2.0L) * f(a + i * h);
    return s * h / 3.0L;
}

}  // namespace oracle
