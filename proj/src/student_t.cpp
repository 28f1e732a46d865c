#include "panelpower/student_t.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "panelpower/error.hpp"

namespace panelpower {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// lgamma(x) - [(x - 1/2) ln x - x + ln(2 pi)/2], valid for x >= 10.
double stirling_tail(double x) {
    const double x2 = x * x;
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x;
}

// Continued fraction for I_x(a, b), modified Lentz.
double beta_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr int max_iter = 100000;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 4.0 * kEps) return h;
    }
    throw PanelPowerError(ErrorCode::NoConvergence, "incomplete beta continued fraction did not converge");
}

// I_x(a, b) given both x and y = 1 - x, so neither loses precision.
double ibeta(double a, double b, double x, double y) {
    if (x <= 0.0) return 0.0;
    if (y <= 0.0) return 1.0;
    const double log_x = x < 0.5 ? std::log(x) : std::log1p(-y);
    const double log_y = y < 0.5 ? std::log(y) : std::log1p(-x);
    const double front = std::exp(a * log_x + b * log_y - log_beta(a, b));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
    return 1.0 - front * beta_fraction(b, a, y) / b;
}

// Upper tail P(T > t) for t >= 0.
double upper_tail(double t, double df) {
    const double t2 = t * t;
    const double x = df / (df + t2);
    const double y = t2 / (df + t2);
    return 0.5 * ibeta(0.5 * df, 0.5, x, y);
}

// Above this the continued fraction needs very many terms and drifts; the
// asymptotic expansion of the quantile in 1/df is exact to double precision.
constexpr double kLargeDf = 1e5;

// t quantile from the normal quantile z, four terms in 1/df (Hill 1970).
double expanded_quantile(double z, double df) {
    const double z2 = z * z;
    const double g1 = (z2 + 1.0) * z / 4.0;
    const double g2 = ((5.0 * z2 + 16.0) * z2 + 3.0) * z / 96.0;
    const double g3 = (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) * z / 384.0;
    const double g4 = ((((79.0 * z2 + 776.0) * z2 + 1482.0) * z2 - 1920.0) * z2 - 945.0) * z / 92160.0;
    return z + (g1 + (g2 + (g3 + g4 / df) / df) / df) / df;
}

// Inverse of expanded_quantile in z, by Newton from z = t.
double expanded_z(double t, double df) {
    double z = t;
    for (int iter = 0; iter < 50; ++iter) {
        const double h = 1e-6 * std::max(1.0, std::abs(z));
        const double slope = (expanded_quantile(z + h, df) - expanded_quantile(z - h, df)) / (2.0 * h);
        const double step = (expanded_quantile(z, df) - t) / slope;
        z -= step;
        if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(z))) break;
    }
    return z;
}

void check_probability(double p) {
    if (!(p > 0.0 && p < 1.0)) throw PanelPowerError(ErrorCode::POutOfRange, "probability must lie in (0,1)", "p");
}

}  // namespace

double log_beta(double a, double b) {
    if (a < b) std::swap(a, b);
    if (a < 50.0) return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    // Stirling on the large argument avoids cancelling two huge lgamma values.
    return std::lgamma(b) - b * std::log(a) - (a + b - 0.5) * std::log1p(b / a) + b + stirling_tail(a) -
           stirling_tail(a + b);
}

double regularized_incomplete_beta(double a, double b, double x) { return ibeta(a, b, x, 1.0 - x); }

double student_t_pdf(double t, double df) {
    return std::exp(-log_beta(0.5 * df, 0.5) - 0.5 * std::log(df) - 0.5 * (df + 1.0) * std::log1p(t * t / df));
}

double student_t_cdf(double t, double df) {
    if (df >= kLargeDf) return normal_cdf(expanded_z(t, df));
    if (t >= 0.0) return 1.0 - upper_tail(t, df);
    return upper_tail(-t, df);
}

double inverse_student_t(double p, double df) {
    check_probability(p);
    if (!(df > 0.0)) throw PanelPowerError(ErrorCode::NonpositiveDf, "degrees of freedom must be positive", "df");
    if (p == 0.5) return 0.0;
    if (df >= kLargeDf) return expanded_quantile(normal_quantile(p), df);
    // Work with the smaller tail so tiny probabilities keep their digits.
    const double sign = p < 0.5 ? -1.0 : 1.0;
    const double target = p < 0.5 ? p : 1.0 - p;

    // Solve upper_tail(t) = target on t > 0, keeping a bracket [lo, hi].
    double lo = 0.0;
    double hi = 2.0;
    while (upper_tail(hi, df) > target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) return sign * std::numeric_limits<double>::infinity();
    }
    double t = std::clamp(normal_quantile(1.0 - target), lo, hi);
    if (t == lo || t == hi) t = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        const double f = upper_tail(t, df) - target;
        if (f > 0.0) lo = t; else hi = t;
        double next = t + f / student_t_pdf(t, df);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double step = std::abs(next - t);
        t = next;
        if (step <= 1e-14 * std::max(1.0, t) || hi - lo <= 1e-14 * std::max(1.0, t)) break;
    }
    return sign * t;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    check_probability(p);
    if (p == 0.5) return 0.0;
    const double sign = p < 0.5 ? -1.0 : 1.0;
    const double tail = p < 0.5 ? p : 1.0 - p;
    // Rational starting point, then Newton on erfc.
    const double r = std::sqrt(-2.0 * std::log(tail));
    double x = r - (2.515517 + 0.802853 * r + 0.010328 * r * r) /
                       (1.0 + 1.432788 * r + 0.189269 * r * r + 0.001308 * r * r * r);
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (int iter = 0; iter < 50; ++iter) {
        const double upper = 0.5 * std::erfc(x / std::numbers::sqrt2);
        const double density = inv_sqrt_2pi * std::exp(-0.5 * x * x);
        const double step = (upper - tail) / density;
        x += step;
        if (std::abs(step) <= 1e-15 * std::max(1.0, x)) break;
    }
    return sign * x;
}

}  // namespace panelpower
