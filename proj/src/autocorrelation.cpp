#include "panelpower/autocorrelation.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "panelpower/error.hpp"

namespace panelpower {

double Correlation::between(std::span<const double> times, std::size_t i, std::size_t j) const {
    if (i == j) return 1.0;
    if (structure == CorrStructure::Constant) return coefficient;
    return std::pow(coefficient, std::abs(times[j] - times[i]));
}

namespace {

// Pre-periods occupy [0, pre), post-periods [pre, P).
struct Window {
    std::size_t pre;
    std::size_t periods;
};

Window window_of(std::span<const double> times, int start_period) {
    return {static_cast<std::size_t>(start_period - 1), times.size()};
}

std::size_t post_index(std::span<const double> times, int start_period, int period) {
    if (period < start_period || period > static_cast<int>(times.size())) {
        throw PanelPowerError(ErrorCode::NotPostPeriod,
                              "period " + std::to_string(period) + " is not a post-period for a group starting at " +
                                  std::to_string(start_period),
                              "period");
    }
    return static_cast<std::size_t>(period - 1);
}

}  // namespace

BasicAverages basic_averages(std::span<const double> times, int start_period, const Correlation& c) {
    const auto [pre, periods] = window_of(times, start_period);
    const std::size_t post = periods - pre;
    BasicAverages out;
    if (pre >= 2) {
        double s = 0.0;
        for (std::size_t b = 0; b < pre; ++b)
            for (std::size_t b2 = b + 1; b2 < pre; ++b2) s += c.between(times, b, b2);
        out.pre = 2.0 * s / static_cast<double>(pre * (pre - 1));
    }
    if (post >= 2) {
        double s = 0.0;
        for (std::size_t a = pre; a < periods; ++a)
            for (std::size_t a2 = a + 1; a2 < periods; ++a2) s += c.between(times, a, a2);
        out.post = 2.0 * s / static_cast<double>(post * (post - 1));
    }
    double s = 0.0;
    for (std::size_t b = 0; b < pre; ++b)
        for (std::size_t a = pre; a < periods; ++a) s += c.between(times, b, a);
    out.pre_post = s / static_cast<double>(pre * post);
    return out;
}

double point_in_time_pre_post(std::span<const double> times, int start_period, const Correlation& c, int period) {
    const std::size_t q = post_index(times, start_period, period);
    const std::size_t pre = static_cast<std::size_t>(start_period - 1);
    double s = 0.0;
    for (std::size_t b = 0; b < pre; ++b) s += c.between(times, b, q);
    return s / static_cast<double>(pre);
}

double point_in_time_pre_post1(std::span<const double> times, int start_period, const Correlation& c, int period) {
    const std::size_t q = post_index(times, start_period, period);
    const TimeGeometry g = time_geometry(times, start_period);
    const std::size_t pre = static_cast<std::size_t>(g.pre_periods);
    double s = 0.0;
    for (std::size_t b = 0; b < pre; ++b) s += (times[b] - g.mean_time_pre) * c.between(times, b, q);
    return s / static_cast<double>(pre);
}

TrendTerms trend_weighted_terms(std::span<const double> times, int start_period, const Correlation& c) {
    const TimeGeometry g = time_geometry(times, start_period);
    if (g.pre_periods < 2 || g.post_periods < 2) {
        throw PanelPowerError(ErrorCode::DegeneratePeriod,
                              "trend terms need at least two pre- and two post-periods", "S");
    }
    const std::size_t pre = static_cast<std::size_t>(g.pre_periods);
    const std::size_t periods = times.size();
    const double A = g.post_periods;
    const double B = g.pre_periods;
    const double P = static_cast<double>(periods);

    std::vector<double> dev_pre(periods), dev_post(periods), dev_full(periods), post_dev(periods);
    for (std::size_t t = 0; t < periods; ++t) {
        dev_pre[t] = times[t] - g.mean_time_pre;
        dev_post[t] = times[t] - g.mean_time_post;
        dev_full[t] = times[t] - g.mean_time_full;
        post_dev[t] = (t >= pre ? 1.0 : 0.0) - g.post_share;
    }

    TrendTerms out;
    // Diagonal terms of pre2/post2 carry weight sum(dev) = 0 and are left out.
    for (std::size_t b = 0; b < pre; ++b) {
        for (std::size_t b2 = 0; b2 < pre; ++b2) {
            if (b2 == b) continue;
            const double r = c.between(times, b, b2);
            if (b2 > b) out.pre1 += dev_pre[b] * dev_pre[b2] * r;
            out.pre2 += dev_pre[b] * r;
        }
    }
    for (std::size_t a = pre; a < periods; ++a) {
        for (std::size_t a2 = pre; a2 < periods; ++a2) {
            if (a2 == a) continue;
            const double r = c.between(times, a, a2);
            if (a2 > a) out.post1 += dev_post[a] * dev_post[a2] * r;
            out.post2 += dev_post[a] * r;
        }
    }
    for (std::size_t b = 0; b < pre; ++b) {
        for (std::size_t a = pre; a < periods; ++a) {
            const double r = c.between(times, b, a);
            out.pre_post1 += dev_pre[b] * r;
            out.pre_post2 += dev_post[a] * r;
            out.pre_post3 += dev_pre[b] * r;
            out.pre_post4 += dev_post[a] * dev_pre[b] * r;
        }
    }
    for (std::size_t p = 0; p < periods; ++p) {
        for (std::size_t p2 = 0; p2 < periods; ++p2) {
            if (p2 == p) continue;
            const double r = c.between(times, p, p2);
            if (p2 > p) {
                out.full1 += post_dev[p] * post_dev[p2] * r;
                out.full3 += dev_full[p] * dev_full[p2] * r;
            }
            out.full2 += dev_full[p] * post_dev[p2] * r;
        }
    }

    out.pre1 *= 2.0 / (B * (B - 1.0));
    out.pre2 /= B * B;
    out.post1 *= 2.0 / (A * (A - 1.0));
    out.post2 /= A * A;
    out.pre_post1 /= A * B;
    out.pre_post2 /= A * B;
    out.pre_post3 /= A * B;
    out.pre_post4 /= A * B;
    out.full1 *= 2.0 / (P * (P - 1.0));
    out.full2 /= P * (P - 1.0);
    out.full3 *= 2.0 / (P * (P - 1.0));
    return out;
}

}  // namespace panelpower
