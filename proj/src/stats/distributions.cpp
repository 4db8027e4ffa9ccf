#include "topicbench/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

namespace topicbench::stats {
namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr double kQuadTol = 1e-13;
constexpr unsigned kQuadDepth = 20;
// The outer integral sees the inner one's ~1e-13 quadrature jitter; asking
// for more than this chases noise through every subdivision.
constexpr double kOuterTol = 1e-10;
constexpr unsigned kOuterDepth = 15;
// 1 - range_cdf(w, k) <= k * erfc(w / 2), below 1e-27 at w = 16 for any
// practical k, so the range CDF is 1 in double precision past this point.
constexpr double kRangeSaturation = 16.0;

double phi(double z) {
    static const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * M_PI);
    return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

double Phi(double z) {
    return 0.5 * std::erfc(-z / M_SQRT2);
}

// Phi(z + w) - Phi(z). For small w the difference cancels catastrophically,
// so it is integrated directly as phi(z) * int_0^w exp(-z t - t^2 / 2) dt,
// a smooth integrand that a fixed 10-point rule resolves to full precision.
double normal_bracket(double z, double w) {
    if (w >= 0.5) {
        return Phi(z + w) - Phi(z);
    }
    const auto f = [z](double t) { return std::exp(-z * t - 0.5 * t * t); };
    return phi(z) * boost::math::quadrature::gauss<double, 10>::integrate(f, 0.0, w);
}

// P(range of `groups` iid standard normals <= w).
double range_cdf(double w, int groups) {
    if (w <= 0.0) {
        return 0.0;
    }
    const auto integrand = [w, groups](double z) {
        const double inside = normal_bracket(z, w);
        if (inside <= 0.0) {
            return 0.0;
        }
        return phi(z) * std::pow(inside, groups - 1);
    };
    // phi(z) is below 1e-17 outside [-9, 9]; the bracket vanishes once z + w < -9.
    const double lo = std::max(-9.0, -9.0 - w);
    const double hi = 9.0;
    const double mid = -0.5 * w;  // integrand is symmetric about -w/2
    double total = 0.0;
    if (lo < mid) {
        total += gauss_kronrod<double, 31>::integrate(integrand, lo, mid, kQuadDepth, kQuadTol);
    }
    total += gauss_kronrod<double, 31>::integrate(integrand, std::max(lo, mid), hi, kQuadDepth, kQuadTol);
    return std::clamp(groups * total, 0.0, 1.0);
}

// Density of s = sqrt(chi2_df / df).
double log_scale_density(double s, double df) {
    const double half = 0.5 * df;
    return std::log(2.0) + half * std::log(half) - std::lgamma(half) + (df - 1.0) * std::log(s) -
           half * s * s;
}

}  // namespace

double studentized_range_cdf(double q, int groups, double df) {
    if (groups < 2) {
        throw std::invalid_argument("studentized range needs at least 2 groups");
    }
    if (!(df > 0.0)) {
        throw std::invalid_argument("studentized range needs positive degrees of freedom");
    }
    if (std::isnan(q)) {
        return q;
    }
    if (q <= 0.0) {
        return 0.0;
    }
    if (std::isinf(q)) {
        return 1.0;
    }
    if (std::isinf(df) || df > 1e6) {
        return range_cdf(q, groups);
    }

    const double mode = std::sqrt(std::max(df - 1.0, 0.0) / df);
    const double peak = log_scale_density(std::max(mode, 1e-300), df);
    // Walk outwards from the mode until the density is negligible.
    double hi = std::max(mode, 1.0);
    while (log_scale_density(hi, df) - std::max(peak, 0.0) > -45.0) {
        hi *= 1.25;
    }
    double lo = 0.0;
    if (mode > 0.0) {
        lo = mode;
        while (lo > 1e-12 && log_scale_density(lo, df) - peak > -45.0) {
            lo *= 0.8;
        }
        if (lo <= 1e-12) {
            lo = 0.0;
        }
    }
    const auto integrand = [q, groups, df](double s) {
        if (s <= 0.0) {
            return 0.0;
        }
        return std::exp(log_scale_density(s, df)) * range_cdf(q * s, groups);
    };
    // Past s_one the integrand is the scale density alone; its mass is the
    // chi-square tail P(S > s_one). This keeps huge q from forcing the
    // quadrature to resolve a step near s = 0.
    double tail = 0.0;
    const double s_one = kRangeSaturation / q;
    if (s_one < hi) {
        tail = boost::math::gamma_q(0.5 * df, 0.5 * df * s_one * s_one);
        hi = s_one;
        // The remaining mass is at most P(S < s_one), invisible next to the tail.
        if (hi <= lo || boost::math::gamma_p(0.5 * df, 0.5 * df * s_one * s_one) < 1e-17) {
            return std::clamp(tail, 0.0, 1.0);
        }
    }
    const double split = mode > lo && mode < hi ? mode : 0.5 * (lo + hi);
    double total = tail;
    // The segment mass is at most P(S < hi); only ~1e-18 absolute accuracy
    // matters, so a light segment gets a proportionally looser relative goal.
    const double mass = boost::math::gamma_p(0.5 * df, 0.5 * df * hi * hi);
    const double tol = std::clamp(1e-18 / mass, kOuterTol, 1e-3);
    total += gauss_kronrod<double, 21>::integrate(integrand, lo, split, kOuterDepth, tol);
    total += gauss_kronrod<double, 21>::integrate(integrand, split, hi, kOuterDepth, tol);
    return std::clamp(total, 0.0, 1.0);
}

double studentized_range_sf(double q, int groups, double df) {
    return std::clamp(1.0 - studentized_range_cdf(q, groups, df), 0.0, 1.0);
}

double studentized_range_quantile(double p, int groups, double df) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("quantile probability must lie in (0, 1)");
    }
    double hi = 4.0;
    while (studentized_range_cdf(hi, groups, df) < p) {
        hi *= 2.0;
    }
    double lo = 0.0;
    const auto f = [p, groups, df](double q) { return studentized_range_cdf(q, groups, df) - p; };
    boost::uintmax_t max_iter = 200;
    const auto [a, b] = boost::math::tools::toms748_solve(
        f, lo, hi, f(lo), f(hi), boost::math::tools::eps_tolerance<double>(50), max_iter);
    return 0.5 * (a + b);
}

double f_sf(double f, double df1, double df2) {
    if (std::isnan(f)) {
        return f;
    }
    if (f <= 0.0) {
        return 1.0;
    }
    if (std::isinf(f)) {
        return 0.0;
    }
    return boost::math::cdf(boost::math::complement(boost::math::fisher_f(df1, df2), f));
}

double t_two_sided(double t, double df) {
    if (std::isnan(t)) {
        return t;
    }
    if (std::isinf(t)) {
        return 0.0;
    }
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(
                                   boost::math::students_t(df), std::fabs(t))));
}

double chi_squared_sf(double x, double df) {
    if (std::isnan(x)) {
        return x;
    }
    if (x <= 0.0) {
        return 1.0;
    }
    if (std::isinf(x)) {
        return 0.0;
    }
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), x));
}

double normal_two_sided(double z) {
    return std::min(1.0, std::erfc(std::fabs(z) / M_SQRT2));
}

}  // namespace topicbench::stats
