#pragma once

#include <limits>

namespace topicbench::stats {

inline constexpr double kInfiniteDf = std::numeric_limits<double>::infinity();

/// P(Q <= q) for the studentized range of `groups` normal means with `df`
/// error degrees of freedom (df may be kInfiniteDf).
double studentized_range_cdf(double q, int groups, double df);

/// Upper tail 1 - P(Q <= q), computed without cancellation for large q.
double studentized_range_sf(double q, int groups, double df);

/// Inverse of studentized_range_cdf.
double studentized_range_quantile(double p, int groups, double df);

double f_sf(double f, double df1, double df2);
double t_two_sided(double t, double df);
double chi_squared_sf(double x, double df);
double normal_two_sided(double z);

}  // namespace topicbench::stats
