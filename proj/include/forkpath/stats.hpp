#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace forkpath::stats {

[[nodiscard]] double mean(std::span<const double> v);
/// Divide-by-N variance.
[[nodiscard]] double variance_pop(std::span<const double> v);
/// Divide-by-(N-1) standard deviation.
[[nodiscard]] double sd_sample(std::span<const double> v);

[[nodiscard]] double normal_cdf(double x);
[[nodiscard]] double normal_quantile(double p);
[[nodiscard]] double student_cdf(double x, double nu);
[[nodiscard]] double student_quantile(double p, double nu);
/// Two-sided p-value of a t statistic; nu <= 0 means normal reference.
[[nodiscard]] double two_sided_p(double t, double nu = 0.0);

/// Linear-interpolation sample quantile (Hyndman-Fan type 7).
[[nodiscard]] double quantile(std::span<const double> v, double level);
[[nodiscard]] double quantile_sorted(std::span<const double> sorted, double level);

}  // namespace forkpath::stats
