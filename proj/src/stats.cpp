#include "forkpath/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "forkpath/error.hpp"

namespace forkpath::stats {

double mean(std::span<const double> v) {
    if (v.empty()) throw DomainError("mean of an empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double variance_pop(std::span<const double> v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

double sd_sample(std::span<const double> v) {
    if (v.size() < 2) throw DomainError("sample standard deviation needs at least 2 values");
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double normal_cdf(double x) {
    if (std::isnan(x)) return x;
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    return boost::math::cdf(boost::math::normal_distribution<double>(), x);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw DomainError("normal quantile needs p in [0, 1]");
    }
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double student_cdf(double x, double nu) {
    if (!(nu > 0.0)) throw DomainError("Student-t needs positive degrees of freedom");
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    return boost::math::cdf(boost::math::students_t_distribution<double>(nu), x);
}

double student_quantile(double p, double nu) {
    if (!(nu > 0.0)) throw DomainError("Student-t needs positive degrees of freedom");
    if (!(p > 0.0 && p < 1.0)) throw DomainError("Student-t quantile needs p in (0, 1)");
    return boost::math::quantile(boost::math::students_t_distribution<double>(nu), p);
}

double two_sided_p(double t, double nu) {
    if (std::isnan(t)) return t;
    const double a = std::abs(t);
    const double tail = nu > 0.0 ? 1.0 - student_cdf(a, nu) : 1.0 - normal_cdf(a);
    return std::min(1.0, 2.0 * tail);
}

double quantile_sorted(std::span<const double> sorted, double level) {
    if (sorted.empty()) throw DomainError("quantile of an empty sample");
    if (!(level >= 0.0 && level <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * level;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> v, double level) {
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    return quantile_sorted(s, level);
}

}  // namespace forkpath::stats
