#include "forkpath/mtesting.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "forkpath/error.hpp"
#include "forkpath/parallel.hpp"
#include "forkpath/stats.hpp"

namespace forkpath::mtesting {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kNaN = PathOutcome::nan;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double max_of(const std::vector<double>& sorted_desc) { return sorted_desc.empty() ? kNaN : sorted_desc.front(); }

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) { return splitmix64(splitmix64(seed) ^ index); }

std::vector<std::size_t> block_indices(std::size_t T, std::size_t L, std::uint64_t seed, std::uint64_t replicate) {
    if (L == 0) throw DomainError("block length must be at least 1");
    if (L > T) throw DomainError("block length exceeds the series length");
    std::mt19937_64 rng(stream_seed(seed, replicate));
    std::uniform_int_distribution<std::size_t> start(0, T - L);
    std::vector<std::size_t> rows;
    rows.reserve(T + L);
    while (rows.size() < T) {
        const std::size_t s = start(rng);
        for (std::size_t k = 0; k < L; ++k) rows.push_back(s + k);
    }
    rows.resize(T);
    return rows;
}

MatrixXd bootstrap_replicate(const MatrixXd& series, std::size_t L, std::uint64_t seed, std::uint64_t replicate) {
    const auto rows = block_indices(static_cast<std::size_t>(series.rows()), L, seed, replicate);
    MatrixXd r(series.rows(), series.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) r.row(static_cast<long>(i)) = series.row(static_cast<long>(rows[i]));
    return r;
}

std::vector<MatrixXd> block_bootstrap(const MatrixXd& series, std::size_t L, std::size_t B, std::uint64_t seed) {
    std::vector<MatrixXd> out;
    out.reserve(B);
    for (std::size_t b = 0; b < B; ++b) out.push_back(bootstrap_replicate(series, L, seed, b));
    return out;
}

std::optional<std::vector<double>> replicate_statistics(const MatrixXd& replicate, const VectorXd& benchmark) {
    if (benchmark.size() != replicate.cols()) throw DomainError("benchmark length differs from the column count");
    std::vector<double> t;
    for (long n = 0; n < replicate.cols(); ++n) {
        std::vector<double> x;
        for (long r = 0; r < replicate.rows(); ++r)
            if (std::isfinite(replicate(r, n))) x.push_back(replicate(r, n));
        if (x.size() < 2 || !std::isfinite(benchmark(n))) continue;
        const double sd = stats::sd_sample(x);
        if (!(sd > 0)) return std::nullopt;
        t.push_back(std::sqrt(static_cast<double>(x.size())) * (stats::mean(x) - benchmark(n)) / sd);
    }
    std::sort(t.begin(), t.end(), std::greater<>());
    return t;
}

nlohmann::json MaxStatDistribution::to_json(bool with_maxima) const {
    nlohmann::json j{{"method", kind == "bootstrap" ? "brc" : "emt"},
                     {"kind", kind},
                     {"benchmark", benchmark},
                     {"level", level},
                     {"threshold", std::isfinite(threshold) ? nlohmann::json(threshold) : nlohmann::json()},
                     {"replicates", replicates},
                     {"used", maxima.size()},
                     {"flagged", flagged}};
    if (with_maxima) j["maxima"] = maxima;
    return j;
}

MaxStatDistribution brc(const MatrixXd& series, std::size_t L, std::size_t B, std::uint64_t seed, double level,
                        unsigned jobs) {
    if (B == 0) throw DomainError("bootstrap needs at least one replicate");
    VectorXd mu(series.cols());
    for (long n = 0; n < series.cols(); ++n) {
        double s = 0;
        long c = 0;
        for (long r = 0; r < series.rows(); ++r)
            if (std::isfinite(series(r, n))) s += series(r, n), ++c;
        mu(n) = c ? s / static_cast<double>(c) : kNaN;
    }
    std::vector<double> maxima(B, kNaN);
    std::vector<char> flagged(B, 0);
    parallel_for(B, jobs, [&](std::size_t b) {
        const auto t = replicate_statistics(bootstrap_replicate(series, L, seed, b), mu);
        if (!t || t->empty())
            flagged[b] = 1;
        else
            maxima[b] = max_of(*t);
    });
    MaxStatDistribution d;
    d.kind = "bootstrap";
    d.benchmark = "original";
    d.replicates = B;
    d.level = level;
    for (std::size_t b = 0; b < B; ++b) {
        if (flagged[b])
            d.flagged.push_back(b);
        else
            d.maxima.push_back(maxima[b]);
    }
    if (!d.maxima.empty()) d.threshold = threshold(d.maxima, level);
    return d;
}

Benchmark parse_benchmark(std::string_view s) {
    if (s == "pointwise" || s == "point-wise") return Benchmark::pointwise;
    if (s == "average") return Benchmark::average;
    if (s == "explicit") return Benchmark::explicit_values;
    throw ValidationError("benchmark must be pointwise, average or explicit");
}

VectorXd benchmark_means(const PathMoments& m, Benchmark b, std::optional<std::size_t> reference,
                         const VectorXd& values) {
    const long N = m.mean.cols();
    switch (b) {
        case Benchmark::pointwise: {
            if (!reference || *reference >= static_cast<std::size_t>(m.mean.rows()))
                throw ValidationError("point-wise benchmark needs the default path");
            return m.mean.row(static_cast<long>(*reference)).transpose();
        }
        case Benchmark::average: {
            VectorXd mu(N);
            for (long n = 0; n < N; ++n) {
                double s = 0;
                long c = 0;
                for (long p = 0; p < m.mean.rows(); ++p)
                    if (std::isfinite(m.mean(p, n))) s += m.mean(p, n), ++c;
                mu(n) = c ? s / static_cast<double>(c) : kNaN;
            }
            return mu;
        }
        case Benchmark::explicit_values:
            if (values.size() != N) throw ValidationError("explicit benchmark needs one mean per series");
            return values;
    }
    return {};
}

std::vector<std::vector<double>> emt_statistics(const PathMoments& m, const VectorXd& benchmark) {
    if (benchmark.size() != m.mean.cols()) throw DomainError("benchmark length differs from the series count");
    std::vector<std::vector<double>> out(static_cast<std::size_t>(m.mean.rows()));
    for (long p = 0; p < m.mean.rows(); ++p) {
        auto& t = out[static_cast<std::size_t>(p)];
        for (long n = 0; n < m.mean.cols(); ++n) {
            const double mu = m.mean(p, n), sd = m.sd(p, n), T = m.count(p, n);
            if (!std::isfinite(mu) || !std::isfinite(sd) || !(sd > 0) || !std::isfinite(benchmark(n))) continue;
            t.push_back(std::sqrt(T) * (mu - benchmark(n)) / sd);
        }
        std::sort(t.begin(), t.end(), std::greater<>());
    }
    return out;
}

MaxStatDistribution emt(const PathMoments& m, Benchmark b, std::optional<std::size_t> reference, double level,
                        const VectorXd& values) {
    MaxStatDistribution d;
    d.kind = "path";
    d.benchmark = b == Benchmark::pointwise ? "pointwise" : b == Benchmark::average ? "average" : "explicit";
    d.level = level;
    d.replicates = static_cast<std::size_t>(m.mean.rows());
    const auto stats = emt_statistics(m, benchmark_means(m, b, reference, values));
    for (std::size_t p = 0; p < stats.size(); ++p) {
        if (stats[p].empty())
            d.flagged.push_back(p);
        else
            d.maxima.push_back(stats[p].front());
    }
    if (!d.maxima.empty()) d.threshold = threshold(d.maxima, level);
    return d;
}

PathMoments moments_from_outcomes(const OutcomeSet& set, std::string_view series_layer) {
    const auto& spec = set.spec();
    const std::size_t j = spec.layer_index(series_layer);
    const std::size_t N = spec.layers()[j].size();
    const std::uint64_t stride = spec.stride(j);
    const std::uint64_t rows = spec.path_count() / N;
    PathMoments m;
    m.mean = MatrixXd::Constant(static_cast<long>(rows), static_cast<long>(N), kNaN);
    m.sd = m.mean;
    m.count = m.mean;
    for (const auto& o : spec.layers()[j].options) m.series.push_back(o.id);
    for (std::uint64_t r = 0; r < rows; ++r) m.labels.push_back(r);
    for (const auto& o : set.outcomes()) {
        if (!o.usable() || !std::isfinite(o.b) || !std::isfinite(o.se)) continue;
        const auto n = static_cast<long>((o.path_index / stride) % N);
        const auto r = static_cast<long>(moments_row(spec, series_layer, o.path_index));
        m.mean(r, n) = o.b;
        m.sd(r, n) = o.se * std::sqrt(static_cast<double>(o.n));
        m.count(r, n) = static_cast<double>(o.n);
    }
    return m;
}

std::size_t moments_row(const pathgrid::StudySpec& spec, std::string_view series_layer, std::uint64_t path_index) {
    const std::size_t j = spec.layer_index(series_layer);
    const std::uint64_t N = spec.layers()[j].size(), stride = spec.stride(j);
    return static_cast<std::size_t>(path_index / (stride * N) * stride + path_index % stride);
}

PathMoments moments_from_replicates(const std::vector<MatrixXd>& replicates) {
    if (replicates.empty()) throw DomainError("no replicates");
    const long P = static_cast<long>(replicates.size()), N = replicates[0].cols();
    PathMoments m;
    m.mean.resize(P, N);
    m.sd.resize(P, N);
    m.count.resize(P, N);
    for (long p = 0; p < P; ++p) {
        m.labels.push_back(static_cast<std::uint64_t>(p));
        for (long n = 0; n < N; ++n) {
            std::vector<double> x;
            for (long r = 0; r < replicates[static_cast<std::size_t>(p)].rows(); ++r) {
                const double v = replicates[static_cast<std::size_t>(p)](r, n);
                if (std::isfinite(v)) x.push_back(v);
            }
            m.mean(p, n) = x.empty() ? kNaN : stats::mean(x);
            m.sd(p, n) = x.size() < 2 ? kNaN : stats::sd_sample(x);
            m.count(p, n) = static_cast<double>(x.size());
        }
    }
    for (long n = 0; n < N; ++n) m.series.push_back("s" + std::to_string(n + 1));
    return m;
}

double threshold(std::vector<double> maxima, double level) {
    if (maxima.empty()) throw DomainError("no maxima to threshold");
    if (!(level > 0 && level < 1)) throw DomainError("confidence level must lie in (0, 1)");
    return stats::quantile(maxima, level);
}

double gaussian_max_quantile(std::size_t N, double sigma, double x) {
    if (N == 0) throw DomainError("N must be at least 1");
    if (!(sigma > 0)) throw DomainError("sigma must be positive");
    if (!(x < 1) || !(x > std::pow(2.0, -static_cast<double>(N))))
        throw DomainError("x must lie in (2^-N, 1) for a positive quantile");
    return sigma * stats::normal_quantile(std::pow(x, 1.0 / static_cast<double>(N)));
}

}  // namespace forkpath::mtesting
