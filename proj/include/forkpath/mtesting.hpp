#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "forkpath/outcomes.hpp"

namespace forkpath::mtesting {

/// Independent stream for replicate `index` of a run seeded with `seed`.
[[nodiscard]] std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index);

/// Moving-block bootstrap row indices: ceil(T/L) block starts drawn
/// uniformly from [0, T-L], concatenated and truncated to T.
[[nodiscard]] std::vector<std::size_t> block_indices(std::size_t T, std::size_t L, std::uint64_t seed,
                                                     std::uint64_t replicate);
/// Replicate `replicate` of a T x N series matrix (rows resampled jointly).
[[nodiscard]] Eigen::MatrixXd bootstrap_replicate(const Eigen::MatrixXd& series, std::size_t L, std::uint64_t seed,
                                                  std::uint64_t replicate);
[[nodiscard]] std::vector<Eigen::MatrixXd> block_bootstrap(const Eigen::MatrixXd& series, std::size_t L,
                                                           std::size_t B, std::uint64_t seed);

/// sqrt(T)(mu_n - benchmark_n)/sigma_n per column, sorted descending. NaN
/// columns are dropped; returns nullopt when a column has zero sd.
[[nodiscard]] std::optional<std::vector<double>> replicate_statistics(const Eigen::MatrixXd& replicate,
                                                                      const Eigen::VectorXd& benchmark);

struct MaxStatDistribution {
    std::string kind;       // bootstrap | path
    std::string benchmark;  // original | pointwise | average | explicit
    std::vector<double> maxima;  // t~_1 per replicate (or path), in replicate order
    std::vector<std::uint64_t> flagged;  // replicates dropped for a zero sd
    std::size_t replicates = 0;
    double level = 0.95;
    double threshold = PathOutcome::nan;

    [[nodiscard]] nlohmann::json to_json(bool with_maxima = false) const;
};

/// Bootstrap reality check: B moving-block replicates of a T x N matrix.
[[nodiscard]] MaxStatDistribution brc(const Eigen::MatrixXd& series, std::size_t L, std::size_t B,
                                      std::uint64_t seed, double level = 0.95, unsigned jobs = 1);

/// Per-path moments of N series (P x N matrices). NaN marks an absent entry.
struct PathMoments {
    Eigen::MatrixXd mean, sd, count;
    std::vector<std::uint64_t> labels;  // one per path row
    std::vector<std::string> series;    // one per column
};

enum class Benchmark { pointwise, average, explicit_values };
[[nodiscard]] Benchmark parse_benchmark(std::string_view s);

/// Benchmark means: the reference row (pointwise), the column means over
/// paths (average), or `values`.
[[nodiscard]] Eigen::VectorXd benchmark_means(const PathMoments& m, Benchmark b, std::optional<std::size_t> reference,
                                              const Eigen::VectorXd& values = {});
/// Per-path statistics sqrt(T_p)(mu_p - mu)/sigma_p sorted descending.
[[nodiscard]] std::vector<std::vector<double>> emt_statistics(const PathMoments& m, const Eigen::VectorXd& benchmark);
[[nodiscard]] MaxStatDistribution emt(const PathMoments& m, Benchmark b, std::optional<std::size_t> reference,
                                      double level = 0.95, const Eigen::VectorXd& values = {});

/// Rows: every configuration of the layers other than `series_layer`;
/// columns: that layer's options. mean = b, sd = se sqrt(n), count = n.
[[nodiscard]] PathMoments moments_from_outcomes(const OutcomeSet& set, std::string_view series_layer);
/// Row of `path_index` in moments_from_outcomes(set, series_layer).
[[nodiscard]] std::size_t moments_row(const pathgrid::StudySpec& spec, std::string_view series_layer,
                                      std::uint64_t path_index);
/// Moments of the bootstrap replicates themselves (EMT fed with replicates).
[[nodiscard]] PathMoments moments_from_replicates(const std::vector<Eigen::MatrixXd>& replicates);

/// Linear-interpolation quantile of the maxima.
[[nodiscard]] double threshold(std::vector<double> maxima, double level);
/// sigma * Phi^{-1}(x^{1/N}); x must exceed 2^{-N}.
[[nodiscard]] double gaussian_max_quantile(std::size_t N, double sigma, double x);

}  // namespace forkpath::mtesting
