#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forkpath/outcomes.hpp"

namespace forkpath::averaging {

/// `source`: sigma_* = sum_p w_p sqrt(sigma_p^2 + (b_* - b_p)^2).
/// `paper`: the same sum squared.
enum class SigmaConvention { source, paper };
/// `repaired`: n is the observation count and n v the total sum of squares.
/// `paper`: n is the inverse observation count everywhere, n v the variance.
enum class BayesCompat { repaired, paper };
enum class WeightScheme { uniform, aic, bayes };

[[nodiscard]] SigmaConvention parse_sigma_convention(std::string_view s);
[[nodiscard]] BayesCompat parse_bayes_compat(std::string_view s);
[[nodiscard]] WeightScheme parse_weight_scheme(std::string_view s);
[[nodiscard]] std::string to_string(WeightScheme s);

[[nodiscard]] std::vector<double> frequentist_weights(std::span<const double> aics);
[[nodiscard]] double aggregate_sigma(std::span<const double> b, std::span<const double> sigma,
                                     std::span<const double> w, SigmaConvention convention = SigmaConvention::source);
/// b_* -/+ z_{alpha/2} sigma_* / sqrt(P).
[[nodiscard]] std::pair<double, double> confidence_interval(double b, double sigma, std::size_t paths, double alpha);

struct ModelFit {
    long n = 0;
    int k = 1;
    double rss = 0;
    double yvar = 0;  // divide-by-n variance of the dependent
};

[[nodiscard]] double log_bayes_factor(const ModelFit& j, const ModelFit& p, BayesCompat compat = BayesCompat::repaired);
[[nodiscard]] double bayes_factor(const ModelFit& j, const ModelFit& p, BayesCompat compat = BayesCompat::repaired);
/// Unit prior odds; computed on the log scale.
[[nodiscard]] std::vector<double> posterior_probabilities(std::span<const ModelFit> fits,
                                                          BayesCompat compat = BayesCompat::repaired);

struct WeightedAverage {
    std::string scheme;
    double estimate = PathOutcome::nan;
    double sigma = PathOutcome::nan;     // frequentist aggregate scale
    double variance = PathOutcome::nan;  // Bayesian posterior variance
    double t_star = PathOutcome::nan;    // sum_p w_p T_p
    std::vector<double> weights;
    std::vector<std::uint64_t> paths;
    double alpha = 0.05;
    double lo = PathOutcome::nan, hi = PathOutcome::nan;

    [[nodiscard]] nlohmann::json to_json(bool with_weights = false) const;
};

struct AveragingOptions {
    double alpha = 0.05;
    SigmaConvention sigma = SigmaConvention::source;
    BayesCompat compat = BayesCompat::repaired;
};

/// AIC weights, aggregate sigma, interval over P usable paths.
[[nodiscard]] WeightedAverage frequentist_average(std::span<const PathOutcome* const> outcomes,
                                                  const AveragingOptions& opt = {});
/// Posterior-probability weights; interval E -/+ z sqrt(V / T_*).
[[nodiscard]] WeightedAverage bayesian_average(std::span<const PathOutcome* const> outcomes,
                                               const AveragingOptions& opt = {});
[[nodiscard]] WeightedAverage simple_average(std::span<const PathOutcome* const> outcomes,
                                             const AveragingOptions& opt = {});
[[nodiscard]] std::vector<double> scheme_weights(std::span<const PathOutcome* const> outcomes, WeightScheme scheme,
                                                 BayesCompat compat = BayesCompat::repaired);

struct SplitTest {
    std::string layer, option_a, option_b;
    std::size_t pairs = 0;
    std::size_t dropped = 0;  // pairs with an unusable side
    std::vector<std::uint64_t> paths_a, paths_b;
    std::vector<double> weights_a, weights_b;  // normalized within each side
    std::vector<double> delta;
    double mean_delta = 0;
    double average_a = 0, average_b = 0;
    double t = 0;
    double p_value = 1;
    bool exact_zero = false;
    double identity_error = 0;  // |mean(delta) - (average_a - average_b)|

    [[nodiscard]] nlohmann::json to_json(bool with_series = false) const;
};

/// Pairs every usable path through option_a with its twin through option_b
/// (same choices elsewhere). Twins excluded by a constraint are skipped; a
/// feasible twin absent from the set raises PairingError.
[[nodiscard]] SplitTest conditional_split_test(const OutcomeSet& set, std::string_view layer,
                                               std::string_view option_a, std::string_view option_b,
                                               WeightScheme scheme = WeightScheme::uniform,
                                               BayesCompat compat = BayesCompat::repaired);
/// Delta series and t-test on already paired outcomes.
[[nodiscard]] SplitTest split_test(std::span<const double> b_a, std::span<const double> b_b,
                                   std::span<const double> w_a, std::span<const double> w_b);

struct LayerReport {
    std::string layer;
    std::vector<std::string> options;
    std::vector<WeightedAverage> option_averages;
    std::vector<SplitTest> pairwise;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Per-option averages and every pairwise split test of one layer.
[[nodiscard]] LayerReport layer_report(const OutcomeSet& set, std::string_view layer, WeightScheme scheme,
                                       const AveragingOptions& opt = {});

/// "***" below 1%, "**" below 5%, "*" below 10%.
[[nodiscard]] std::string stars(double p_value);

}  // namespace forkpath::averaging
