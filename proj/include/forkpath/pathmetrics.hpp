#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forkpath/outcomes.hpp"

namespace forkpath::pathmetrics {

enum class Field { t, b };
[[nodiscard]] Field parse_field(std::string_view s);
[[nodiscard]] double field_value(const PathOutcome& o, Field f);

/// Intervals for one K: one entry per (fixed-layer combination, fixed
/// configuration). An empty free set leaves a NaN range.
struct IntervalSlice {
    std::size_t K = 0;
    std::size_t free = 0;  // J - K
    std::vector<std::vector<std::size_t>> combinations;  // fixed layers per combination
    std::vector<std::size_t> combination;                 // per interval
    std::vector<std::uint64_t> configuration;             // per interval, mixed radix over fixed layers
    std::vector<double> ranges;
    std::vector<std::size_t> members;  // usable free paths per interval
    std::size_t empty = 0;
    double ari = PathOutcome::nan;
};

struct PowerLaw {
    double a = PathOutcome::nan;
    double b = PathOutcome::nan;
    std::string method = "log-least-squares";
};

struct HackingIntervalReport {
    Field field = Field::t;
    std::size_t layers = 0;
    std::size_t usable = 0;
    std::size_t excluded = 0;  // feasible paths without a usable outcome
    std::vector<IntervalSlice> slices;  // ascending K
    std::vector<double> ari_by_free;    // index n - 1 for n = J - K free mappings
    std::vector<double> growth;         // rho_n for n = 2 .. J - 1, index n - 2
    PowerLaw fit;

    [[nodiscard]] nlohmann::json to_json() const;
    /// free,K,fixed_layers,configuration,members,range
    void write_csv(std::ostream& out, const pathgrid::StudySpec& spec) const;
};

/// n_K = sum over K-subsets of layers of the product of their radices.
[[nodiscard]] std::uint64_t interval_count(const pathgrid::StudySpec& spec, std::size_t K);
[[nodiscard]] IntervalSlice hacking_intervals(const OutcomeSet& set, std::size_t K, Field field = Field::t,
                                              unsigned jobs = 1);
/// Every K in 1..J-1, growth rates and the power-law fit.
[[nodiscard]] HackingIntervalReport hacking_interval_report(const OutcomeSet& set, Field field = Field::t,
                                                            unsigned jobs = 1);

/// log(ARI_n) = log a + n log b for n = 1, 2, ...
[[nodiscard]] PowerLaw fit_power_law(std::span<const double> ari_by_free_count);

enum class FitKind { empirical, gaussian, student };
struct DistributionFit {
    FitKind kind = FitKind::gaussian;
    double nu = 3;
};
[[nodiscard]] DistributionFit parse_fit(std::string_view s, double nu = 3);
[[nodiscard]] std::string to_string(const DistributionFit& f);

struct EtCReport {
    double b_star = PathOutcome::nan;
    DistributionFit fit;
    double q = 0.9;
    double theta = PathOutcome::nan;
    double cdf_at_b = PathOutcome::nan;
    double ofo = 0;
    double etc = 1;
    std::size_t outcomes = 0;
    double location = PathOutcome::nan, scale = PathOutcome::nan;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// (F(b*) - q) / (1 - q) when b* exceeds the q-quantile, else 0.
[[nodiscard]] double odds_of_favorable_outcome(double cdf_at_b, double q);
/// Outcomes must be signed so that larger is more favorable.
[[nodiscard]] EtCReport etc_score(std::span<const double> outcomes, double b_star, double q,
                                  DistributionFit fit = {});

struct PCurveReport {
    std::size_t bins = 10;
    std::vector<std::size_t> counts;
    std::vector<std::size_t> monotonicity_violations;  // i (1-based) with n_i <= n_{i+1}
    std::vector<std::size_t> convexity_violations;     // i with n_i/n_{i+1} <= n_{i+1}/n_{i+2}
    std::vector<std::size_t> undefined_ratios;         // i whose convexity ratio has a zero count
    double kappa = PathOutcome::nan;
    bool complete = true;  // every kappa term defined
    std::string label;

    [[nodiscard]] nlohmann::json to_json() const;
};

[[nodiscard]] PCurveReport pcurve_from_counts(std::vector<std::size_t> counts);
[[nodiscard]] PCurveReport pcurve_report(std::span<const double> p_values, std::size_t bins = 10);
/// unnecessary below 0.25, possible up to 0.4, problematic above.
[[nodiscard]] std::string kappa_class(double kappa);

struct KappaRow {
    std::string group;
    std::size_t paths = 0;
    PCurveReport report;
};
/// One p-curve per option of `group_layer`, built from the two-sided
/// p-values of the usable paths through it (Student t with n - 1 df).
[[nodiscard]] std::vector<KappaRow> kappa_table(const OutcomeSet& set, std::string_view group_layer,
                                                std::size_t bins = 10);
void write_kappa_csv(std::ostream& out, const std::vector<KappaRow>& rows);

}  // namespace forkpath::pathmetrics
