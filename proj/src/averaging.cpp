#include "forkpath/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "forkpath/error.hpp"
#include "forkpath/stats.hpp"

namespace forkpath::averaging {

namespace {

constexpr double kNaN = PathOutcome::nan;

std::vector<double> normalized(std::vector<double> w) {
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(s > 0)) throw DomainError("weights sum to zero");
    for (auto& x : w) x /= s;
    return w;
}

// weights from log-scale scores, shifted by the maximum
std::vector<double> softmax(std::span<const double> score) {
    const double top = *std::max_element(score.begin(), score.end());
    std::vector<double> w(score.size());
    for (std::size_t i = 0; i < score.size(); ++i) w[i] = std::exp(score[i] - top);
    return normalized(std::move(w));
}

double log_evidence(const ModelFit& m, BayesCompat compat) {
    if (m.n <= 0) throw DomainError("Bayes factor needs a positive observation count");
    if (m.rss < 0 || m.yvar < 0) throw DomainError("Bayes factor needs non-negative RSS and variance");
    const double N = static_cast<double>(m.n);
    const double n = compat == BayesCompat::repaired ? N : 1.0 / N;
    const double nv = compat == BayesCompat::repaired ? N * m.yvar : m.yvar;
    return 0.5 * m.k * std::log(n / (n + 1.0)) - 0.5 * (n - 1.0) * std::log((m.rss + nv) / (n + 1.0));
}

std::vector<double> column(std::span<const PathOutcome* const> o, double PathOutcome::*field) {
    std::vector<double> v;
    v.reserve(o.size());
    for (const auto* p : o) v.push_back(p->*field);
    return v;
}

void require_nonempty(std::span<const PathOutcome* const> o) {
    if (o.empty()) throw DomainError("averaging needs at least one usable path");
    for (const auto* p : o)
        if (!std::isfinite(p->b)) throw DomainError("path " + std::to_string(p->path_index) + " has no estimate");
}

double normal_multiplier(double alpha) {
    if (!(alpha > 0 && alpha < 1)) throw DomainError("alpha must lie in (0, 1)");
    return stats::normal_quantile(1.0 - alpha / 2.0);
}

}  // namespace

SigmaConvention parse_sigma_convention(std::string_view s) {
    if (s == "source") return SigmaConvention::source;
    if (s == "paper") return SigmaConvention::paper;
    throw ValidationError("sigma_convention must be 'source' or 'paper'");
}

BayesCompat parse_bayes_compat(std::string_view s) {
    if (s == "repaired") return BayesCompat::repaired;
    if (s == "paper") return BayesCompat::paper;
    throw ValidationError("bayes_compat must be 'repaired' or 'paper'");
}

WeightScheme parse_weight_scheme(std::string_view s) {
    if (s == "uniform") return WeightScheme::uniform;
    if (s == "aic") return WeightScheme::aic;
    if (s == "bayes") return WeightScheme::bayes;
    throw ValidationError("weight scheme must be uniform, aic or bayes");
}

std::string to_string(WeightScheme s) {
    switch (s) {
        case WeightScheme::uniform: return "uniform";
        case WeightScheme::aic: return "aic";
        case WeightScheme::bayes: return "bayes";
    }
    return "?";
}

std::vector<double> frequentist_weights(std::span<const double> aics) {
    if (aics.empty()) throw DomainError("no AICs to weight");
    std::vector<double> score(aics.size());
    for (std::size_t i = 0; i < aics.size(); ++i) {
        if (!std::isfinite(aics[i])) throw DomainError("non-finite AIC");
        score[i] = -0.5 * aics[i];
    }
    return softmax(score);
}

double aggregate_sigma(std::span<const double> b, std::span<const double> sigma, std::span<const double> w,
                       SigmaConvention convention) {
    if (b.size() != sigma.size() || b.size() != w.size()) throw DomainError("aggregate_sigma: length mismatch");
    double bstar = 0;
    for (std::size_t i = 0; i < b.size(); ++i) bstar += w[i] * b[i];
    double s = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (sigma[i] < 0) throw DomainError("negative standard error");
        s += w[i] * std::sqrt(sigma[i] * sigma[i] + (bstar - b[i]) * (bstar - b[i]));
    }
    return convention == SigmaConvention::paper ? s * s : s;
}

std::pair<double, double> confidence_interval(double b, double sigma, std::size_t paths, double alpha) {
    if (paths == 0) throw DomainError("confidence interval needs at least one path");
    const double h = normal_multiplier(alpha) * sigma / std::sqrt(static_cast<double>(paths));
    return {b - h, b + h};
}

double log_bayes_factor(const ModelFit& j, const ModelFit& p, BayesCompat compat) {
    return log_evidence(j, compat) - log_evidence(p, compat);
}

double bayes_factor(const ModelFit& j, const ModelFit& p, BayesCompat compat) {
    return std::exp(log_bayes_factor(j, p, compat));
}

std::vector<double> posterior_probabilities(std::span<const ModelFit> fits, BayesCompat compat) {
    if (fits.empty()) throw DomainError("no models to weight");
    std::vector<double> score;
    for (const auto& f : fits) score.push_back(log_evidence(f, compat));
    return softmax(score);
}

std::vector<double> scheme_weights(std::span<const PathOutcome* const> o, WeightScheme scheme, BayesCompat compat) {
    if (o.empty()) throw DomainError("no paths to weight");
    switch (scheme) {
        case WeightScheme::uniform: return std::vector<double>(o.size(), 1.0 / static_cast<double>(o.size()));
        case WeightScheme::aic: return frequentist_weights(column(o, &PathOutcome::aic));
        case WeightScheme::bayes: {
            std::vector<ModelFit> fits;
            for (const auto* p : o) fits.push_back({p->n, p->k, p->rss, p->yvar});
            return posterior_probabilities(fits, compat);
        }
    }
    return {};
}

namespace {

WeightedAverage scale_average(std::span<const PathOutcome* const> o, std::vector<double> w, std::string scheme,
                              const AveragingOptions& opt) {
    WeightedAverage a;
    a.scheme = std::move(scheme);
    a.alpha = opt.alpha;
    const auto b = column(o, &PathOutcome::b);
    const auto se = column(o, &PathOutcome::se);
    a.estimate = 0;
    a.t_star = 0;
    for (std::size_t i = 0; i < o.size(); ++i) {
        a.estimate += w[i] * b[i];
        a.t_star += w[i] * static_cast<double>(o[i]->n);
        a.paths.push_back(o[i]->path_index);
    }
    a.sigma = aggregate_sigma(b, se, w, opt.sigma);
    std::tie(a.lo, a.hi) = confidence_interval(a.estimate, a.sigma, o.size(), opt.alpha);
    a.weights = std::move(w);
    return a;
}

}  // namespace

WeightedAverage frequentist_average(std::span<const PathOutcome* const> o, const AveragingOptions& opt) {
    require_nonempty(o);
    return scale_average(o, scheme_weights(o, WeightScheme::aic), "aic", opt);
}

WeightedAverage simple_average(std::span<const PathOutcome* const> o, const AveragingOptions& opt) {
    require_nonempty(o);
    return scale_average(o, scheme_weights(o, WeightScheme::uniform), "uniform", opt);
}

WeightedAverage bayesian_average(std::span<const PathOutcome* const> o, const AveragingOptions& opt) {
    require_nonempty(o);
    WeightedAverage a;
    a.scheme = "bayes";
    a.alpha = opt.alpha;
    a.weights = scheme_weights(o, WeightScheme::bayes, opt.compat);
    double e = 0, m2 = 0, ts = 0;
    for (std::size_t i = 0; i < o.size(); ++i) {
        const double b = o[i]->b, s = o[i]->se;
        e += a.weights[i] * b;
        m2 += a.weights[i] * ((std::isfinite(s) ? s * s : 0.0) + b * b);
        ts += a.weights[i] * static_cast<double>(o[i]->n);
        a.paths.push_back(o[i]->path_index);
    }
    a.estimate = e;
    a.variance = std::max(0.0, m2 - e * e);
    a.t_star = ts;
    const double h = ts > 0 ? normal_multiplier(opt.alpha) * std::sqrt(a.variance / ts) : kNaN;
    a.lo = e - h;
    a.hi = e + h;
    return a;
}

nlohmann::json WeightedAverage::to_json(bool with_weights) const {
    auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); };
    nlohmann::json j{{"scheme", scheme},   {"estimate", num(estimate)}, {"sigma", num(sigma)},
                     {"variance", num(variance)}, {"t_star", num(t_star)}, {"paths", paths.size()},
                     {"alpha", alpha},     {"lo", num(lo)},             {"hi", num(hi)}};
    if (!weights.empty()) {
        std::vector<double> s = weights;
        std::sort(s.begin(), s.end());
        j["weights_summary"] = {{"min", s.front()},
                                {"median", stats::quantile_sorted(s, 0.5)},
                                {"max", s.back()},
                                {"effective_paths", 1.0 / std::inner_product(s.begin(), s.end(), s.begin(), 0.0)}};
    }
    if (with_weights) j["weights"] = weights;
    return j;
}

// === split tests ===

SplitTest split_test(std::span<const double> b_a, std::span<const double> b_b, std::span<const double> w_a,
                     std::span<const double> w_b) {
    const std::size_t M = b_a.size();
    if (M == 0 || b_b.size() != M || w_a.size() != M || w_b.size() != M)
        throw DomainError("split test needs equally sized, non-empty paired series");
    SplitTest r;
    r.pairs = M;
    r.weights_a.assign(w_a.begin(), w_a.end());
    r.weights_b.assign(w_b.begin(), w_b.end());
    const double m = static_cast<double>(M);
    for (std::size_t i = 0; i < M; ++i) {
        r.delta.push_back(m * (w_a[i] * b_a[i] - w_b[i] * b_b[i]));
        r.average_a += w_a[i] * b_a[i];
        r.average_b += w_b[i] * b_b[i];
    }
    r.mean_delta = stats::mean(r.delta);
    r.identity_error = std::abs(r.mean_delta - (r.average_a - r.average_b));
    const bool all_zero = std::all_of(r.delta.begin(), r.delta.end(), [](double d) { return d == 0.0; });
    if (all_zero) {
        r.exact_zero = true;
        r.mean_delta = 0;
        r.t = 0;
        r.p_value = 1;
        return r;
    }
    if (M < 2) {
        r.t = kNaN;
        r.p_value = kNaN;
        return r;
    }
    const double sd = stats::sd_sample(r.delta);
    if (sd == 0) {
        r.t = r.mean_delta > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        r.p_value = 0;
        return r;
    }
    r.t = r.mean_delta / (sd / std::sqrt(m));
    r.p_value = stats::two_sided_p(r.t, m - 1);
    return r;
}

SplitTest conditional_split_test(const OutcomeSet& set, std::string_view layer, std::string_view option_a,
                                 std::string_view option_b, WeightScheme scheme, BayesCompat compat) {
    const auto& spec = set.spec();
    const std::size_t j = spec.layer_index(layer);
    const std::size_t ia = spec.option_index(j, option_a), ib = spec.option_index(j, option_b);
    if (ia == ib) throw ValidationError("split test needs two different options");

    std::vector<const PathOutcome*> pa, pb;
    std::size_t dropped = 0;
    for (const auto& o : set.outcomes()) {
        auto choices = spec.decode(o.path_index);
        if (choices[j] != ia) continue;
        choices[j] = ib;
        if (!spec.feasible(choices)) continue;
        const auto twin = spec.encode(choices);
        const PathOutcome* t = set.find(twin);
        if (!t)
            throw PairingError("path " + std::to_string(o.path_index) + " has no twin " + std::to_string(twin) +
                               " through " + std::string(layer) + "=" + std::string(option_b));
        if (!o.usable() || !t->usable() || !std::isfinite(o.b) || !std::isfinite(t->b)) {
            ++dropped;
            continue;
        }
        pa.push_back(&o);
        pb.push_back(t);
    }
    if (pa.empty())
        throw PairingError("no usable twin pairs for " + std::string(layer) + ": " + std::string(option_a) + " vs " +
                           std::string(option_b));
    const auto wa = scheme_weights(pa, scheme, compat);
    const auto wb = scheme_weights(pb, scheme, compat);
    SplitTest r = split_test(column(pa, &PathOutcome::b), column(pb, &PathOutcome::b), wa, wb);
    r.layer = layer;
    r.option_a = option_a;
    r.option_b = option_b;
    r.dropped = dropped;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        r.paths_a.push_back(pa[i]->path_index);
        r.paths_b.push_back(pb[i]->path_index);
    }
    return r;
}

nlohmann::json SplitTest::to_json(bool with_series) const {
    auto num = [](double x) {
        if (std::isfinite(x)) return nlohmann::json(x);
        if (std::isnan(x)) return nlohmann::json();
        return nlohmann::json(x > 0 ? "Inf" : "-Inf");
    };
    nlohmann::json j{{"layer", layer},
                     {"option_a", option_a},
                     {"option_b", option_b},
                     {"pairs", pairs},
                     {"dropped", dropped},
                     {"average_a", average_a},
                     {"average_b", average_b},
                     {"mean_delta", mean_delta},
                     {"t", num(t)},
                     {"p_value", num(p_value)},
                     {"stars", stars(p_value)},
                     {"exact_zero", exact_zero},
                     {"identity_error", identity_error}};
    if (with_series) {
        j["delta"] = delta;
        j["weights_a"] = weights_a;
        j["weights_b"] = weights_b;
    }
    return j;
}

LayerReport layer_report(const OutcomeSet& set, std::string_view layer, WeightScheme scheme,
                         const AveragingOptions& opt) {
    LayerReport r;
    r.layer = layer;
    const auto& spec = set.spec();
    const auto& L = spec.layers()[spec.layer_index(layer)];
    for (const auto& o : L.options) {
        r.options.push_back(o.id);
        auto sub = set.where(layer, o.id);
        std::erase_if(sub, [](const PathOutcome* p) { return !std::isfinite(p->b); });
        if (sub.empty()) {
            WeightedAverage none;
            none.scheme = to_string(scheme);
            r.option_averages.push_back(std::move(none));
            continue;
        }
        switch (scheme) {
            case WeightScheme::uniform: r.option_averages.push_back(simple_average(sub, opt)); break;
            case WeightScheme::aic: r.option_averages.push_back(frequentist_average(sub, opt)); break;
            case WeightScheme::bayes: r.option_averages.push_back(bayesian_average(sub, opt)); break;
        }
    }
    for (std::size_t a = 0; a < L.size(); ++a)
        for (std::size_t b = a + 1; b < L.size(); ++b) {
            try {
                r.pairwise.push_back(
                    conditional_split_test(set, layer, L.options[a].id, L.options[b].id, scheme, opt.compat));
            } catch (const PairingError&) {
                SplitTest empty;
                empty.layer = layer;
                empty.option_a = L.options[a].id;
                empty.option_b = L.options[b].id;
                empty.t = kNaN;
                empty.p_value = kNaN;
                r.pairwise.push_back(std::move(empty));
            }
        }
    return r;
}

nlohmann::json LayerReport::to_json() const {
    nlohmann::json j{{"layer", layer}, {"options", nlohmann::json::array()}, {"pairwise", nlohmann::json::array()}};
    for (std::size_t i = 0; i < options.size(); ++i) {
        auto a = option_averages[i].to_json();
        a["option"] = options[i];
        j["options"].push_back(std::move(a));
    }
    for (const auto& p : pairwise) j["pairwise"].push_back(p.to_json());
    return j;
}

std::string stars(double p) {
    if (!std::isfinite(p)) return "";
    if (p < 0.01) return "***";
    if (p < 0.05) return "**";
    if (p < 0.10) return "*";
    return "";
}

}  // namespace forkpath::averaging
