#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace forkpath::pathgrid {

using Payload = nlohmann::json;

struct Option {
    std::string id;
    Payload payload;  // null when the option carries no parameters
};

struct LayerSpec {
    std::string name;
    std::vector<Option> options;

    [[nodiscard]] std::size_t size() const { return options.size(); }
    [[nodiscard]] std::optional<std::size_t> find(std::string_view option_id) const;
};

/// A conjunction of (layer, option) pairs. The assignment is infeasible
/// when every pair matches.
struct Constraint {
    std::vector<std::pair<std::string, std::string>> forbid;
    std::string label;
};

struct PathAssignment {
    std::uint64_t index = 0;
    std::vector<std::size_t> choices;  // option position per layer
    bool feasible = true;
    std::uint64_t grid = 0;  // fingerprint of the spec that produced it
};

class StudySpec {
public:
    StudySpec() = default;
    StudySpec(std::vector<LayerSpec> layers, std::vector<Constraint> constraints = {},
              std::vector<double> layer_weights = {});

    [[nodiscard]] const std::vector<LayerSpec>& layers() const { return layers_; }
    [[nodiscard]] const std::vector<Constraint>& constraints() const { return constraints_; }
    [[nodiscard]] const std::vector<double>& layer_weights() const { return weights_; }
    [[nodiscard]] std::size_t layer_count() const { return layers_.size(); }
    [[nodiscard]] std::vector<std::size_t> radices() const;
    [[nodiscard]] std::uint64_t path_count() const { return path_count_; }
    [[nodiscard]] std::uint64_t fingerprint() const { return fingerprint_; }

    /// Position of a layer by name; throws ValidationError when absent.
    [[nodiscard]] std::size_t layer_index(std::string_view name) const;
    [[nodiscard]] std::optional<std::size_t> find_layer(std::string_view name) const;
    [[nodiscard]] std::size_t option_index(std::size_t layer, std::string_view option_id) const;
    [[nodiscard]] const Option& option(std::size_t layer, std::size_t position) const;

    /// Index step between neighbouring options of one layer.
    [[nodiscard]] std::uint64_t stride(std::size_t layer) const { return strides_.at(layer); }

    [[nodiscard]] std::vector<std::size_t> decode(std::uint64_t index) const;
    [[nodiscard]] std::uint64_t encode(std::span<const std::size_t> choices) const;
    [[nodiscard]] bool feasible(std::span<const std::size_t> choices) const;
    [[nodiscard]] PathAssignment assignment(std::uint64_t index) const;
    [[nodiscard]] std::vector<std::string> choice_ids(const PathAssignment& path) const;

    [[nodiscard]] static StudySpec from_json(const nlohmann::json& j);
    [[nodiscard]] nlohmann::json to_json() const;

private:
    std::vector<LayerSpec> layers_;
    std::vector<Constraint> constraints_;
    std::vector<double> weights_;
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> resolved_;
    std::vector<std::uint64_t> strides_;
    std::uint64_t path_count_ = 1;
    std::uint64_t fingerprint_ = 0;
};

[[nodiscard]] std::vector<PathAssignment> enumerate_paths(const StudySpec& spec);

[[nodiscard]] std::size_t path_distance(const PathAssignment& p, const PathAssignment& q);
[[nodiscard]] double weighted_path_distance(const PathAssignment& p, const PathAssignment& q,
                                            std::span<const double> weights);

/// count[d] = number of paths at distance d from any fixed reference path.
[[nodiscard]] std::vector<std::uint64_t> distance_census(const StudySpec& spec);

/// Mean absolute entry of the correlation matrix rho^{d(p,q)}.
[[nodiscard]] double sigma_norm(const StudySpec& spec, double rho);
[[nodiscard]] double sigma_norm(std::span<const std::size_t> radices, double rho);

/// Numeric parameter of an option: a numeric payload, payload[key], or the
/// number embedded in the id ("h12" -> 12, "2%" -> 0.02).
[[nodiscard]] std::optional<double> option_number(const Option& opt, std::string_view key);
[[nodiscard]] std::string option_string(const Option& opt, std::string_view key);

/// Grid built from layer sizes alone, options named o1..or.
[[nodiscard]] StudySpec make_grid(std::span<const std::size_t> radices);

}  // namespace forkpath::pathgrid
