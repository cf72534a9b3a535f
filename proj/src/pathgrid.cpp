#include "forkpath/pathgrid.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "forkpath/error.hpp"

namespace forkpath::pathgrid {

std::optional<std::size_t> LayerSpec::find(std::string_view option_id) const {
    for (std::size_t i = 0; i < options.size(); ++i)
        if (options[i].id == option_id) return i;
    return std::nullopt;
}

namespace {

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
    return h;
}

}  // namespace

StudySpec::StudySpec(std::vector<LayerSpec> layers, std::vector<Constraint> constraints,
                     std::vector<double> layer_weights)
    : layers_(std::move(layers)), constraints_(std::move(constraints)), weights_(std::move(layer_weights)) {
    if (layers_.empty()) throw ValidationError("study has no layers");
    std::set<std::string> names;
    for (const auto& layer : layers_) {
        if (layer.name.empty()) throw ValidationError("layer with empty name");
        if (!names.insert(layer.name).second) throw ValidationError("duplicate layer name '" + layer.name + "'");
        if (layer.options.size() < 2)
            throw ValidationError("layer '" + layer.name + "' needs at least 2 options");
        std::set<std::string> ids;
        for (const auto& opt : layer.options) {
            if (opt.id.empty()) throw ValidationError("layer '" + layer.name + "' has an option with empty id");
            if (!ids.insert(opt.id).second)
                throw ValidationError("layer '" + layer.name + "' has duplicate option '" + opt.id + "'");
        }
    }
    if (weights_.empty()) weights_.assign(layers_.size(), 1.0);
    if (weights_.size() != layers_.size())
        throw ValidationError("layer_weights has " + std::to_string(weights_.size()) + " entries for " +
                              std::to_string(layers_.size()) + " layers");
    for (double w : weights_)
        if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("layer weights must be finite and >= 0");

    strides_.assign(layers_.size(), 1);
    path_count_ = 1;
    for (std::size_t j = layers_.size(); j-- > 0;) {
        strides_[j] = path_count_;
        const auto r = static_cast<std::uint64_t>(layers_[j].size());
        if (path_count_ > std::numeric_limits<std::uint64_t>::max() / r)
            throw ValidationError("path count overflows 64 bits");
        path_count_ *= r;
    }

    for (const auto& c : constraints_) {
        if (c.forbid.empty()) throw ValidationError("constraint '" + c.label + "' has no terms");
        std::vector<std::pair<std::size_t, std::size_t>> terms;
        for (const auto& [layer, opt] : c.forbid) {
            auto j = find_layer(layer);
            if (!j) throw ValidationError("constraint references unknown layer '" + layer + "'");
            auto o = layers_[*j].find(opt);
            if (!o) throw ValidationError("constraint references unknown option '" + opt + "' of layer '" + layer + "'");
            terms.emplace_back(*j, *o);
        }
        resolved_.push_back(std::move(terms));
    }

    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& layer : layers_) {
        h = fnv1a(h, layer.name);
        for (const auto& opt : layer.options) h = fnv1a(h, opt.id);
    }
    fingerprint_ = h;
}

std::vector<std::size_t> StudySpec::radices() const {
    std::vector<std::size_t> r;
    r.reserve(layers_.size());
    for (const auto& l : layers_) r.push_back(l.size());
    return r;
}

std::optional<std::size_t> StudySpec::find_layer(std::string_view name) const {
    for (std::size_t j = 0; j < layers_.size(); ++j)
        if (layers_[j].name == name) return j;
    return std::nullopt;
}

std::size_t StudySpec::layer_index(std::string_view name) const {
    auto j = find_layer(name);
    if (!j) throw ValidationError("unknown layer '" + std::string(name) + "'");
    return *j;
}

std::size_t StudySpec::option_index(std::size_t layer, std::string_view option_id) const {
    auto o = layers_.at(layer).find(option_id);
    if (!o)
        throw ValidationError("unknown option '" + std::string(option_id) + "' in layer '" + layers_[layer].name + "'");
    return *o;
}

const Option& StudySpec::option(std::size_t layer, std::size_t position) const {
    return layers_.at(layer).options.at(position);
}

std::vector<std::size_t> StudySpec::decode(std::uint64_t index) const {
    if (index >= path_count_) throw std::out_of_range("path index " + std::to_string(index) + " out of range");
    std::vector<std::size_t> choices(layers_.size());
    for (std::size_t j = layers_.size(); j-- > 0;) {
        const auto r = layers_[j].size();
        choices[j] = static_cast<std::size_t>(index % r);
        index /= r;
    }
    return choices;
}

std::uint64_t StudySpec::encode(std::span<const std::size_t> choices) const {
    if (choices.size() != layers_.size()) throw ValidationError("choice vector length does not match layer count");
    std::uint64_t index = 0;
    for (std::size_t j = 0; j < choices.size(); ++j) {
        if (choices[j] >= layers_[j].size())
            throw std::out_of_range("option position out of range for layer '" + layers_[j].name + "'");
        index = index * layers_[j].size() + choices[j];
    }
    return index;
}

bool StudySpec::feasible(std::span<const std::size_t> choices) const {
    for (const auto& terms : resolved_) {
        bool fires = true;
        for (const auto& [j, o] : terms)
            if (choices[j] != o) {
                fires = false;
                break;
            }
        if (fires) return false;
    }
    return true;
}

PathAssignment StudySpec::assignment(std::uint64_t index) const {
    PathAssignment p;
    p.index = index;
    p.choices = decode(index);
    p.feasible = feasible(p.choices);
    p.grid = fingerprint_;
    return p;
}

std::vector<std::string> StudySpec::choice_ids(const PathAssignment& path) const {
    std::vector<std::string> ids;
    ids.reserve(path.choices.size());
    for (std::size_t j = 0; j < path.choices.size(); ++j) ids.push_back(option(j, path.choices[j]).id);
    return ids;
}

StudySpec StudySpec::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("study spec must be an object");
    if (!j.contains("layers") || !j["layers"].is_array()) throw ValidationError("/layers: expected an array");
    std::vector<LayerSpec> layers;
    for (std::size_t li = 0; li < j["layers"].size(); ++li) {
        const auto& jl = j["layers"][li];
        const std::string where = "/layers/" + std::to_string(li);
        if (!jl.is_object() || !jl.contains("name") || !jl["name"].is_string())
            throw ValidationError(where + "/name: expected a string");
        if (!jl.contains("options") || !jl["options"].is_array())
            throw ValidationError(where + "/options: expected an array");
        LayerSpec layer{jl["name"].get<std::string>(), {}};
        for (std::size_t oi = 0; oi < jl["options"].size(); ++oi) {
            const auto& jo = jl["options"][oi];
            if (jo.is_string()) {
                layer.options.push_back({jo.get<std::string>(), nullptr});
            } else if (jo.is_object() && jo.contains("id") && jo["id"].is_string()) {
                layer.options.push_back({jo["id"].get<std::string>(), jo.value("payload", nlohmann::json())});
            } else {
                throw ValidationError(where + "/options/" + std::to_string(oi) +
                                      ": expected a string or an object with string 'id'");
            }
        }
        layers.push_back(std::move(layer));
    }
    std::vector<Constraint> constraints;
    if (j.contains("constraints")) {
        if (!j["constraints"].is_array()) throw ValidationError("/constraints: expected an array");
        for (std::size_t ci = 0; ci < j["constraints"].size(); ++ci) {
            const auto& jc = j["constraints"][ci];
            const std::string where = "/constraints/" + std::to_string(ci);
            if (!jc.is_object() || !jc.contains("forbid") || !jc["forbid"].is_object())
                throw ValidationError(where + "/forbid: expected an object mapping layer to option");
            Constraint c;
            c.label = jc.value("label", std::string("constraint ") + std::to_string(ci));
            for (const auto& [k, v] : jc["forbid"].items()) {
                if (!v.is_string()) throw ValidationError(where + "/forbid/" + k + ": expected an option id");
                c.forbid.emplace_back(k, v.get<std::string>());
            }
            constraints.push_back(std::move(c));
        }
    }
    std::vector<double> weights;
    if (j.contains("layer_weights")) {
        if (!j["layer_weights"].is_array()) throw ValidationError("/layer_weights: expected an array");
        for (const auto& w : j["layer_weights"]) {
            if (!w.is_number()) throw ValidationError("/layer_weights: expected numbers");
            weights.push_back(w.get<double>());
        }
    }
    return StudySpec(std::move(layers), std::move(constraints), std::move(weights));
}

nlohmann::json StudySpec::to_json() const {
    nlohmann::json j;
    j["layers"] = nlohmann::json::array();
    for (const auto& l : layers_) {
        nlohmann::json jl;
        jl["name"] = l.name;
        jl["options"] = nlohmann::json::array();
        for (const auto& o : l.options) {
            if (o.payload.is_null())
                jl["options"].push_back(o.id);
            else
                jl["options"].push_back({{"id", o.id}, {"payload", o.payload}});
        }
        j["layers"].push_back(std::move(jl));
    }
    if (!constraints_.empty()) {
        j["constraints"] = nlohmann::json::array();
        for (const auto& c : constraints_) {
            nlohmann::json f = nlohmann::json::object();
            for (const auto& [k, v] : c.forbid) f[k] = v;
            j["constraints"].push_back({{"label", c.label}, {"forbid", f}});
        }
    }
    j["layer_weights"] = weights_;
    return j;
}

std::vector<PathAssignment> enumerate_paths(const StudySpec& spec) {
    std::vector<PathAssignment> out;
    out.reserve(static_cast<std::size_t>(spec.path_count()));
    for (std::uint64_t i = 0; i < spec.path_count(); ++i) out.push_back(spec.assignment(i));
    return out;
}

namespace {

void check_same_grid(const PathAssignment& p, const PathAssignment& q) {
    if (p.grid != q.grid || p.choices.size() != q.choices.size())
        throw ValidationError("paths come from different study specs");
}

}  // namespace

std::size_t path_distance(const PathAssignment& p, const PathAssignment& q) {
    check_same_grid(p, q);
    std::size_t d = 0;
    for (std::size_t j = 0; j < p.choices.size(); ++j) d += p.choices[j] != q.choices[j];
    return d;
}

double weighted_path_distance(const PathAssignment& p, const PathAssignment& q, std::span<const double> weights) {
    check_same_grid(p, q);
    if (weights.size() != p.choices.size())
        throw ValidationError("expected " + std::to_string(p.choices.size()) + " layer weights, got " +
                              std::to_string(weights.size()));
    double d = 0.0;
    for (std::size_t j = 0; j < p.choices.size(); ++j) {
        if (weights[j] < 0.0) throw DomainError("layer weights must be non-negative");
        if (p.choices[j] != q.choices[j]) d += weights[j];
    }
    return d;
}

std::vector<std::uint64_t> distance_census(const StudySpec& spec) {
    // coefficients of prod_j (1 + (r_j - 1) x)
    std::vector<std::uint64_t> e{1};
    for (const auto& layer : spec.layers()) {
        const std::uint64_t a = layer.size() - 1;
        std::vector<std::uint64_t> next(e.size() + 1, 0);
        for (std::size_t d = 0; d < e.size(); ++d) {
            next[d] += e[d];
            next[d + 1] += e[d] * a;
        }
        e = std::move(next);
    }
    return e;
}

double sigma_norm(std::span<const std::size_t> radices, double rho) {
    if (rho == 1.0) return 1.0;
    if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("rho must lie in [0, 1]");
    double v = 1.0;
    for (std::size_t r : radices) v *= (1.0 + rho * (static_cast<double>(r) - 1.0)) / static_cast<double>(r);
    return v;
}

double sigma_norm(const StudySpec& spec, double rho) {
    const auto r = spec.radices();
    return sigma_norm(std::span<const std::size_t>(r), rho);
}

std::optional<double> option_number(const Option& opt, std::string_view key) {
    if (opt.payload.is_number()) return opt.payload.get<double>();
    if (opt.payload.is_object() && opt.payload.contains(key) && opt.payload[std::string(key)].is_number())
        return opt.payload[std::string(key)].get<double>();
    const auto& id = opt.id;
    const auto first = id.find_first_of("0123456789");
    if (first == std::string::npos) return std::nullopt;
    auto last = id.find_first_not_of("0123456789.", first);
    if (last == std::string::npos) last = id.size();
    double v = std::stod(id.substr(first, last - first));
    if (last < id.size() && id[last] == '%') v /= 100.0;
    return v;
}

std::string option_string(const Option& opt, std::string_view key) {
    if (opt.payload.is_string()) return opt.payload.get<std::string>();
    if (opt.payload.is_object() && opt.payload.contains(key) && opt.payload[std::string(key)].is_string())
        return opt.payload[std::string(key)].get<std::string>();
    return opt.id;
}

StudySpec make_grid(std::span<const std::size_t> radices) {
    std::vector<LayerSpec> layers;
    for (std::size_t j = 0; j < radices.size(); ++j) {
        LayerSpec l{"L" + std::to_string(j + 1), {}};
        for (std::size_t o = 0; o < radices[j]; ++o) l.options.push_back({"o" + std::to_string(o + 1), nullptr});
        layers.push_back(std::move(l));
    }
    return StudySpec(std::move(layers));
}

}  // namespace forkpath::pathgrid
