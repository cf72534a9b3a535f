#include "forkpath/config.hpp"

#include <algorithm>
#include <fstream>

#include "forkpath/datapanel.hpp"
#include "forkpath/error.hpp"
#include "forkpath/fmb.hpp"
#include "forkpath/io.hpp"
#include "forkpath/regression.hpp"
#include "forkpath/sorting.hpp"
#include "forkpath/synthetic.hpp"

namespace forkpath::config {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const json& field(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ValidationError("config field '" + where + key + "' is required");
    return j.at(key);
}

template <class T>
T get_as(const json& j, const std::string& where) {
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw ValidationError("config field '" + where + "': " + e.what());
    }
}

const char* primary_key(const std::string& study) {
    if (study == "premium") return "monthly";
    if (study == "anomalies") return "panel";
    return "factors_monthly";
}

std::string hash_json(const json& j) { return io::sha256_hex(j.dump()); }

fs::path resolve(const StudyConfig& c, const json& p, const std::string& where) {
    fs::path path = get_as<std::string>(p, where);
    if (path.is_relative() && !c.base_dir.empty()) path = c.base_dir / path;
    if (!fs::exists(path)) throw DataError("data file not found: " + path.string() + " (" + where + ")");
    return path;
}

const json& data_of(const StudyConfig& c) {
    static const json empty = json::object();
    return c.raw.contains("data") ? c.raw.at("data") : empty;
}

// keeps only the listed options of each named layer; constraints that
// mention a removed option disappear with it
pathgrid::StudySpec restrict_spec(const pathgrid::StudySpec& spec, const json& keep) {
    auto layers = spec.layers();
    for (const auto& [name, ids] : keep.items()) {
        if (!spec.find_layer(name)) throw ValidationError("config field 'restrict." + name + "': unknown layer");
        auto& L = layers[spec.layer_index(name)];
        std::vector<pathgrid::Option> kept;
        for (const auto& id : get_as<std::vector<std::string>>(ids, "restrict." + name)) {
            const auto pos = L.find(id);
            if (!pos) throw ValidationError("config field 'restrict." + name + "': unknown option '" + id + "'");
            kept.push_back(L.options[*pos]);
        }
        if (kept.size() < 2)
            throw ValidationError("config field 'restrict." + name + "': a layer needs at least 2 options");
        L.options = std::move(kept);
    }
    std::vector<pathgrid::Constraint> cons;
    for (const auto& c : spec.constraints()) {
        const bool alive = std::all_of(c.forbid.begin(), c.forbid.end(), [&](const auto& f) {
            const auto it = std::find_if(layers.begin(), layers.end(), [&](const auto& l) { return l.name == f.first; });
            return it != layers.end() && it->find(f.second).has_value();
        });
        if (alive) cons.push_back(c);
    }
    return pathgrid::StudySpec(std::move(layers), std::move(cons), spec.layer_weights());
}

std::vector<std::string> anomaly_names(const StudyConfig& c) {
    const auto& d = data_of(c);
    if (d.contains("characteristics"))
        return get_as<std::vector<std::string>>(d.at("characteristics"), "data.characteristics");
    if (d.contains("synthetic"))
        return synthetic::characteristic_names(d.at("synthetic").value("characteristics", std::size_t{82}));
    return sorting::reference_characteristics();
}

synthetic::MacroOptions macro_options(const json& s, std::uint64_t seed) {
    synthetic::MacroOptions o;
    o.seed = s.value("seed", seed);
    o.months = s.value("months", o.months);
    o.first_month = s.value("first_month", o.first_month);
    o.beta = s.value("beta", o.beta);
    o.noise_sd = s.value("noise_sd", o.noise_sd);
    o.persistence = s.value("persistence", o.persistence);
    o.idiosyncratic = s.value("idiosyncratic", o.idiosyncratic);
    o.missing_rate = s.value("missing_rate", o.missing_rate);
    o.leading_missing = s.value("leading_missing", o.leading_missing);
    return o;
}

synthetic::StockOptions stock_options(const json& s, std::uint64_t seed) {
    synthetic::StockOptions o;
    o.seed = s.value("seed", seed);
    o.stocks = s.value("stocks", o.stocks);
    o.months = s.value("months", o.months);
    o.first_month = s.value("first_month", o.first_month);
    o.characteristics = s.value("characteristics", o.characteristics);
    o.base_signal = s.value("base_signal", o.base_signal);
    o.signal_sd = s.value("signal_sd", o.signal_sd);
    o.size_tilt = s.value("size_tilt", o.size_tilt);
    o.ret_sd = s.value("ret_sd", o.ret_sd);
    o.missing_rate = s.value("missing_rate", o.missing_rate);
    return o;
}

synthetic::FactorOptions factor_options(const json& s, std::uint64_t seed) {
    synthetic::FactorOptions o;
    o.seed = s.value("seed", seed);
    o.assets = s.value("assets", std::size_t{100});
    o.months = s.value("months", o.months);
    o.days_per_month = s.value("days_per_month", o.days_per_month);
    o.first_month = s.value("first_month", o.first_month);
    if (s.contains("premia")) o.premia = get_as<std::vector<double>>(s.at("premia"), "data.synthetic.premia");
    o.factor_sd = s.value("factor_sd", o.factor_sd);
    o.idio_sd = s.value("idio_sd", o.idio_sd);
    o.rf = s.value("rf", o.rf);
    return o;
}

datapanel::DataPanel column_slice(const datapanel::DataPanel& p, std::size_t first, std::size_t count) {
    const auto names = p.column_names();
    std::vector<std::pair<std::string, datapanel::Series>> cols;
    for (std::size_t i = first; i < first + count && i < names.size(); ++i) cols.emplace_back(names[i], p.column(names[i]));
    return datapanel::DataPanel(p.frequency(), p.dates(), std::move(cols));
}

// asset set "bm25_vw" of a synthetic economy: 25 assets, value-weighted
// sets take the last columns and equal-weighted ones the first
fmb::AssetSet synthetic_assets(const synthetic::FactorEconomy& e, const std::string& id, std::size_t stocks) {
    const std::size_t N = e.assets_monthly.column_names().size();
    std::size_t n = stocks;
    const auto digits = id.find_first_of("0123456789");
    if (digits != std::string::npos) n = std::stoul(id.substr(digits));
    n = std::min(n, N);
    const bool vw = id.size() > 3 && id.substr(id.size() - 3) == "_vw";
    const std::size_t first = vw ? N - n : 0;
    return {column_slice(e.assets_monthly, first, n), column_slice(e.assets_daily, first, n)};
}

std::string file_digest(const fs::path& p) { return io::sha256_hex(io::read_file(p)); }

}  // namespace

StudyConfig StudyConfig::parse(std::string_view text, fs::path base_dir) {
    StudyConfig c;
    try {
        c.raw = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!c.raw.is_object()) throw ValidationError("config must be a JSON object");
    c.study = get_as<std::string>(field(c.raw, "study", ""), "study");
    if (c.study != "premium" && c.study != "anomalies" && c.study != "fmb")
        throw ValidationError("config field 'study' must be premium, anomalies or fmb (got '" + c.study + "')");
    c.id = c.raw.contains("id") ? get_as<std::string>(c.raw.at("id"), "id") : c.study;
    if (c.raw.contains("seed")) c.seed = get_as<std::uint64_t>(c.raw.at("seed"), "seed");
    if (c.raw.contains("data") && !c.raw.at("data").is_object())
        throw ValidationError("config field 'data' must be an object");
    c.base_dir = std::move(base_dir);
    (void)study_spec(c);
    return c;
}

StudyConfig StudyConfig::load(const fs::path& file) {
    std::string text;
    try {
        text = io::read_file(file);
    } catch (const std::exception& e) {
        throw ValidationError("cannot read config " + file.string() + ": " + e.what());
    }
    return parse(text, file.parent_path());
}

std::string StudyConfig::hash() const { return hash_json(raw); }

void StudyConfig::override_data(std::string_view assignment) {
    std::string key = primary_key(study), value(assignment);
    if (const auto eq = assignment.find('='); eq != std::string_view::npos) {
        key = std::string(assignment.substr(0, eq));
        value = std::string(assignment.substr(eq + 1));
    }
    json* node = &raw["data"];
    std::size_t start = 0;
    for (std::size_t dot; (dot = key.find('.', start)) != std::string::npos; start = dot + 1)
        node = &(*node)[key.substr(start, dot - start)];
    (*node)[key.substr(start)] = fs::absolute(value).string();
    raw["data"].erase("synthetic");
}

void StudyConfig::set_seed(std::uint64_t s) {
    seed = s;
    raw["seed"] = s;
}

pathgrid::StudySpec study_spec(const StudyConfig& c) {
    pathgrid::StudySpec spec;
    if (c.raw.contains("spec")) {
        try {
            spec = pathgrid::StudySpec::from_json(c.raw.at("spec"));
        } catch (const ValidationError& e) {
            throw ValidationError(std::string("config field 'spec': ") + e.what());
        }
    } else if (c.study == "premium") {
        spec = regression::premium_default_spec();
    } else if (c.study == "anomalies") {
        spec = sorting::anomalies_spec(anomaly_names(c));
    } else {
        spec = fmb::fmb_default_spec();
    }
    if (c.raw.contains("restrict")) spec = restrict_spec(spec, c.raw.at("restrict"));
    return spec;
}

LoadedStudy load_study(const StudyConfig& c) {
    const auto spec = study_spec(c);
    const auto& d = data_of(c);
    LoadedStudy out;
    const bool synth = d.contains("synthetic");
    const json syn = synth ? d.at("synthetic") : json::object();

    if (c.study == "premium") {
        std::map<datapanel::Frequency, datapanel::DataPanel> panels;
        if (synth) {
            panels[datapanel::Frequency::monthly] = synthetic::macro_panel(macro_options(syn, c.seed));
            out.data_hash = hash_json({{"synthetic", syn}, {"seed", c.seed}});
        } else {
            const auto p = resolve(c, field(d, "monthly", "data."), "data.monthly");
            panels[datapanel::Frequency::monthly] = datapanel::read_panel_csv(p, datapanel::Frequency::monthly);
            out.data_hash = file_digest(p);
            for (auto [key, freq] : {std::pair{"quarterly", datapanel::Frequency::quarterly},
                                     std::pair{"annual", datapanel::Frequency::annual}}) {
                if (!d.contains(key)) continue;
                const std::string where = std::string("data.") + key;
                const auto q = resolve(c, field(d, key, "data."), where);
                panels[freq] = datapanel::read_panel_csv(q, freq);
                out.data_hash = io::sha256_hex(out.data_hash + file_digest(q));
            }
        }
        regression::PremiumSettings s;
        if (c.raw.contains("settings")) {
            const auto& js = c.raw.at("settings");
            s.amihud_correction = js.value("amihud_correction", s.amihud_correction);
            s.min_observations = js.value("min_observations", s.min_observations);
            s.hac_lag = js.value("hac_lag", s.hac_lag);
        }
        out.executor = std::make_unique<regression::PremiumStudy>(spec, std::move(panels), s);
    } else if (c.study == "anomalies") {
        datapanel::LongPanel lp;
        if (synth) {
            lp = synthetic::stock_panel(stock_options(syn, c.seed));
            out.data_hash = hash_json({{"synthetic", syn}, {"seed", c.seed}});
        } else {
            const auto p = resolve(c, field(d, "panel", "data."), "data.panel");
            lp = datapanel::read_long_csv(p, d.value("id_column", "permno"), d.value("date_column", "date"));
            out.data_hash = file_digest(p);
        }
        const auto j = spec.find_layer("characteristic");
        std::vector<std::string> names;
        if (j)
            for (const auto& o : spec.layers()[*j].options) names.push_back(o.id);
        auto panel = std::make_shared<const sorting::StockPanel>(sorting::StockPanel::from_long(lp, names));
        out.executor = std::make_unique<sorting::AnomaliesStudy>(spec, std::move(panel));
    } else {
        fmb::FmbData data;
        const auto j = spec.find_layer("assets");
        std::vector<std::string> ids;
        if (j)
            for (const auto& o : spec.layers()[*j].options) ids.push_back(o.id);
        if (synth) {
            const auto e = synthetic::factor_economy(factor_options(syn, c.seed));
            data.factors_monthly = e.factors_monthly;
            data.factors_daily = e.factors_daily;
            const std::size_t stocks = syn.value("stocks", std::size_t{100});
            for (const auto& id : ids) data.assets[id] = synthetic_assets(e, id, stocks);
            if (ids.empty()) data.assets["assets"] = {e.assets_monthly, e.assets_daily};
            out.data_hash = hash_json({{"synthetic", syn}, {"seed", c.seed}});
        } else {
            std::string digest;
            const auto fm = resolve(c, field(d, "factors_monthly", "data."), "data.factors_monthly");
            data.factors_monthly = fmb::normalize_factor_names(datapanel::read_panel_csv(fm, datapanel::Frequency::monthly));
            digest += file_digest(fm);
            if (d.contains("factors_daily")) {
                const auto fd = resolve(c, d.at("factors_daily"), "data.factors_daily");
                data.factors_daily = fmb::normalize_factor_names(datapanel::read_panel_csv(fd, datapanel::Frequency::daily));
                digest += file_digest(fd);
            }
            const auto& assets = field(d, "assets", "data.");
            for (const auto& [id, files] : assets.items()) {
                const std::string where = "data.assets." + id;
                fmb::AssetSet set;
                const auto m = resolve(c, field(files, "monthly", where + "."), where + ".monthly");
                set.monthly = datapanel::read_panel_csv(m, datapanel::Frequency::monthly);
                digest += file_digest(m);
                if (files.contains("daily")) {
                    const auto dd = resolve(c, files.at("daily"), where + ".daily");
                    set.daily = datapanel::read_panel_csv(dd, datapanel::Frequency::daily);
                    digest += file_digest(dd);
                }
                data.assets[id] = std::move(set);
            }
            out.data_hash = io::sha256_hex(digest);
        }
        out.executor = std::make_unique<fmb::FmbStudy>(spec, std::move(data));
    }
    return out;
}

std::optional<std::uint64_t> default_path(const StudyExecutor& study) {
    if (const auto* a = dynamic_cast<const sorting::AnomaliesStudy*>(&study)) return a->default_path(0);
    return std::nullopt;
}

}  // namespace forkpath::config
