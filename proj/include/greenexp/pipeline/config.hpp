#pragma once

// Pipeline configuration: one INI file. Relative paths resolve against the
// directory holding the config file.
//
//   [inputs]      areas, green_raster, parks, segments, images, population,
//                 gps, patients, drugs (optional), covariates
//   [prescriptions] month_01 .. month_12 = one CSV per month (absent months are reported)
//   [conditions]  diabetes, hypertension, asthma, depression, anxiety, opioids = BNF code lists
//   [parameters]  see Parameters below
//   [output]      dir

#include <greenexp/access/targets.hpp>
#include <greenexp/error.hpp>
#include <greenexp/greenery/metrics.hpp>
#include <greenexp/rx/prescriptions.hpp>
#include <greenexp/street/choice.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace greenexp::pipeline {

namespace fs = std::filesystem;

struct Parameters {
    double buffer_half_width = 10.0;  // m
    double choice_radius = 500.0;     // m
    ChoiceMode choice_mode = ChoiceMode::angular;
    OnroadDenominator onroad_denominator = OnroadDenominator::area_pixels;
    ImageAggregation image_aggregation = ImageAggregation::mean;
    double walk_budget_minutes = 5.0;
    double walk_speed_kmh = 4.8;
    double max_snap_distance = 200.0; // m
    double population_cell_size = 100.0; // m, side of a population grid cell
    std::size_t bootstrap = 1000;
    std::uint64_t seed = 1;
    double caliper_sd = 0.2;
    std::size_t min_pairs = 10;
    bool gwr = true;
    unsigned jobs = 1;
};

struct PipelineConfig {
    fs::path source; // the config file itself
    std::map<std::string, fs::path> inputs;
    std::map<int, fs::path> prescriptions; // month -> file
    std::map<Condition, fs::path> conditions;
    Parameters params;
    fs::path out_dir;

    bool has(const std::string& key) const { return inputs.count(key) > 0; }
    const fs::path& input(const std::string& key) const {
        auto it = inputs.find(key);
        if (it == inputs.end()) throw ConfigError("config lacks [inputs] " + key);
        return it->second;
    }
};

inline const std::vector<std::string> kRequiredInputs{"areas",    "green_raster", "parks",      "segments", "images",
                                                      "population", "gps",        "patients",   "covariates"};
inline const std::vector<std::string> kOptionalInputs{"drugs"};

namespace detail {

inline ChoiceMode parse_mode(const std::string& s) {
    if (s == "angular") return ChoiceMode::angular;
    if (s == "topological") return ChoiceMode::topological;
    throw ConfigError("choice_mode must be 'angular' or 'topological', got '" + s + "'");
}

inline std::string mode_name(ChoiceMode m) { return m == ChoiceMode::angular ? "angular" : "topological"; }

template <class T>
T get(const boost::property_tree::ptree& pt, const std::string& key, T fallback) {
    try {
        return pt.get<T>(key, fallback);
    } catch (const boost::property_tree::ptree_bad_data&) {
        throw ConfigError("config value for '" + key + "' has the wrong type");
    }
}

inline void check_range(const std::string& name, double v, double lo, double hi) {
    if (!(v >= lo && v <= hi)) throw ConfigError(fmt::format("{} = {} is outside [{}, {}]", name, v, lo, hi));
}

} // namespace detail

inline void check_parameters(const Parameters& p) {
    detail::check_range("buffer_half_width", p.buffer_half_width, 0.5, 100.0);
    if (!(p.choice_radius > 0.0)) throw ConfigError("choice_radius must be > 0");
    detail::check_range("walk_budget_minutes", p.walk_budget_minutes, 0.5, 120.0);
    detail::check_range("walk_speed_kmh", p.walk_speed_kmh, 0.5, 30.0);
    detail::check_range("max_snap_distance", p.max_snap_distance, 0.0, 10000.0);
    detail::check_range("population_cell_size", p.population_cell_size, 1.0, 10000.0);
    detail::check_range("bootstrap", static_cast<double>(p.bootstrap), 2.0, 1e6);
    detail::check_range("caliper_sd", p.caliper_sd, 1e-6, 10.0);
    detail::check_range("min_pairs", static_cast<double>(p.min_pairs), 1.0, 1e6);
    detail::check_range("jobs", p.jobs, 1.0, 1024.0);
}

// Drops "; comment" tails (a ';' after whitespace) so values can carry inline comments.
inline std::string strip_inline_comments(const std::string& text) {
    std::istringstream in(text);
    std::string out, line;
    while (std::getline(in, line)) {
        for (std::size_t i = 1; i < line.size(); ++i) {
            if (line[i] == ';' && (line[i - 1] == ' ' || line[i - 1] == '\t')) {
                line.erase(i);
                break;
            }
        }
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) line.pop_back();
        out += line;
        out += '\n';
    }
    return out;
}

inline PipelineConfig parse_config(const std::string& text, const fs::path& source) {
    boost::property_tree::ptree pt;
    std::istringstream in(strip_inline_comments(text));
    try {
        boost::property_tree::read_ini(in, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(source.string() + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    PipelineConfig c;
    c.source = source;
    const fs::path base = source.has_parent_path() ? source.parent_path() : fs::path(".");
    auto resolve = [&](const std::string& v) {
        const fs::path p(v);
        return (p.is_absolute() ? p : base / p).lexically_normal();
    };
    if (auto s = pt.get_child_optional("inputs")) {
        for (const auto& [k, v] : *s) {
            if (std::find(kRequiredInputs.begin(), kRequiredInputs.end(), k) == kRequiredInputs.end() &&
                std::find(kOptionalInputs.begin(), kOptionalInputs.end(), k) == kOptionalInputs.end())
                throw ConfigError("unknown [inputs] key '" + k + "'");
            c.inputs[k] = resolve(v.data());
        }
    }
    if (auto s = pt.get_child_optional("prescriptions")) {
        for (const auto& [k, v] : *s) {
            int m = 0;
            if (k.size() != 8 || k.rfind("month_", 0) != 0 || (m = std::atoi(k.c_str() + 6)) < 1 || m > 12)
                throw ConfigError("[prescriptions] keys are month_01 .. month_12, got '" + k + "'");
            c.prescriptions[m] = resolve(v.data());
        }
    }
    if (auto s = pt.get_child_optional("conditions")) {
        for (const auto& [k, v] : *s) {
            const Condition cond = parse_condition(k);
            if (cond == Condition::total) throw ConfigError("the total condition needs no code list");
            c.conditions[cond] = resolve(v.data());
        }
    }
    Parameters& p = c.params;
    const std::string P = "parameters.";
    p.buffer_half_width = detail::get(pt, P + "buffer_half_width", p.buffer_half_width);
    const std::string radius = detail::get<std::string>(pt, P + "choice_radius", "500");
    p.choice_radius = radius == "inf" ? kInfiniteRadius : detail::get(pt, P + "choice_radius", p.choice_radius);
    p.choice_mode = detail::parse_mode(detail::get<std::string>(pt, P + "choice_mode", "angular"));
    const std::string denom = detail::get<std::string>(pt, P + "onroad_denominator", "area_pixels");
    if (denom == "area_pixels") p.onroad_denominator = OnroadDenominator::area_pixels;
    else if (denom == "buffer_pixels") p.onroad_denominator = OnroadDenominator::buffer_pixels;
    else throw ConfigError("onroad_denominator must be 'area_pixels' or 'buffer_pixels'");
    const std::string agg = detail::get<std::string>(pt, P + "image_aggregation", "mean");
    if (agg == "mean") p.image_aggregation = ImageAggregation::mean;
    else if (agg == "sum") p.image_aggregation = ImageAggregation::sum;
    else throw ConfigError("image_aggregation must be 'mean' or 'sum'");
    p.walk_budget_minutes = detail::get(pt, P + "walk_budget_minutes", p.walk_budget_minutes);
    p.walk_speed_kmh = detail::get(pt, P + "walk_speed_kmh", p.walk_speed_kmh);
    p.max_snap_distance = detail::get(pt, P + "max_snap_distance", p.max_snap_distance);
    p.population_cell_size = detail::get(pt, P + "population_cell_size", p.population_cell_size);
    p.bootstrap = detail::get(pt, P + "bootstrap", p.bootstrap);
    p.seed = detail::get(pt, P + "seed", p.seed);
    p.caliper_sd = detail::get(pt, P + "caliper_sd", p.caliper_sd);
    p.min_pairs = detail::get(pt, P + "min_pairs", p.min_pairs);
    p.gwr = detail::get(pt, P + "gwr", p.gwr);
    p.jobs = detail::get(pt, P + "jobs", p.jobs);
    check_parameters(p);
    c.out_dir = resolve(detail::get<std::string>(pt, "output.dir", "out"));
    return c;
}

inline PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

// Canonical text of the parameters, used in cache keys and the manifest.
inline std::string parameters_text(const Parameters& p) {
    return fmt::format(
        "buffer_half_width={}\nchoice_radius={}\nchoice_mode={}\nonroad_denominator={}\nimage_aggregation={}\n"
        "walk_budget_minutes={}\nwalk_speed_kmh={}\nmax_snap_distance={}\npopulation_cell_size={}\nbootstrap={}\n"
        "seed={}\ncaliper_sd={}\nmin_pairs={}\ngwr={}\n",
        p.buffer_half_width, p.choice_radius, detail::mode_name(p.choice_mode),
        p.onroad_denominator == OnroadDenominator::area_pixels ? "area_pixels" : "buffer_pixels",
        p.image_aggregation == ImageAggregation::mean ? "mean" : "sum", p.walk_budget_minutes, p.walk_speed_kmh,
        p.max_snap_distance, p.population_cell_size, p.bootstrap, p.seed, p.caliper_sd, p.min_pairs, p.gwr);
}

// Commented config with every default filled in.
inline std::string default_config_text() {
    return R"(; greenexp pipeline configuration

[inputs]
areas = areas.geojson            ; wards or LSOAs, projected meters
green_raster = green.grnr        ; binary green cover (.grnr or ESRI .asc)
parks = parks.geojson            ; public parks and gardens with access
segments = segments.geojson      ; street centre lines
images = images.csv              ; image_id, x, y, green_fraction
population = population.csv      ; cell_id, x, y, population
gps = gps.csv                    ; gp_code, x, y, status
patients = patients.csv          ; gp_code, area_id, count
drugs = drugs.csv                ; bnf_code, name
covariates = covariates.csv      ; area_id, imd_score, building_density, median_age, white_percent

[prescriptions]
month_01 = prescriptions/01.csv

[conditions]
diabetes = conditions/diabetes.csv

[parameters]
buffer_half_width = 10           ; m, street buffer on each side
choice_radius = 500              ; m, or inf
choice_mode = angular            ; angular | topological
onroad_denominator = area_pixels ; area_pixels | buffer_pixels
image_aggregation = mean         ; mean | sum
walk_budget_minutes = 5
walk_speed_kmh = 4.8
max_snap_distance = 200          ; m, cells farther from any street are off-network
population_cell_size = 100       ; m
bootstrap = 1000
seed = 1
caliper_sd = 0.2
min_pairs = 10
gwr = true
jobs = 1

[output]
dir = out
)";
}

} // namespace greenexp::pipeline
