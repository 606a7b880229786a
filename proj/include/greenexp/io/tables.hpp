#pragma once

// Small input tables:
//   images:      image_id, x, y, green_fraction
//   population:  cell_id, x, y, population     (x, y = cell centre; side from config)
//   covariates:  area_id, imd_score, building_density, median_age, white_percent (empty = missing)

#include <greenexp/access/targets.hpp>
#include <greenexp/greenery/metrics.hpp>
#include <greenexp/io/csv.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace greenexp::io {

inline const std::vector<std::string> kConfounders{"imd_score", "building_density", "median_age", "white_percent"};

inline std::vector<StreetImageRecord> parse_images(const CsvTable& t) {
    const std::size_t id = t.column("image_id");
    std::vector<StreetImageRecord> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        StreetImageRecord r;
        r.image_id = t.rows[i][id];
        r.location = Point{number_at(t, i, "x"), number_at(t, i, "y")};
        r.green_fraction = number_at(t, i, "green_fraction");
        if (r.green_fraction < 0.0 || r.green_fraction > 1.0)
            throw IngestError(t.source + ": line " + std::to_string(t.lines[i]) + ": green_fraction outside [0, 1]", {t.lines[i]});
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<PopulationCell> parse_population(const CsvTable& t, double cell_size) {
    if (!(cell_size > 0.0)) throw ConfigError("population cell size must be > 0");
    const std::size_t id = t.column("cell_id");
    std::vector<PopulationCell> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const double pop = number_at(t, i, "population");
        if (pop < 0.0) throw IngestError(t.source + ": line " + std::to_string(t.lines[i]) + ": negative population", {t.lines[i]});
        out.push_back(square_cell(t.rows[i][id], number_at(t, i, "x"), number_at(t, i, "y"), cell_size, pop));
    }
    return out;
}

struct CovariateTable {
    std::vector<std::string> names;
    std::map<std::string, std::vector<std::optional<double>>> by_area;

    std::optional<double> get(const std::string& area, std::size_t k) const {
        auto it = by_area.find(area);
        return it == by_area.end() ? std::nullopt : it->second[k];
    }
};

inline CovariateTable parse_covariates(const CsvTable& t, const std::vector<std::string>& names = kConfounders) {
    CovariateTable out;
    out.names = names;
    const std::size_t id = t.column("area_id");
    std::vector<std::size_t> cols;
    for (const auto& n : names) cols.push_back(t.column(n));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        std::vector<std::optional<double>> v;
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const std::string& f = t.rows[i][cols[k]];
            if (f.empty() || f == "NA") v.emplace_back();
            else v.emplace_back(parse_number(f, t, i, names[k]));
        }
        if (!out.by_area.emplace(t.rows[i][id], std::move(v)).second)
            throw IngestError(t.source + ": duplicate area '" + t.rows[i][id] + "'", {t.lines[i]});
    }
    return out;
}

inline std::vector<StreetImageRecord> read_images(const std::filesystem::path& p) { return parse_images(read_csv(p)); }
inline std::vector<PopulationCell> read_population(const std::filesystem::path& p, double cell_size) {
    return parse_population(read_csv(p), cell_size);
}
inline CovariateTable read_covariates(const std::filesystem::path& p) { return parse_covariates(read_csv(p)); }

} // namespace greenexp::io
