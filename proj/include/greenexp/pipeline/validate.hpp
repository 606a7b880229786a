#pragma once

// Input checks before a run. Fatal findings stop the pipeline; warnings are reported only.

#include <greenexp/io/csv.hpp>
#include <greenexp/io/geojson.hpp>
#include <greenexp/io/raster_io.hpp>
#include <greenexp/io/tables.hpp>
#include <greenexp/pipeline/config.hpp>
#include <greenexp/rx/ingest.hpp>

#include <fmt/format.h>

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace greenexp::pipeline {

struct Finding {
    std::string check;
    std::string file;
    std::string message;
    std::vector<std::size_t> rows;
};

struct ValidationReport {
    std::vector<Finding> errors;
    std::vector<Finding> warnings;

    bool ok() const { return errors.empty(); }

    io::json to_json() const {
        auto list = [](const std::vector<Finding>& fs) {
            io::json a = io::json::array();
            for (const auto& f : fs) a.push_back({{"check", f.check}, {"file", f.file}, {"message", f.message}, {"rows", f.rows}});
            return a;
        };
        return {{"ok", ok()}, {"errors", list(errors)}, {"warnings", list(warnings)}};
    }
};

namespace detail {

// Runs `load`, turning exceptions into a fatal finding. Returns nullopt on failure.
template <class Fn>
auto guarded(ValidationReport& rep, const std::string& check, const std::filesystem::path& file, Fn load)
    -> std::optional<decltype(load())> {
    try {
        return load();
    } catch (const IngestError& e) {
        rep.errors.push_back({check, file.string(), e.what(), e.rows});
    } catch (const std::exception& e) {
        rep.errors.push_back({check, file.string(), e.what(), {}});
    }
    return std::nullopt;
}

inline Box extent_of(std::span<const AreaUnit> areas) {
    Box b;
    bg::assign_inverse(b);
    for (const auto& a : areas) bg::expand(b, envelope(a.boundary));
    return b;
}

} // namespace detail

inline ValidationReport validate(const PipelineConfig& c) {
    ValidationReport rep;
    namespace fs = std::filesystem;
    for (const auto& key : kRequiredInputs) {
        if (!c.has(key)) rep.errors.push_back({"config", c.source.string(), "missing [inputs] " + key, {}});
        else if (!fs::is_regular_file(c.input(key)))
            rep.errors.push_back({"missing_file", c.input(key).string(), "input '" + key + "' does not exist", {}});
    }
    if (c.has("drugs") && !fs::is_regular_file(c.input("drugs")))
        rep.errors.push_back({"missing_file", c.input("drugs").string(), "input 'drugs' does not exist", {}});
    if (c.prescriptions.empty()) rep.errors.push_back({"config", c.source.string(), "no [prescriptions] months configured", {}});
    for (const auto& [m, path] : c.prescriptions)
        if (!fs::is_regular_file(path))
            rep.errors.push_back({"missing_file", path.string(), fmt::format("prescriptions for month {} do not exist", m), {}});
    for (int m = 1; m <= 12; ++m)
        if (!c.prescriptions.count(m))
            rep.warnings.push_back({"months", c.source.string(), fmt::format("no prescriptions configured for month {}", m), {}});
    if (c.conditions.empty())
        rep.warnings.push_back({"conditions", c.source.string(), "no condition lists configured; only totals are computed", {}});
    for (const auto& [cond, path] : c.conditions) {
        detail::guarded(rep, "condition_list", path, [&] { return io::read_condition_list(path, cond); });
    }
    if (!rep.ok()) return rep;

    const auto areas = detail::guarded(rep, "areas", c.input("areas"), [&] { return io::read_areas(c.input("areas")); });
    std::set<std::string> ids;
    if (areas) {
        for (const auto& a : *areas)
            if (!ids.insert(a.id).second) rep.errors.push_back({"areas", c.input("areas").string(), "duplicate area id '" + a.id + "'", {}});
        if (areas->empty()) rep.errors.push_back({"areas", c.input("areas").string(), "no areas", {}});
    }
    const auto raster = detail::guarded(rep, "green_raster", c.input("green_raster"), [&] { return io::read_raster(c.input("green_raster")); });
    if (areas && raster && !areas->empty()) {
        const Box ae = detail::extent_of(*areas);
        if (looks_geographic(raster->extent()) || !boxes_intersect(ae, raster->extent()))
            rep.errors.push_back({"crs_range", c.input("green_raster").string(),
                                  "raster extent does not overlap the areas; check that both use the same projected CRS", {}});
    }
    detail::guarded(rep, "parks", c.input("parks"), [&] { return io::read_green_spaces(c.input("parks")); });
    const auto segments = detail::guarded(rep, "segments", c.input("segments"), [&] { return io::read_segments(c.input("segments")); });
    if (segments && raster) {
        Box se;
        bg::assign_inverse(se);
        for (const auto& s : *segments) bg::expand(se, envelope(s.geometry));
        if (segments->empty()) rep.warnings.push_back({"segments", c.input("segments").string(), "no street segments", {}});
        else if (!boxes_intersect(se, raster->extent()))
            rep.errors.push_back({"crs_range", c.input("segments").string(), "street segments do not overlap the raster extent", {}});
    }
    const auto images = detail::guarded(rep, "images", c.input("images"), [&] { return io::read_images(c.input("images")); });
    if (images && raster) {
        std::vector<std::size_t> outside;
        for (std::size_t i = 0; i < images->size(); ++i)
            if (!bg::covered_by((*images)[i].location, raster->extent())) outside.push_back(i + 2);
        if (!outside.empty())
            rep.warnings.push_back({"images", c.input("images").string(),
                                    fmt::format("{} images lie outside the raster extent", outside.size()), outside});
    }
    const auto cells = detail::guarded(rep, "population", c.input("population"),
                                       [&] { return io::read_population(c.input("population"), c.params.population_cell_size); });
    if (cells && areas && !areas->empty()) {
        const Box ae = detail::extent_of(*areas);
        std::size_t outside = 0;
        for (const auto& cell : *cells) outside += !bg::covered_by(cell.centroid, ae);
        if (outside)
            rep.warnings.push_back({"population", c.input("population").string(),
                                    fmt::format("{} population cells have centroids outside the area extent", outside), {}});
    }
    if (areas) {
        std::vector<std::string> notes;
        const auto gps = detail::guarded(rep, "patients", c.input("patients"),
                                         [&] { return io::read_practices(c.input("gps"), c.input("patients"), ids, &notes); });
        for (const auto& n : notes) rep.warnings.push_back({"patients", c.input("patients").string(), n, {}});
        if (gps) {
            IngestReport ir;
            usable_practices(*gps, ir);
            for (const auto& w : ir.warnings) rep.warnings.push_back({"gps", c.input("gps").string(), w, {}});
        }
    }
    for (const auto& [m, path] : c.prescriptions) {
        detail::guarded(rep, "prescriptions", path, [&] {
            const io::CsvTable t = io::read_csv(path);
            for (const char* col : {"gp_code", "bnf_code", "items", "quantity", "cost"}) t.column(col);
            for (std::size_t i = 0; i < t.rows.size(); ++i)
                for (const char* col : {"items", "quantity", "cost"}) io::number_at(t, i, col);
            return t.rows.size();
        });
    }
    const auto cov = detail::guarded(rep, "covariates", c.input("covariates"), [&] { return io::read_covariates(c.input("covariates")); });
    if (cov && areas) {
        for (const auto& a : *areas)
            if (!cov->by_area.count(a.id))
                rep.warnings.push_back({"covariates", c.input("covariates").string(), "no covariates for area '" + a.id + "'", {}});
        for (const auto& [id, v] : cov->by_area)
            if (!ids.count(id))
                rep.warnings.push_back({"covariates", c.input("covariates").string(), "covariates for unknown area '" + id + "'", {}});
    }
    if (c.has("drugs")) detail::guarded(rep, "drugs", c.input("drugs"), [&] { return io::read_drugs(c.input("drugs")); });
    return rep;
}

} // namespace greenexp::pipeline
