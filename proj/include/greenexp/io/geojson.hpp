#pragma once

// GeoJSON FeatureCollections in projected meters.
//
// Areas:    Polygon/MultiPolygon, properties id, kind ("ward" | "lsoa"), population,
//           any other numeric property kept as a covariate.
// Parks:    Polygon/MultiPolygon, properties id, kind ("park" | "garden"), access ("open" | "restricted").
// Segments: LineString (or single-part MultiLineString), property id.
// Cells:    Polygon, properties id, population.

#include <greenexp/access/targets.hpp>
#include <greenexp/error.hpp>
#include <greenexp/geo/features.hpp>
#include <greenexp/geo/geometry.hpp>
#include <greenexp/street/graph.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace greenexp::io {

using nlohmann::json;

inline json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw IngestError(path.string() + ": " + e.what(), {});
    }
}

namespace detail {

inline Point point_of(const json& c, const std::string& where) {
    if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number())
        throw IngestError(where + ": bad coordinate", {});
    return Point{c[0].get<double>(), c[1].get<double>()};
}

inline Polygon polygon_of(const json& rings, const std::string& where) {
    if (!rings.is_array() || rings.empty()) throw IngestError(where + ": polygon without rings", {});
    Polygon p;
    for (std::size_t r = 0; r < rings.size(); ++r) {
        auto& ring = r == 0 ? p.outer() : (p.inners().emplace_back(), p.inners().back());
        for (const auto& c : rings[r]) ring.push_back(point_of(c, where));
    }
    return p;
}

inline const json& geometry_of(const json& feature, const std::string& where) {
    if (!feature.contains("geometry") || feature["geometry"].is_null()) throw IngestError(where + ": feature has no geometry", {});
    return feature["geometry"];
}

inline std::string id_of(const json& props, const std::string& where) {
    if (!props.contains("id")) throw IngestError(where + ": feature has no id property", {});
    const json& v = props["id"];
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw IngestError(where + ": id must be a string or integer", {});
}

inline std::string string_or(const json& props, const char* key, std::string fallback) {
    return props.contains(key) && props[key].is_string() ? props[key].get<std::string>() : fallback;
}

// Feature list with a location string per feature for messages.
inline std::vector<std::pair<const json*, std::string>> features_of(const json& fc, const std::string& source) {
    if (!fc.is_object() || fc.value("type", "") != "FeatureCollection" || !fc.contains("features"))
        throw IngestError(source + ": not a GeoJSON FeatureCollection", {});
    std::vector<std::pair<const json*, std::string>> out;
    std::size_t i = 0;
    for (const auto& f : fc["features"]) out.emplace_back(&f, source + ": feature " + std::to_string(i++));
    return out;
}

inline const json& properties_of(const json& f) {
    static const json empty = json::object();
    return f.contains("properties") && f["properties"].is_object() ? f["properties"] : empty;
}

inline void require_projected(const Box& b, const std::string& source) {
    if (looks_geographic(b))
        throw ConfigError(source + ": coordinates look like longitude/latitude; project to meters first");
}

} // namespace detail

inline MultiPolygon multipolygon_from_json(const json& g, const std::string& where) {
    const std::string type = g.value("type", "");
    MultiPolygon mp;
    if (type == "Polygon") {
        mp.push_back(detail::polygon_of(g["coordinates"], where));
    } else if (type == "MultiPolygon") {
        for (const auto& p : g["coordinates"]) mp.push_back(detail::polygon_of(p, where));
    } else {
        throw IngestError(where + ": expected Polygon or MultiPolygon, got '" + type + "'", {});
    }
    return validated(std::move(mp), where);
}

inline Polyline polyline_from_json(const json& g, const std::string& where) {
    const std::string type = g.value("type", "");
    const json* coords = nullptr;
    if (type == "LineString") coords = &g["coordinates"];
    else if (type == "MultiLineString" && g["coordinates"].size() == 1) coords = &g["coordinates"][0];
    else throw IngestError(where + ": expected LineString, got '" + type + "'", {});
    Polyline line;
    for (const auto& c : *coords) line.push_back(detail::point_of(c, where));
    return line;
}

inline json to_json(const MultiPolygon& mp) {
    auto ring_json = [](const auto& ring) {
        json r = json::array();
        for (const auto& p : ring) r.push_back({p.x(), p.y()});
        return r;
    };
    auto poly_json = [&](const Polygon& p) {
        json rings = json::array({ring_json(p.outer())});
        for (const auto& in : p.inners()) rings.push_back(ring_json(in));
        return rings;
    };
    if (mp.size() == 1) return {{"type", "Polygon"}, {"coordinates", poly_json(mp.front())}};
    json coords = json::array();
    for (const auto& p : mp) coords.push_back(poly_json(p));
    return {{"type", "MultiPolygon"}, {"coordinates", coords}};
}

inline json to_json(const Polyline& line) {
    json coords = json::array();
    for (const auto& p : line) coords.push_back({p.x(), p.y()});
    return {{"type", "LineString"}, {"coordinates", coords}};
}

inline json feature(json geometry, json properties) {
    return {{"type", "Feature"}, {"properties", std::move(properties)}, {"geometry", std::move(geometry)}};
}

inline json feature_collection(json features) {
    return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

inline std::vector<AreaUnit> parse_areas(const json& fc, const std::string& source = "areas") {
    std::vector<AreaUnit> out;
    Box all;
    bg::assign_inverse(all);
    for (const auto& [f, where] : detail::features_of(fc, source)) {
        const json& props = detail::properties_of(*f);
        AreaUnit a;
        a.id = detail::id_of(props, where);
        const std::string kind = detail::string_or(props, "kind", "ward");
        if (kind == "ward") a.kind = AreaKind::ward;
        else if (kind == "lsoa") a.kind = AreaKind::lsoa;
        else throw IngestError(where + ": unknown area kind '" + kind + "'", {});
        a.boundary = multipolygon_from_json(detail::geometry_of(*f, where), where);
        for (const auto& [key, value] : props.items()) {
            if (key == "population" && value.is_number()) a.population = value.get<double>();
            else if (key != "id" && value.is_number()) a.covariates[key] = value.get<double>();
        }
        bg::expand(all, envelope(a.boundary));
        out.push_back(std::move(a));
    }
    if (!out.empty()) detail::require_projected(all, source);
    return out;
}

inline std::vector<GreenSpacePolygon> parse_green_spaces(const json& fc, const std::string& source = "parks") {
    std::vector<GreenSpacePolygon> out;
    Box all;
    bg::assign_inverse(all);
    for (const auto& [f, where] : detail::features_of(fc, source)) {
        const json& props = detail::properties_of(*f);
        GreenSpacePolygon g;
        g.id = detail::id_of(props, where);
        const std::string kind = detail::string_or(props, "kind", "park");
        if (kind == "park") g.kind = GreenSpaceKind::park;
        else if (kind == "garden") g.kind = GreenSpaceKind::garden;
        else throw IngestError(where + ": unknown green space kind '" + kind + "'", {});
        const std::string access = detail::string_or(props, "access", "open");
        if (access == "open") g.access = Access::open;
        else if (access == "restricted") g.access = Access::restricted;
        else throw IngestError(where + ": unknown access '" + access + "'", {});
        g.boundary = multipolygon_from_json(detail::geometry_of(*f, where), where);
        bg::expand(all, envelope(g.boundary));
        out.push_back(std::move(g));
    }
    if (!out.empty()) detail::require_projected(all, source);
    return out;
}

inline std::vector<StreetSegment> parse_segments(const json& fc, const std::string& source = "segments") {
    std::vector<StreetSegment> out;
    Box all;
    bg::assign_inverse(all);
    for (const auto& [f, where] : detail::features_of(fc, source)) {
        const json& props = detail::properties_of(*f);
        Polyline line = polyline_from_json(detail::geometry_of(*f, where), where);
        bg::expand(all, envelope(line));
        out.push_back(StreetSegment::from_polyline(detail::id_of(props, where), std::move(line)));
    }
    if (!out.empty()) detail::require_projected(all, source);
    return out;
}

inline std::vector<PopulationCell> parse_cells(const json& fc, const std::string& source = "population") {
    std::vector<PopulationCell> out;
    for (const auto& [f, where] : detail::features_of(fc, source)) {
        const json& props = detail::properties_of(*f);
        PopulationCell c;
        c.id = detail::id_of(props, where);
        c.polygon = multipolygon_from_json(detail::geometry_of(*f, where), where);
        bg::centroid(c.polygon, c.centroid);
        c.population = props.value("population", 0.0);
        if (c.population < 0.0) throw IngestError(where + ": negative population", {});
        out.push_back(std::move(c));
    }
    return out;
}

inline std::vector<AreaUnit> read_areas(const std::filesystem::path& p) { return parse_areas(read_json(p), p.string()); }
inline std::vector<GreenSpacePolygon> read_green_spaces(const std::filesystem::path& p) {
    return parse_green_spaces(read_json(p), p.string());
}
inline std::vector<StreetSegment> read_segments(const std::filesystem::path& p) {
    return parse_segments(read_json(p), p.string());
}
inline std::vector<PopulationCell> read_cells_geojson(const std::filesystem::path& p) {
    return parse_cells(read_json(p), p.string());
}

} // namespace greenexp::io
