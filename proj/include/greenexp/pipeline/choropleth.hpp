#pragma once

// Choropleth export: a GeoJSON copy of the areas carrying value and z-score
// properties, and a static SVG map.
//
// Colour ramp: values are standardized to z-scores over the areas with a
// value, then t = (z - zmin) / (zmax - zmin) picks a colour on the nine-step
// sequential greens ramp below by linear interpolation in RGB. Darker means
// higher. When every z is equal t = 0.5. Areas without a value are drawn in
// light grey with a dashed outline.

#include <greenexp/geo/features.hpp>
#include <greenexp/io/geojson.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace greenexp::pipeline {

inline constexpr std::array<std::array<int, 3>, 9> kGreens{{{247, 252, 245},
                                                             {229, 245, 224},
                                                             {199, 233, 192},
                                                             {161, 217, 155},
                                                             {116, 196, 118},
                                                             {65, 171, 93},
                                                             {35, 139, 69},
                                                             {0, 109, 44},
                                                             {0, 68, 27}}};
inline constexpr const char* kNoDataFill = "#d9d9d9";

inline std::string ramp_colour(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const double pos = t * static_cast<double>(kGreens.size() - 1);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(pos), kGreens.size() - 2);
    const double f = pos - static_cast<double>(i);
    std::array<int, 3> rgb{};
    for (int k = 0; k < 3; ++k)
        rgb[static_cast<std::size_t>(k)] = static_cast<int>(std::lround(kGreens[i][static_cast<std::size_t>(k)] * (1.0 - f) +
                                                                        kGreens[i + 1][static_cast<std::size_t>(k)] * f));
    return fmt::format("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2]);
}

// z-scores over the present values (population SD); all-equal values give z = 0.
inline std::vector<std::optional<double>> z_scores(std::span<const std::optional<double>> values) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : values)
        if (v) sum += *v, ++n;
    std::vector<std::optional<double>> out(values.size());
    if (n == 0) return out;
    const double mean = sum / static_cast<double>(n);
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& v : values)
        if (v) lo = std::min(lo, *v), hi = std::max(hi, *v);
    double ss = 0.0;
    for (const auto& v : values)
        if (v) ss += (*v - mean) * (*v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i]) out[i] = lo < hi && sd > 0.0 ? (*values[i] - mean) / sd : 0.0;
    return out;
}

// Ramp position per area; missing values stay missing.
inline std::vector<std::optional<double>> ramp_positions(std::span<const std::optional<double>> values) {
    const auto z = z_scores(values);
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& v : z)
        if (v) lo = std::min(lo, *v), hi = std::max(hi, *v);
    std::vector<std::optional<double>> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        if (z[i]) out[i] = hi > lo ? (*z[i] - lo) / (hi - lo) : 0.5;
    return out;
}

struct Choropleth {
    std::string geojson;
    std::string svg;
};

inline Choropleth export_choropleth(std::span<const std::optional<double>> values, std::span<const AreaUnit> areas,
                                    const std::string& title) {
    if (values.size() != areas.size()) throw DomainError("one value per area is required");
    const auto z = z_scores(values);
    const auto t = ramp_positions(values);

    io::json features = io::json::array();
    for (std::size_t i = 0; i < areas.size(); ++i) {
        io::json props{{"id", areas[i].id},
                       {"value", values[i] ? io::json(*values[i]) : io::json(nullptr)},
                       {"z", z[i] ? io::json(*z[i]) : io::json(nullptr)},
                       {"fill", t[i] ? ramp_colour(*t[i]) : std::string(kNoDataFill)}};
        features.push_back(io::feature(io::to_json(areas[i].boundary), std::move(props)));
    }
    Choropleth out;
    out.geojson = io::feature_collection(std::move(features)).dump(1) + "\n";

    Box ext;
    bg::assign_inverse(ext);
    for (const auto& a : areas) bg::expand(ext, envelope(a.boundary));
    const double w = areas.empty() ? 1.0 : ext.max_corner().x() - ext.min_corner().x();
    const double h = areas.empty() ? 1.0 : ext.max_corner().y() - ext.min_corner().y();
    const double width = 600.0, margin = 20.0, legend = 60.0;
    const double scale = (w > 0.0 ? width / w : 1.0);
    const double height = (h > 0.0 ? h * scale : width);
    auto X = [&](double x) { return margin + (x - ext.min_corner().x()) * scale; };
    auto Y = [&](double y) { return margin + (ext.max_corner().y() - y) * scale; };

    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n",
        width + 2 * margin, height + 2 * margin + legend, width + 2 * margin, height + 2 * margin + legend);
    svg += fmt::format("<title>{}</title>\n", title);
    for (std::size_t i = 0; i < areas.size(); ++i) {
        std::string d;
        for (const auto& poly : areas[i].boundary) {
            auto ring = [&](const auto& r) {
                for (std::size_t k = 0; k + 1 < r.size(); ++k) d += fmt::format("{}{:.2f},{:.2f}", k ? "L" : "M", X(r[k].x()), Y(r[k].y()));
                d += "Z";
            };
            ring(poly.outer());
            for (const auto& in : poly.inners()) ring(in);
        }
        if (t[i]) {
            svg += fmt::format("<path id=\"{}\" d=\"{}\" fill=\"{}\" fill-rule=\"evenodd\" stroke=\"#636363\" stroke-width=\"0.5\"/>\n",
                               areas[i].id, d, ramp_colour(*t[i]));
        } else {
            svg += fmt::format("<path id=\"{}\" d=\"{}\" fill=\"{}\" fill-rule=\"evenodd\" stroke=\"#969696\" "
                               "stroke-width=\"0.5\" stroke-dasharray=\"3,2\"/>\n",
                               areas[i].id, d, kNoDataFill);
        }
    }
    // Legend: the ramp from the lowest to the highest standardized score.
    double zlo = 0.0, zhi = 0.0;
    bool any = false;
    for (const auto& v : z)
        if (v) zlo = any ? std::min(zlo, *v) : *v, zhi = any ? std::max(zhi, *v) : *v, any = true;
    const double ly = height + 2 * margin;
    svg += "<defs><linearGradient id=\"ramp\">";
    for (std::size_t k = 0; k < kGreens.size(); ++k)
        svg += fmt::format("<stop offset=\"{:.3f}\" stop-color=\"{}\"/>", static_cast<double>(k) / (kGreens.size() - 1),
                           ramp_colour(static_cast<double>(k) / (kGreens.size() - 1)));
    svg += "</linearGradient></defs>\n";
    svg += fmt::format("<rect x=\"{:.0f}\" y=\"{:.0f}\" width=\"200\" height=\"12\" fill=\"url(#ramp)\" stroke=\"#636363\" stroke-width=\"0.5\"/>\n",
                       margin, ly);
    svg += fmt::format("<text x=\"{:.0f}\" y=\"{:.0f}\" font-size=\"10\" font-family=\"sans-serif\">{:.2f}</text>\n", margin, ly + 26, zlo);
    svg += fmt::format("<text x=\"{:.0f}\" y=\"{:.0f}\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"end\">{:.2f}</text>\n",
                       margin + 200, ly + 26, zhi);
    svg += fmt::format("<text x=\"{:.0f}\" y=\"{:.0f}\" font-size=\"10\" font-family=\"sans-serif\">standardized score</text>\n",
                       margin + 210, ly + 10);
    svg += fmt::format("<rect x=\"{:.0f}\" y=\"{:.0f}\" width=\"12\" height=\"12\" fill=\"{}\" stroke=\"#969696\" stroke-dasharray=\"3,2\"/>\n",
                       margin + 320, ly, kNoDataFill);
    svg += fmt::format("<text x=\"{:.0f}\" y=\"{:.0f}\" font-size=\"10\" font-family=\"sans-serif\">no data</text>\n", margin + 336, ly + 10);
    svg += "</svg>\n";
    out.svg = std::move(svg);
    return out;
}

} // namespace greenexp::pipeline
