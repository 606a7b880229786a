#pragma once

// Per-area greenery scores: total green cover, on-road greenery (from the green
// raster or from street-level imagery) weighted by segment choice, and
// off-road public greenery outside the street buffers.

#include <greenexp/geo/buffer.hpp>
#include <greenexp/geo/features.hpp>
#include <greenexp/geo/raster.hpp>
#include <greenexp/street/graph.hpp>

#include <boost/geometry/index/rtree.hpp>

#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace greenexp {

struct StreetImageRecord {
    std::string image_id;
    Point location{0.0, 0.0};
    double green_fraction = 0.0;
};

enum class OnroadDenominator {
    area_pixels,  // buffer green pixels over all pixels of the area
    buffer_pixels // buffer green pixels over the buffer's own pixels
};

enum class ImageAggregation { mean, sum };

struct GreeneryVector {
    std::string area_id;
    double g_total_ndvi = 0.0;
    double g_onroad_ndvi = 0.0;
    std::optional<double> g_onroad_gsv;
    double g_offroad = 0.0;
    std::optional<double> who_share;
    std::optional<double> esa_who_share;
    std::optional<double> ne_share;
    std::vector<std::string> warnings;
};

// Share of the area's pixels that are green.
inline double total_ndvi(const AreaUnit& area, const GreenRaster& raster) {
    if (!boxes_intersect(envelope(area.boundary), raster.extent())) {
        throw DomainError("area '" + area.id + "' lies outside the green raster");
    }
    const Fraction f = rasterize_fraction(raster, area.boundary);
    if (f.no_coverage) throw DomainError("area '" + area.id + "' covers no raster pixels");
    return f.value;
}

// Green pixels that fall inside a public park or garden. Restricted spaces are ignored.
inline GreenRaster public_greenery(const GreenRaster& raster, std::span<const GreenSpacePolygon> parks) {
    std::vector<MultiPolygon> open;
    for (const auto& p : parks) {
        if (p.is_public()) open.push_back(p.boundary);
    }
    return raster & burn(raster, open);
}

// Weighted mean of scores; falls back to the plain mean when all weights are zero.
inline std::optional<double> weighted_mean(std::span<const double> scores, std::span<const double> weights) {
    if (scores.empty()) return std::nullopt;
    double sw = 0.0, swg = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        sw += weights[i];
        swg += weights[i] * scores[i];
    }
    if (sw > 0.0) return swg / sw;
    return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

// Street buffers and choice weights of the segments assigned to one area.
struct AreaStreets {
    std::vector<Buffer> buffers;
    std::vector<double> weights;
};

struct OnroadResult {
    double value = 0.0;
    std::vector<double> per_segment;
    bool no_segments = false;
};

// Per segment: public green pixels inside (buffer ∩ area) divided by the
// area's pixels (or the clipped buffer's pixels); area score is the
// choice-weighted mean over the area's segments.
inline OnroadResult onroad_ndvi(const AreaUnit& area, const GreenRaster& public_green, const AreaStreets& streets,
                                OnroadDenominator denominator = OnroadDenominator::area_pixels) {
    OnroadResult out;
    if (streets.buffers.empty()) {
        out.no_segments = true;
        return out;
    }
    const RunList area_runs = runs_of(public_green, area.boundary);
    const std::size_t area_pixels = pixel_count(area_runs);
    if (area_pixels == 0) throw DomainError("area '" + area.id + "' covers no raster pixels");
    for (const Buffer& b : streets.buffers) {
        const RunList clipped = intersect(area_runs, runs_of(public_green, b.geometry));
        const std::size_t green = green_count(public_green, clipped);
        const double denom = static_cast<double>(denominator == OnroadDenominator::area_pixels ? area_pixels
                                                                                               : pixel_count(clipped));
        out.per_segment.push_back(denom > 0.0 ? static_cast<double>(green) / denom : 0.0);
    }
    out.value = *weighted_mean(out.per_segment, streets.weights);
    return out;
}

using ImageIndex = bg::index::rtree<std::pair<Point, std::size_t>, bg::index::quadratic<16>>;

inline ImageIndex index_images(std::span<const StreetImageRecord> images) {
    std::vector<std::pair<Point, std::size_t>> entries;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& im = images[i];
        if (!(im.green_fraction >= 0.0 && im.green_fraction <= 1.0)) {
            throw DomainError("image '" + im.image_id + "' green_fraction outside [0, 1]");
        }
        if (!std::isfinite(im.location.x()) || !std::isfinite(im.location.y())) {
            throw DomainError("image '" + im.image_id + "' has a non-finite location");
        }
        entries.emplace_back(im.location, i);
    }
    return ImageIndex(entries.begin(), entries.end());
}

struct ImageOnroadResult {
    std::optional<double> value; // missing when no segment of the area has images
    std::vector<std::optional<double>> per_segment;
};

// Street-imagery on-road score. An image inside several overlapping buffers counts for each.
inline ImageOnroadResult onroad_gsv(std::span<const StreetImageRecord> images, const ImageIndex& index,
                                    const AreaStreets& streets, ImageAggregation mode = ImageAggregation::mean) {
    ImageOnroadResult out;
    std::vector<double> scores, weights;
    std::vector<std::pair<Point, std::size_t>> hits;
    for (std::size_t s = 0; s < streets.buffers.size(); ++s) {
        const auto& geom = streets.buffers[s].geometry;
        hits.clear();
        index.query(bg::index::intersects(envelope(geom)), std::back_inserter(hits));
        std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& [pt, idx] : hits) {
            if (!bg::covered_by(pt, geom)) continue;
            sum += images[idx].green_fraction;
            ++n;
        }
        if (n == 0) {
            out.per_segment.emplace_back();
            continue;
        }
        const double g = mode == ImageAggregation::mean ? sum / static_cast<double>(n) : sum;
        out.per_segment.emplace_back(g);
        scores.push_back(g);
        weights.push_back(streets.weights[s]);
    }
    out.value = weighted_mean(scores, weights);
    return out;
}

inline ImageOnroadResult onroad_gsv(std::span<const StreetImageRecord> images, const AreaStreets& streets,
                                    ImageAggregation mode = ImageAggregation::mean) {
    return onroad_gsv(images, index_images(images), streets, mode);
}

// Public green pixels of an area split by whether a street buffer covers them.
struct GreenSplit {
    std::size_t area_pixels = 0;
    std::size_t public_green = 0;
    std::size_t on_road = 0;  // public green covered by some buffer
    std::size_t off_road = 0; // public green outside every buffer
};

inline GreenSplit split_public_green(const AreaUnit& area, const GreenRaster& public_green,
                                     const GreenRaster& buffer_mask) {
    GreenSplit s;
    for_each_run(public_green, area.boundary, [&](std::size_t row, std::size_t c0, std::size_t c1) {
        s.area_pixels += c1 - c0;
        s.public_green += public_green.count_run(row, c0, c1);
        s.on_road += public_green.count_run_with(buffer_mask, row, c0, c1, [](auto g, auto m) { return g & m; });
        s.off_road += public_green.count_run_with(buffer_mask, row, c0, c1, [](auto g, auto m) { return g & ~m; });
    });
    return s;
}

inline GreenRaster buffer_mask(const GreenRaster& like, std::span<const Buffer> buffers) {
    GreenRaster mask = like.empty_like();
    for (const Buffer& b : buffers) {
        for_each_run(mask, b.geometry, [&](std::size_t row, std::size_t c0, std::size_t c1) { mask.set_run(row, c0, c1); });
    }
    return mask;
}

// Public green pixels of the area not covered by any street buffer, over all area pixels.
inline double offroad(const AreaUnit& area, const GreenRaster& public_green, const GreenRaster& buffers_mask) {
    std::size_t pixels = 0, green = 0;
    for_each_run(public_green, area.boundary, [&](std::size_t row, std::size_t c0, std::size_t c1) {
        pixels += c1 - c0;
        green += public_green.count_run_with(buffers_mask, row, c0, c1, [](auto g, auto m) { return g & ~m; });
    });
    if (pixels == 0) throw DomainError("area '" + area.id + "' covers no raster pixels");
    return static_cast<double>(green) / static_cast<double>(pixels);
}

inline double offroad(const AreaUnit& area, const GreenRaster& public_green, std::span<const Buffer> buffers) {
    return offroad(area, public_green, buffer_mask(public_green, buffers));
}

// Index of the first area (in dataset order) whose boundary covers each segment midpoint.
inline std::vector<std::optional<std::size_t>> assign_segments(std::span<const AreaUnit> areas,
                                                               const StreetGraph& graph) {
    using Entry = std::pair<Box, std::size_t>;
    std::vector<Entry> boxes;
    for (std::size_t a = 0; a < areas.size(); ++a) boxes.emplace_back(envelope(areas[a].boundary), a);
    bg::index::rtree<Entry, bg::index::quadratic<16>> tree(boxes.begin(), boxes.end());
    std::vector<std::optional<std::size_t>> out(graph.size());
    std::vector<Entry> hits;
    for (std::size_t s = 0; s < graph.size(); ++s) {
        const Point& mid = graph.segment(s).midpoint;
        hits.clear();
        tree.query(bg::index::intersects(mid), std::back_inserter(hits));
        std::sort(hits.begin(), hits.end(), [](const Entry& a, const Entry& b) { return a.second < b.second; });
        for (const auto& [box, a] : hits) {
            if (bg::covered_by(mid, areas[a].boundary)) {
                out[s] = a;
                break;
            }
        }
    }
    return out;
}

} // namespace greenexp
