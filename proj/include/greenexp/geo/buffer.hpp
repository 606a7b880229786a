#pragma once

#include <greenexp/geo/geometry.hpp>

#include <string>

namespace greenexp {

struct Buffer {
    std::string source_segment_id;
    MultiPolygon geometry;
    double half_width = 0.0;
};

// Round joins discretized at 16 points per quarter circle.
inline constexpr int kBufferPointsPerCircle = 64;

// Polygon at uniform distance `half_width` on either side of `segment`:
// flat end caps, round joins.
inline Buffer buffer_polyline(const Polyline& segment, double half_width, std::string source_id = {}) {
    if (!(half_width > 0.0)) throw DomainError("buffer half_width must be > 0");
    Polyline line = segment;
    bg::unique(line);
    if (line.size() < 2 || !(length(line) > 0.0)) {
        throw DomainError("cannot buffer a zero-length segment" + (source_id.empty() ? "" : " '" + source_id + "'"));
    }

    bg::strategy::buffer::distance_symmetric<double> distance(half_width);
    bg::strategy::buffer::side_straight side;
    bg::strategy::buffer::join_round join(kBufferPointsPerCircle);
    bg::strategy::buffer::end_flat end;
    bg::strategy::buffer::point_circle circle(kBufferPointsPerCircle);

    Buffer out;
    out.source_segment_id = std::move(source_id);
    out.half_width = half_width;
    bg::buffer(line, out.geometry, distance, side, join, end, circle);
    bg::correct(out.geometry);
    return out;
}

} // namespace greenexp
