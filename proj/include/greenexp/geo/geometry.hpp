#pragma once

// Planar geometry primitives. Coordinates are plain meters in a projected CRS.

#include <greenexp/error.hpp>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/box.hpp>
#include <boost/geometry/geometries/linestring.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace greenexp {

namespace bg = boost::geometry;

using Point = bg::model::d2::point_xy<double>;
using Polygon = bg::model::polygon<Point>;
using MultiPolygon = bg::model::multi_polygon<Polygon>;
using Polyline = bg::model::linestring<Point>;
using Box = bg::model::box<Point>;

inline double distance(const Point& a, const Point& b) {
    return std::hypot(a.x() - b.x(), a.y() - b.y());
}

inline MultiPolygon rectangle(double x0, double y0, double x1, double y1) {
    Polygon p;
    bg::append(p.outer(), Point{x0, y0});
    bg::append(p.outer(), Point{x0, y1});
    bg::append(p.outer(), Point{x1, y1});
    bg::append(p.outer(), Point{x1, y0});
    bg::append(p.outer(), Point{x0, y0});
    bg::correct(p);
    return MultiPolygon{p};
}

// Fixes ring orientation and closure, then rejects anything Boost.Geometry
// does not consider valid (self-intersections, spikes, zero area).
inline MultiPolygon validated(MultiPolygon mp, const std::string& what = "polygon") {
    bg::correct(mp);
    std::string reason;
    if (!bg::is_valid(mp, reason)) {
        throw DomainError(what + " is not a valid polygon: " + reason);
    }
    if (!bg::is_empty(mp) && !(bg::area(mp) > 0.0)) {
        throw DomainError(what + " has zero area");
    }
    return mp;
}

inline bool is_empty(const MultiPolygon& mp) {
    return bg::is_empty(mp) || bg::area(mp) <= 0.0;
}

inline double area(const MultiPolygon& mp) { return bg::area(mp); }

inline Box envelope(const MultiPolygon& mp) { return bg::return_envelope<Box>(mp); }

inline Box envelope(const Polyline& line) { return bg::return_envelope<Box>(line); }

inline bool boxes_intersect(const Box& a, const Box& b) {
    return !(a.max_corner().x() < b.min_corner().x() || b.max_corner().x() < a.min_corner().x() ||
             a.max_corner().y() < b.min_corner().y() || b.max_corner().y() < a.min_corner().y());
}

// Heuristic: a bounding box entirely inside [-180,180]x[-90,90] is assumed to be lon/lat.
inline bool looks_geographic(const Box& b) {
    return b.min_corner().x() >= -180.0 && b.max_corner().x() <= 180.0 && b.min_corner().y() >= -90.0 &&
           b.max_corner().y() <= 90.0;
}

inline double length(const Polyline& line) { return bg::length(line); }

// Point at arc length `s` along the polyline, clamped to its ends.
inline Point point_along(const Polyline& line, double s) {
    if (line.empty()) throw DomainError("empty polyline");
    if (s <= 0.0) return line.front();
    for (std::size_t i = 1; i < line.size(); ++i) {
        const double seg = distance(line[i - 1], line[i]);
        if (s <= seg && seg > 0.0) {
            const double t = s / seg;
            return Point{line[i - 1].x() + t * (line[i].x() - line[i - 1].x()),
                         line[i - 1].y() + t * (line[i].y() - line[i - 1].y())};
        }
        s -= seg;
    }
    return line.back();
}

// Compass bearing of the vector a->b in degrees, clockwise from north, in [0, 360).
inline double bearing(const Point& a, const Point& b) {
    double deg = std::atan2(b.x() - a.x(), b.y() - a.y()) * 180.0 / std::numbers::pi;
    if (deg < 0.0) deg += 360.0;
    if (deg >= 360.0) deg -= 360.0;
    return deg;
}

// Smallest absolute difference between two bearings, in [0, 180].
inline double bearing_difference(double a, double b) {
    double d = std::fmod(std::abs(a - b), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

// Nearest point on segment [a, b] to p, and its parameter t in [0, 1].
struct Projection {
    Point point;
    double t = 0.0;
    double distance = 0.0;
};

inline Projection project(const Point& p, const Point& a, const Point& b) {
    const double dx = b.x() - a.x();
    const double dy = b.y() - a.y();
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((p.x() - a.x()) * dx + (p.y() - a.y()) * dy) / len2, 0.0, 1.0);
    Point q{a.x() + t * dx, a.y() + t * dy};
    return {q, t, distance(p, q)};
}

} // namespace greenexp
