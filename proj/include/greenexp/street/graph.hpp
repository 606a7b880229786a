#pragma once

// Segment-dual street graph: one node per street segment, links between
// segments whose endpoints meet (within a snap tolerance).

#include <greenexp/geo/geometry.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace greenexp {

struct StreetSegment {
    std::string id;
    Polyline geometry;
    double length = 0.0;
    Point midpoint{0.0, 0.0};
    double azimuth = 0.0; // bearing start -> end, degrees in [0, 360)

    static StreetSegment from_polyline(std::string id, Polyline geometry) {
        bg::unique(geometry);
        StreetSegment s;
        s.id = std::move(id);
        s.length = greenexp::length(geometry);
        if (geometry.size() < 2 || !(s.length > 0.0)) {
            throw DomainError("street segment '" + s.id + "' has zero length");
        }
        s.geometry = std::move(geometry);
        s.midpoint = point_along(s.geometry, 0.5 * s.length);
        s.azimuth = bearing(s.geometry.front(), s.geometry.back());
        return s;
    }

    const Point& start() const { return geometry.front(); }
    const Point& end() const { return geometry.back(); }

    // Direction of travel when arriving at the given end (false = start, true = end).
    double arrival_bearing(bool at_end) const {
        const auto n = geometry.size();
        return at_end ? bearing(geometry[n - 2], geometry[n - 1]) : bearing(geometry[1], geometry[0]);
    }

    // Direction of travel when leaving through the given end.
    double departure_bearing(bool at_end) const {
        const auto n = geometry.size();
        return at_end ? bearing(geometry[n - 1], geometry[n - 2]) : bearing(geometry[0], geometry[1]);
    }
};

struct Link {
    std::uint32_t to = 0;
    double turn_angle = 0.0; // degrees in [0, 180]
};

class StreetGraph {
public:
    StreetGraph() = default;

    // Adjacency must be symmetric; lists are sorted by neighbour index.
    StreetGraph(std::vector<StreetSegment> segments, std::vector<std::vector<Link>> adjacency)
        : segments_(std::move(segments)), adjacency_(std::move(adjacency)) {
        if (adjacency_.size() != segments_.size()) throw DomainError("adjacency size does not match segment count");
        for (auto& links : adjacency_) {
            std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) { return a.to < b.to; });
        }
    }

    std::size_t size() const { return segments_.size(); }
    const std::vector<StreetSegment>& segments() const { return segments_; }
    const StreetSegment& segment(std::size_t i) const { return segments_[i]; }
    const std::vector<Link>& links(std::size_t i) const { return adjacency_[i]; }

    std::size_t link_count() const {
        std::size_t n = 0;
        for (const auto& l : adjacency_) n += l.size();
        return n / 2;
    }

private:
    std::vector<StreetSegment> segments_;
    std::vector<std::vector<Link>> adjacency_;
};

// Two segments are adjacent iff some pair of their endpoints lies within
// `snap_tolerance`. The turn angle of a link is the change of heading when
// driving off one segment onto the other at the shared end; when several end
// pairs qualify the smallest turn is kept.
inline StreetGraph build_graph(std::vector<StreetSegment> segments, double snap_tolerance = 0.1) {
    if (segments.empty()) throw DomainError("street graph needs at least one segment");
    if (!(snap_tolerance >= 0.0)) throw DomainError("snap_tolerance must be >= 0");

    const double cell = std::max(snap_tolerance, 1.0);
    auto key = [cell](const Point& p) {
        return std::pair<std::int64_t, std::int64_t>{static_cast<std::int64_t>(std::floor(p.x() / cell)),
                                                     static_cast<std::int64_t>(std::floor(p.y() / cell))};
    };
    struct End {
        std::uint32_t segment;
        bool at_end;
    };
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<End>> buckets;
    for (std::uint32_t i = 0; i < segments.size(); ++i) {
        buckets[key(segments[i].start())].push_back({i, false});
        buckets[key(segments[i].end())].push_back({i, true});
    }

    std::vector<std::unordered_map<std::uint32_t, double>> best(segments.size());
    auto endpoint = [&](const End& e) -> const Point& {
        return e.at_end ? segments[e.segment].end() : segments[e.segment].start();
    };
    for (const auto& [k, ends] : buckets) {
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                auto it = buckets.find({k.first + dx, k.second + dy});
                if (it == buckets.end()) continue;
                for (const End& a : ends) {
                    for (const End& b : it->second) {
                        if (a.segment >= b.segment) continue;
                        if (distance(endpoint(a), endpoint(b)) > snap_tolerance) continue;
                        const double turn = bearing_difference(segments[a.segment].arrival_bearing(a.at_end),
                                                               segments[b.segment].departure_bearing(b.at_end));
                        auto [pos, inserted] = best[a.segment].try_emplace(b.segment, turn);
                        if (!inserted) pos->second = std::min(pos->second, turn);
                    }
                }
            }
        }
    }

    std::vector<std::vector<Link>> adjacency(segments.size());
    for (std::uint32_t a = 0; a < segments.size(); ++a) {
        for (const auto& [b, turn] : best[a]) {
            adjacency[a].push_back({b, turn});
            adjacency[b].push_back({a, turn});
        }
    }
    return StreetGraph(std::move(segments), std::move(adjacency));
}

} // namespace greenexp
