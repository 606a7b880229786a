#pragma once

// Walking-accessibility targets on a population grid.
//
// Each cell centroid is snapped to the nearest point of the street network and
// walks along segments; the straight access legs at both ends count toward the
// walking budget. A green polygon is reached when the network point closest to
// its boundary is within budget (or when the centroid lies inside it).

#include <greenexp/error.hpp>
#include <greenexp/geo/features.hpp>
#include <greenexp/geo/raster.hpp>
#include <greenexp/street/graph.hpp>

#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace greenexp {

struct PopulationCell {
    std::string id;
    Point centroid{0.0, 0.0};
    MultiPolygon polygon;
    double population = 0.0;
};

// Square cell of side `size` centred on (x, y).
inline PopulationCell square_cell(std::string id, double x, double y, double size, double population) {
    const double h = 0.5 * size;
    return {std::move(id), Point{x, y}, rectangle(x - h, y - h, x + h, y + h), population};
}

struct WalkOptions {
    double budget_minutes = 5.0;
    double speed_kmh = 4.8;
    double max_snap_distance = 200.0;
    double snap_tolerance = 0.1;
    unsigned jobs = 1;

    double budget_meters() const { return speed_kmh * budget_minutes * (1000.0 / 60.0); }
};

struct ReachSet {
    std::string cell_id;
    std::vector<std::size_t> cells; // indices into the cell list, ascending, always containing the cell itself
    std::vector<std::size_t> parks; // indices into the park list, ascending
    bool off_network = false;       // no segment within the snap distance
};

struct ReachResult {
    std::vector<ReachSet> reach;
    std::vector<std::string> warnings;
};

namespace detail {

// Location on a polyline: arc-length offset from its start and distance to the query.
struct LineLocation {
    double offset = 0.0;
    double distance = std::numeric_limits<double>::infinity();
};

inline LineLocation locate(const Polyline& line, const Point& p) {
    LineLocation best;
    double run = 0.0;
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
        const Projection pr = project(p, line[i], line[i + 1]);
        const double piece = distance(line[i], line[i + 1]);
        if (pr.distance < best.distance) best = {run + pr.t * piece, pr.distance};
        run += piece;
    }
    return best;
}

// Stretch [lo, hi] of a segment from which a polygon is `leg` metres away.
struct ParkAccess {
    std::uint32_t segment = 0;
    double lo = 0.0, hi = 0.0, leg = 0.0;
};

// Offsets along `line` of the pieces that lie inside `poly`.
inline std::vector<std::pair<double, double>> inside_stretches(const Polyline& line, const MultiPolygon& poly) {
    std::vector<Polyline> pieces;
    bg::intersection(line, poly, pieces);
    std::vector<std::pair<double, double>> out;
    for (const auto& piece : pieces) {
        if (piece.empty()) continue;
        double a = locate(line, piece.front()).offset;
        double b = locate(line, piece.back()).offset;
        if (a > b) std::swap(a, b);
        out.emplace_back(a, b);
    }
    return out;
}

// Closest approach between a polyline and a polygon boundary that the line does not touch.
inline ParkAccess closest_approach(std::uint32_t seg, const Polyline& line, const MultiPolygon& poly) {
    ParkAccess best{seg, 0.0, 0.0, std::numeric_limits<double>::infinity()};
    auto consider = [&](double offset, double d) {
        if (d < best.leg) best = {seg, offset, offset, d};
    };
    double run = 0.0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (i > 0) run += distance(line[i - 1], line[i]);
        consider(run, bg::distance(line[i], poly));
    }
    auto visit_ring = [&](const auto& ring) {
        for (const Point& v : ring) {
            const LineLocation loc = locate(line, v);
            consider(loc.offset, loc.distance);
        }
    };
    for (const auto& p : poly) {
        visit_ring(p.outer());
        for (const auto& r : p.inners()) visit_ring(r);
    }
    return best;
}

// Endpoint-node network: each segment joins two nodes; endpoints within the
// snap tolerance are merged.
struct WalkNetwork {
    std::vector<std::uint32_t> from, to; // node ids per segment
    std::vector<double> length;
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> incident; // (segment, other node) per node

    explicit WalkNetwork(const StreetGraph& g, double tol) {
        const std::size_t n = g.size();
        std::vector<std::uint32_t> parent(2 * n);
        std::iota(parent.begin(), parent.end(), 0u);
        auto find = [&](std::uint32_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        auto end_point = [&](std::uint32_t e) -> const Point& {
            return e % 2 ? g.segment(e / 2).end() : g.segment(e / 2).start();
        };
        const double cell = std::max(tol, 1.0);
        auto key = [cell](const Point& p) {
            return std::pair<std::int64_t, std::int64_t>{static_cast<std::int64_t>(std::floor(p.x() / cell)),
                                                         static_cast<std::int64_t>(std::floor(p.y() / cell))};
        };
        std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::uint32_t>> buckets;
        for (std::uint32_t e = 0; e < 2 * n; ++e) buckets[key(end_point(e))].push_back(e);
        for (const auto& [k, ends] : buckets) {
            for (std::int64_t dx = -1; dx <= 1; ++dx)
                for (std::int64_t dy = -1; dy <= 1; ++dy) {
                    auto it = buckets.find({k.first + dx, k.second + dy});
                    if (it == buckets.end()) continue;
                    for (std::uint32_t a : ends)
                        for (std::uint32_t b : it->second)
                            if (a < b && distance(end_point(a), end_point(b)) <= tol) parent[find(a)] = find(b);
                }
        }
        std::vector<std::uint32_t> id(2 * n, std::numeric_limits<std::uint32_t>::max());
        std::uint32_t nodes = 0;
        for (std::uint32_t e = 0; e < 2 * n; ++e) {
            const std::uint32_t r = find(e);
            if (id[r] == std::numeric_limits<std::uint32_t>::max()) id[r] = nodes++;
        }
        incident.resize(nodes);
        for (std::uint32_t s = 0; s < n; ++s) {
            from.push_back(id[find(2 * s)]);
            to.push_back(id[find(2 * s + 1)]);
            length.push_back(g.segment(s).length);
            incident[from.back()].emplace_back(s, to.back());
            incident[to.back()].emplace_back(s, from.back());
        }
    }

    std::size_t nodes() const { return incident.size(); }
};

struct Snap {
    std::uint32_t segment = 0;
    double offset = 0.0;
    double leg = std::numeric_limits<double>::infinity();
    bool on_network = false;
};

// Bounded Dijkstra over network nodes from one snapped start point.
class ReachWorker {
public:
    explicit ReachWorker(const WalkNetwork& net) : net_(net), dist_(net.nodes(), kInf) {}

    void run(const Snap& start, double limit) {
        for (auto v : touched_) dist_[v] = kInf;
        touched_.clear();
        start_ = start;
        using Item = std::pair<double, std::uint32_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        auto relax = [&](std::uint32_t v, double d) {
            if (d > limit || d >= dist_[v]) return;
            if (dist_[v] == kInf) touched_.push_back(v);
            dist_[v] = d;
            pq.emplace(d, v);
        };
        relax(net_.from[start.segment], start.offset);
        relax(net_.to[start.segment], net_.length[start.segment] - start.offset);
        while (!pq.empty()) {
            auto [d, v] = pq.top();
            pq.pop();
            if (d > dist_[v]) continue;
            for (auto [s, w] : net_.incident[v]) relax(w, d + net_.length[s]);
        }
    }

    // Network distance from the start to the nearest point of [lo, hi] on `segment`.
    double to_stretch(std::uint32_t segment, double lo, double hi) const {
        double d = std::min(dist_[net_.from[segment]] + lo, dist_[net_.to[segment]] + (net_.length[segment] - hi));
        if (segment == start_.segment) {
            const double s = start_.offset;
            d = std::min(d, s < lo ? lo - s : (s > hi ? s - hi : 0.0));
        }
        return d;
    }

    const std::vector<std::uint32_t>& touched() const { return touched_; }

private:
    static constexpr double kInf = std::numeric_limits<double>::infinity();
    const WalkNetwork& net_;
    std::vector<double> dist_;
    std::vector<std::uint32_t> touched_;
    Snap start_;
};

} // namespace detail

// Cells and public green polygons within the walking budget of every cell.
inline ReachResult walking_reach(std::span<const PopulationCell> cells, const StreetGraph& graph,
                                 std::span<const GreenSpacePolygon> parks, const WalkOptions& opt = {}) {
    if (!(opt.budget_minutes > 0.0)) throw DomainError("walk budget must be > 0");
    if (!(opt.speed_kmh > 0.0)) throw DomainError("walk speed must be > 0");
    const double budget = opt.budget_meters();
    const detail::WalkNetwork net(graph, opt.snap_tolerance);

    using Piece = std::pair<bg::model::segment<Point>, std::uint32_t>;
    std::vector<Piece> pieces;
    for (std::uint32_t s = 0; s < graph.size(); ++s) {
        const auto& line = graph.segment(s).geometry;
        for (std::size_t i = 0; i + 1 < line.size(); ++i) pieces.emplace_back(bg::model::segment<Point>(line[i], line[i + 1]), s);
    }
    const bg::index::rtree<Piece, bg::index::quadratic<16>> tree(pieces.begin(), pieces.end());

    // Snap each centroid to the nearest segment point; ties resolve to the lowest segment index.
    std::vector<detail::Snap> snaps(cells.size());
    ReachResult out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (!(cells[c].population >= 0.0)) throw DomainError("cell '" + cells[c].id + "' has negative population");
        std::vector<Piece> near;
        tree.query(bg::index::nearest(cells[c].centroid, 4), std::back_inserter(near));
        detail::Snap best;
        for (const auto& [piece, s] : near) {
            const auto loc = detail::locate(graph.segment(s).geometry, cells[c].centroid);
            if (loc.distance < best.leg || (loc.distance == best.leg && s < best.segment)) {
                best.segment = s;
                best.offset = loc.offset;
                best.leg = loc.distance;
            }
        }
        best.on_network = best.leg <= opt.max_snap_distance;
        snaps[c] = best;
        if (!best.on_network) {
            out.warnings.push_back("cell '" + cells[c].id + "' is more than " + std::to_string(opt.max_snap_distance) +
                                   " m from the street network; it reaches only itself");
        }
    }

    // Cells grouped by the segment they snap to.
    std::vector<std::vector<std::uint32_t>> on_segment(graph.size());
    for (std::uint32_t c = 0; c < cells.size(); ++c)
        if (snaps[c].on_network) on_segment[snaps[c].segment].push_back(c);

    // Access stretches per park, grouped by segment. Only segments near enough to matter are examined.
    std::vector<std::vector<std::pair<std::uint32_t, detail::ParkAccess>>> park_access(graph.size());
    std::vector<std::vector<std::size_t>> containing(cells.size());
    for (std::uint32_t p = 0; p < parks.size(); ++p) {
        if (!parks[p].is_public()) continue;
        Box b = envelope(parks[p].boundary);
        b.min_corner() = Point{b.min_corner().x() - budget, b.min_corner().y() - budget};
        b.max_corner() = Point{b.max_corner().x() + budget, b.max_corner().y() + budget};
        std::vector<Piece> hits;
        tree.query(bg::index::intersects(b), std::back_inserter(hits));
        std::vector<std::uint32_t> segs;
        for (const auto& h : hits) segs.push_back(h.second);
        std::sort(segs.begin(), segs.end());
        segs.erase(std::unique(segs.begin(), segs.end()), segs.end());
        for (std::uint32_t s : segs) {
            const auto& line = graph.segment(s).geometry;
            if (bg::intersects(line, parks[p].boundary)) {
                for (auto [lo, hi] : detail::inside_stretches(line, parks[p].boundary))
                    park_access[s].emplace_back(p, detail::ParkAccess{s, lo, hi, 0.0});
            } else {
                const auto a = detail::closest_approach(s, line, parks[p].boundary);
                if (a.leg <= budget) park_access[s].emplace_back(p, a);
            }
        }
        for (std::size_t c = 0; c < cells.size(); ++c)
            if (bg::covered_by(cells[c].centroid, parks[p].boundary)) containing[c].push_back(p);
    }

    out.reach.resize(cells.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        detail::ReachWorker worker(net);
        std::vector<char> cell_seen(cells.size(), 0), park_seen(parks.size(), 0);
        for (std::size_t c = next++; c < cells.size(); c = next++) {
            ReachSet& rs = out.reach[c];
            rs.cell_id = cells[c].id;
            rs.cells.push_back(c);
            cell_seen[c] = 1;
            for (std::size_t p : containing[c]) {
                rs.parks.push_back(p);
                park_seen[p] = 1;
            }
            const detail::Snap& sn = snaps[c];
            rs.off_network = !sn.on_network;
            if (sn.on_network && sn.leg <= budget) {
                const double left = budget - sn.leg;
                worker.run(sn, left);
                std::vector<std::uint32_t> segs{sn.segment};
                for (std::uint32_t v : worker.touched())
                    for (auto [s, w] : net.incident[v]) segs.push_back(s);
                std::sort(segs.begin(), segs.end());
                segs.erase(std::unique(segs.begin(), segs.end()), segs.end());
                for (std::uint32_t s : segs) {
                    for (std::uint32_t t : on_segment[s]) {
                        if (cell_seen[t]) continue;
                        const double d = worker.to_stretch(s, snaps[t].offset, snaps[t].offset);
                        if (d + snaps[t].leg <= left) {
                            rs.cells.push_back(t);
                            cell_seen[t] = 1;
                        }
                    }
                    for (const auto& [p, a] : park_access[s]) {
                        if (park_seen[p]) continue;
                        if (worker.to_stretch(s, a.lo, a.hi) + a.leg <= left) {
                            rs.parks.push_back(p);
                            park_seen[p] = 1;
                        }
                    }
                }
            }
            std::sort(rs.cells.begin(), rs.cells.end());
            std::sort(rs.parks.begin(), rs.parks.end());
            for (auto t : rs.cells) cell_seen[t] = 0;
            for (auto p : rs.parks) park_seen[p] = 0;
        }
    };
    const unsigned jobs = std::max(1u, opt.jobs);
    if (jobs == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(work);
    }
    return out;
}

inline constexpr double kWhoMinArea = 5000.0;   // m², single polygon
inline constexpr double kEsaMinArea = 5000.0;   // m², cumulative green cover
inline constexpr double kNeMinArea = 20000.0;   // m², single polygon

inline bool largest_reachable_at_least(const ReachSet& reach, std::span<const GreenSpacePolygon> parks, double min_area) {
    return std::any_of(reach.parks.begin(), reach.parks.end(), [&](std::size_t p) {
        return parks[p].is_public() && parks[p].area_m2() >= min_area;
    });
}

inline bool who_target(const ReachSet& reach, std::span<const GreenSpacePolygon> parks) {
    return largest_reachable_at_least(reach, parks, kWhoMinArea);
}

inline bool ne_target(const ReachSet& reach, std::span<const GreenSpacePolygon> parks) {
    return largest_reachable_at_least(reach, parks, kNeMinArea);
}

// Green-cover area (m²) inside each cell polygon.
inline std::vector<double> cell_green_area(std::span<const PopulationCell> cells, const GreenRaster& raster) {
    std::vector<double> out;
    out.reserve(cells.size());
    for (const auto& c : cells) out.push_back(static_cast<double>(zonal_count(raster, c.polygon).green) * raster.pixel_area());
    return out;
}

inline bool esa_who_target(const ReachSet& reach, std::span<const double> green_area) {
    double total = 0.0;
    for (std::size_t c : reach.cells) total += green_area[c];
    return total >= kEsaMinArea;
}

struct TargetFlags {
    bool who = false;
    bool esa_who = false;
    bool ne = false;
};

inline std::vector<TargetFlags> target_flags(std::span<const ReachSet> reach, std::span<const GreenSpacePolygon> parks,
                                             std::span<const double> green_area) {
    std::vector<TargetFlags> out;
    out.reserve(reach.size());
    for (const auto& r : reach) out.push_back({who_target(r, parks), esa_who_target(r, green_area), ne_target(r, parks)});
    return out;
}

struct TargetResult {
    std::string area_id;
    std::optional<double> who_share;
    std::optional<double> esa_who_share;
    std::optional<double> ne_share;
    double population = 0.0; // apportioned population
};

// Population of each cell apportioned to each area by intersection area: pop(cell, area) in cell-major order.
struct Apportionment {
    std::vector<std::vector<std::pair<std::size_t, double>>> by_area; // (cell, population) per area, cell order
};

inline Apportionment apportion(std::span<const PopulationCell> cells, std::span<const AreaUnit> areas) {
    using Entry = std::pair<Box, std::size_t>;
    std::vector<Entry> boxes;
    for (std::size_t a = 0; a < areas.size(); ++a) boxes.emplace_back(envelope(areas[a].boundary), a);
    const bg::index::rtree<Entry, bg::index::quadratic<16>> tree(boxes.begin(), boxes.end());
    Apportionment out;
    out.by_area.resize(areas.size());
    std::vector<Entry> hits;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const double cell_area = area(cells[c].polygon);
        if (!(cell_area > 0.0)) throw DomainError("cell '" + cells[c].id + "' has zero area");
        hits.clear();
        tree.query(bg::index::intersects(envelope(cells[c].polygon)), std::back_inserter(hits));
        std::sort(hits.begin(), hits.end(), [](const Entry& x, const Entry& y) { return x.second < y.second; });
        for (const auto& [box, a] : hits) {
            MultiPolygon inter;
            bg::intersection(cells[c].polygon, areas[a].boundary, inter);
            const double share = area(inter) / cell_area;
            if (share > 0.0) out.by_area[a].emplace_back(c, cells[c].population * share);
        }
    }
    return out;
}

inline std::vector<TargetResult> aggregate_targets(std::span<const PopulationCell> cells,
                                                   std::span<const TargetFlags> flags,
                                                   std::span<const AreaUnit> areas) {
    if (flags.size() != cells.size()) throw DomainError("one flag set per cell is required");
    const Apportionment ap = apportion(cells, areas);
    std::vector<TargetResult> out;
    for (std::size_t a = 0; a < areas.size(); ++a) {
        TargetResult r;
        r.area_id = areas[a].id;
        double who = 0.0, esa = 0.0, ne = 0.0;
        for (auto [c, pop] : ap.by_area[a]) {
            r.population += pop;
            if (flags[c].who) who += pop;
            if (flags[c].esa_who) esa += pop;
            if (flags[c].ne) ne += pop;
        }
        if (r.population > 0.0) {
            r.who_share = std::min(1.0, who / r.population);
            r.esa_who_share = std::min(1.0, esa / r.population);
            r.ne_share = std::min(1.0, ne / r.population);
        }
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace greenexp
