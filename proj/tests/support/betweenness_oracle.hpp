#pragma once

// Test-only oracle for segment choice. All-pairs distances come from
// Floyd-Warshall; every shortest path of every in-radius pair is then
// enumerated explicitly and interior visits are counted in exact rationals.
// Shares no code with the production search.

#include <greenexp/street/choice.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace greenexp::testing {

using Rational = boost::multiprecision::cpp_rational;

struct OracleKey {
    std::int64_t turns = 0;
    std::int64_t hops = 0;
    bool finite = false;
    friend bool operator==(const OracleKey&, const OracleKey&) = default;
    friend OracleKey operator+(const OracleKey& a, const OracleKey& b) {
        if (!a.finite || !b.finite) return {};
        return {a.turns + b.turns, a.hops + b.hops, true};
    }
    bool less(const OracleKey& o) const {
        if (!finite) return false;
        if (!o.finite) return true;
        return turns != o.turns ? turns < o.turns : hops < o.hops;
    }
};

struct OracleResult {
    std::vector<Rational> choice;
    Rational interior_total = 0; // sum over in-radius pairs of the mean interior path length
};

inline OracleResult choice_oracle(const StreetGraph& g, double radius, ChoiceMode mode) {
    const std::size_t n = g.size();
    std::vector<std::vector<OracleKey>> d(n, std::vector<OracleKey>(n));
    std::vector<std::vector<double>> m(n, std::vector<double>(n, std::numeric_limits<double>::infinity()));
    std::vector<std::vector<OracleKey>> edge(n, std::vector<OracleKey>(n));
    for (std::size_t v = 0; v < n; ++v) {
        d[v][v] = {0, 0, true};
        m[v][v] = 0.0;
        for (const Link& l : g.links(v)) {
            const std::int64_t t =
                mode == ChoiceMode::angular ? std::llround(l.turn_angle / kAngleQuantum) : 0;
            edge[v][l.to] = {t, 1, true};
            d[v][l.to] = edge[v][l.to];
            m[v][l.to] = 0.5 * g.segment(v).length + 0.5 * g.segment(l.to).length;
        }
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const OracleKey via = d[i][k] + d[k][j];
                if (via.less(d[i][j])) d[i][j] = via;
                if (m[i][k] + m[k][j] < m[i][j]) m[i][j] = m[i][k] + m[k][j];
            }

    OracleResult out;
    out.choice.assign(n, Rational(0));
    std::vector<std::uint64_t> through(n);
    std::vector<std::size_t> path;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = j + 1; k < n; ++k) {
            if (!d[j][k].finite || !(m[j][k] <= radius)) continue;
            std::fill(through.begin(), through.end(), 0);
            std::uint64_t total = 0;
            std::uint64_t interior_sum = 0;
            path.assign(1, j);
            std::function<void(std::size_t)> walk = [&](std::size_t v) {
                if (v == k) {
                    ++total;
                    interior_sum += path.size() - 2;
                    for (std::size_t p = 1; p + 1 < path.size(); ++p) ++through[path[p]];
                    if (total > 5'000'000) throw std::runtime_error("oracle: too many shortest paths");
                    return;
                }
                for (const Link& l : g.links(v)) {
                    const std::size_t w = l.to;
                    if (!(d[j][v] + edge[v][w] == d[j][w])) continue;
                    if (!(d[j][w] + d[w][k] == d[j][k])) continue;
                    path.push_back(w);
                    walk(w);
                    path.pop_back();
                }
            };
            walk(j);
            for (std::size_t i = 0; i < n; ++i) {
                if (through[i]) out.choice[i] += Rational(through[i], total);
            }
            out.interior_total += Rational(interior_sum, total);
        }
    }
    return out;
}

// Dual graph given directly as an edge list; segments are straight, with the
// requested lengths, and links carry the requested turn angles.
inline StreetGraph graph_from_edges(const std::vector<double>& lengths,
                                    const std::vector<std::tuple<std::uint32_t, std::uint32_t, double>>& edges) {
    std::vector<StreetSegment> segs;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        Polyline l;
        bg::append(l, Point{0.0, static_cast<double>(i) * 1000.0});
        bg::append(l, Point{lengths[i], static_cast<double>(i) * 1000.0});
        segs.push_back(StreetSegment::from_polyline("s" + std::to_string(i), l));
    }
    std::vector<std::vector<Link>> adj(lengths.size());
    for (auto [a, b, t] : edges) {
        adj[a].push_back({b, t});
        adj[b].push_back({a, t});
    }
    return StreetGraph(std::move(segs), std::move(adj));
}

// Random simple graph with up to `max_n` segments, possibly disconnected.
// Turn angles are multiples of 15 degrees so angular ties are frequent.
inline StreetGraph random_dual_graph(std::mt19937_64& rng, std::size_t max_n) {
    std::uniform_int_distribution<std::size_t> size_dist(1, max_n);
    const std::size_t n = size_dist(rng);
    std::uniform_real_distribution<double> len(10.0, 200.0);
    std::uniform_int_distribution<int> turn(0, 12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double degree = 1.5 + 2.5 * u(rng);
    const double p = n > 1 ? std::min(1.0, degree / static_cast<double>(n - 1)) : 0.0;
    std::vector<double> lengths(n);
    for (auto& l : lengths) l = len(rng);
    std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> edges;
    for (std::uint32_t a = 0; a < n; ++a)
        for (std::uint32_t b = a + 1; b < n; ++b)
            if (u(rng) < p) edges.emplace_back(a, b, 15.0 * turn(rng));
    return graph_from_edges(lengths, edges);
}

} // namespace greenexp::testing
