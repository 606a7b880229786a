#pragma once

// Space-syntax choice: betweenness over the segment-dual graph with a metric radius.
//
// For every unordered pair {j, k} of segments whose metric network distance
// (midpoint to midpoint, along segments) is within the radius, each shortest
// j-k path contributes 1/g_jk to every interior segment it visits, where g_jk is
// the number of co-minimal paths. Path cost is the cumulative turn angle
// (angular mode) or the hop count (topological mode). Angular costs are
// compared lexicographically as (turn sum, hops) so zero-turn continuations do
// not create zero-cost cycles; turn sums are accumulated on a 1e-9 degree
// lattice so co-minimal ties are exact.

#include <greenexp/street/graph.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <queue>
#include <thread>
#include <vector>

namespace greenexp {

enum class ChoiceMode { angular, topological };

inline constexpr double kInfiniteRadius = std::numeric_limits<double>::infinity();
inline constexpr double kAngleQuantum = 1e-9; // degrees

struct ChoiceOptions {
    double radius = 500.0;
    ChoiceMode mode = ChoiceMode::angular;
    unsigned jobs = 1;
};

template <class Scalar = double>
struct ChoiceScores {
    std::vector<Scalar> raw;        // c_i
    std::vector<double> weight;     // w_i = ln(c_i) if c_i > 1 else 0
    std::vector<double> normalized; // optional 0-100 rescaling of w_i, filled by normalize_scores
    double radius = 500.0;
};

template <class Scalar>
double to_double(const Scalar& s) {
    return static_cast<double>(s);
}

inline double choice_weight(double c) { return c > 1.0 ? std::log(c) : 0.0; }

namespace detail {

struct PathKey {
    std::int64_t turns = 0; // quantized cumulative turn angle
    std::int32_t hops = 0;
    auto operator<=>(const PathKey&) const = default;
};

template <class Scalar>
class ChoiceWorker {
public:
    ChoiceWorker(const StreetGraph& g, const ChoiceOptions& opt)
        : g_(g), opt_(opt), metric_(g.size(), kUnset), key_(g.size()), seen_(g.size(), 0), settled_(g.size(), 0),
          target_(g.size(), 0), sigma_(g.size()), delta_(g.size()), preds_(g.size()) {
        quantized_.resize(g.size());
        for (std::size_t v = 0; v < g.size(); ++v) {
            for (const Link& l : g.links(v)) {
                quantized_[v].push_back(opt.mode == ChoiceMode::angular
                                            ? static_cast<std::int64_t>(std::llround(l.turn_angle / kAngleQuantum))
                                            : 0);
            }
        }
    }

    // Adds the contributions of all pairs (source, k) with k > source into acc.
    void run_source(std::uint32_t source, std::vector<Scalar>& acc) {
        const std::size_t targets = mark_targets(source);
        if (targets > 0) {
            shortest_paths(source, targets);
            accumulate(source, acc);
        }
        reset();
    }

private:
    static constexpr double kUnset = -1.0;

    std::size_t mark_targets(std::uint32_t source) {
        using Item = std::pair<double, std::uint32_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        metric_[source] = 0.0;
        metric_touched_.push_back(source);
        pq.push({0.0, source});
        std::size_t targets = 0;
        while (!pq.empty()) {
            auto [d, v] = pq.top();
            pq.pop();
            if (d > metric_[v]) continue;
            if (v > source && !target_[v]) {
                target_[v] = 1;
                ++targets;
            }
            const double half = 0.5 * g_.segment(v).length;
            for (const Link& l : g_.links(v)) {
                const double nd = d + half + 0.5 * g_.segment(l.to).length;
                if (nd > opt_.radius) continue;
                if (metric_[l.to] == kUnset) metric_touched_.push_back(l.to);
                else if (nd >= metric_[l.to]) continue;
                metric_[l.to] = nd;
                pq.push({nd, l.to});
            }
        }
        return targets;
    }

    void shortest_paths(std::uint32_t source, std::size_t targets) {
        using Item = std::pair<PathKey, std::uint32_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        key_[source] = {};
        sigma_[source] = Scalar(1);
        seen_[source] = 1;
        touched_.push_back(source);
        pq.push({key_[source], source});
        while (!pq.empty() && targets > 0) {
            auto [k, v] = pq.top();
            pq.pop();
            if (settled_[v] || k != key_[v]) continue;
            settled_[v] = 1;
            order_.push_back(v);
            if (target_[v]) --targets;
            const auto& links = g_.links(v);
            for (std::size_t li = 0; li < links.size(); ++li) {
                const std::uint32_t w = links[li].to;
                if (settled_[w]) continue;
                const PathKey nk{k.turns + quantized_[v][li], k.hops + 1};
                if (!seen_[w] || nk < key_[w]) {
                    if (!seen_[w]) {
                        seen_[w] = 1;
                        touched_.push_back(w);
                    }
                    key_[w] = nk;
                    sigma_[w] = sigma_[v];
                    preds_[w].clear();
                    preds_[w].push_back(v);
                    pq.push({nk, w});
                } else if (nk == key_[w]) {
                    sigma_[w] += sigma_[v];
                    preds_[w].push_back(v);
                }
            }
        }
    }

    void accumulate(std::uint32_t source, std::vector<Scalar>& acc) {
        for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
            const std::uint32_t w = *it;
            Scalar carry = delta_[w];
            if (target_[w]) carry += Scalar(1);
            if (carry != Scalar(0)) {
                for (std::uint32_t v : preds_[w]) delta_[v] += sigma_[v] / sigma_[w] * carry;
            }
            if (w != source) acc[w] += delta_[w];
        }
    }

    void reset() {
        for (auto v : metric_touched_) {
            metric_[v] = kUnset;
            target_[v] = 0;
        }
        metric_touched_.clear();
        for (auto v : touched_) {
            seen_[v] = 0;
            settled_[v] = 0;
            sigma_[v] = Scalar(0);
            delta_[v] = Scalar(0);
            preds_[v].clear();
        }
        touched_.clear();
        order_.clear();
    }

    const StreetGraph& g_;
    ChoiceOptions opt_;
    std::vector<std::vector<std::int64_t>> quantized_;
    std::vector<double> metric_;
    std::vector<PathKey> key_;
    std::vector<char> seen_, settled_, target_;
    std::vector<Scalar> sigma_, delta_;
    std::vector<std::vector<std::uint32_t>> preds_;
    std::vector<std::uint32_t> metric_touched_, touched_, order_;
};

} // namespace detail

// Raw choice c_i for every segment plus the floored log weight w_i.
// Sources are split into a fixed number of contiguous chunks, each with its own
// accumulator, and chunks are summed in index order: the result does not depend
// on `jobs`.
template <class Scalar = double>
ChoiceScores<Scalar> choice(const StreetGraph& graph, const ChoiceOptions& options = {}) {
    if (!(options.radius > 0.0)) throw DomainError("choice radius must be > 0");
    const std::size_t n = graph.size();
    ChoiceScores<Scalar> out;
    out.radius = options.radius;
    out.raw.assign(n, Scalar(0));
    out.weight.assign(n, 0.0);
    if (n == 0) return out;

    const std::size_t chunks = std::min<std::size_t>(n, 64);
    std::vector<std::vector<Scalar>> partial(chunks);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        detail::ChoiceWorker<Scalar> worker(graph, options);
        for (std::size_t c = next++; c < chunks; c = next++) {
            partial[c].assign(n, Scalar(0));
            const std::size_t begin = c * n / chunks;
            const std::size_t end = (c + 1) * n / chunks;
            for (std::size_t s = begin; s < end; ++s) worker.run_source(static_cast<std::uint32_t>(s), partial[c]);
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(chunks)));
    if (jobs == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(work);
    }

    for (std::size_t c = 0; c < chunks; ++c) {
        for (std::size_t i = 0; i < n; ++i) out.raw[i] += partial[c][i];
        partial[c] = {};
    }
    for (std::size_t i = 0; i < n; ++i) out.weight[i] = choice_weight(to_double(out.raw[i]));
    return out;
}

// Min-max rescales w_i to 0..100 for reporting. All-equal weights map to 0.
template <class Scalar>
ChoiceScores<Scalar> normalize_scores(ChoiceScores<Scalar> scores) {
    scores.normalized.assign(scores.weight.size(), 0.0);
    if (scores.weight.empty()) return scores;
    const auto [lo, hi] = std::minmax_element(scores.weight.begin(), scores.weight.end());
    const double span = *hi - *lo;
    if (!(span > 0.0)) return scores;
    for (std::size_t i = 0; i < scores.weight.size(); ++i) {
        scores.normalized[i] = 100.0 * (scores.weight[i] - *lo) / span;
    }
    return scores;
}

} // namespace greenexp
