#pragma once

// Binary green/not-green grids and pixel-center zonal counting.
//
// Pixel (col, row) covers [ox + col*cs, ox + (col+1)*cs) x [oy + row*cs, oy + (row+1)*cs);
// row 0 is the southern edge. A pixel belongs to a region iff its center lies inside
// the region under the half-open crossing rule, so regions that tile the plane
// partition the pixel set exactly.

#include <greenexp/geo/geometry.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace greenexp {

class GreenRaster {
public:
    GreenRaster() = default;

    GreenRaster(Point origin, double cell_size, std::size_t width, std::size_t height)
        : origin_(origin), cell_size_(cell_size), width_(width), height_(height),
          words_((width * height + 63) / 64, 0) {
        if (!(cell_size > 0.0)) throw DomainError("raster cell_size must be > 0");
    }

    static GreenRaster filled(Point origin, double cell_size, std::size_t width, std::size_t height) {
        GreenRaster r(origin, cell_size, width, height);
        std::fill(r.words_.begin(), r.words_.end(), ~std::uint64_t{0});
        r.clear_tail();
        return r;
    }

    const Point& origin() const { return origin_; }
    double cell_size() const { return cell_size_; }
    std::size_t width() const { return width_; }
    std::size_t height() const { return height_; }
    std::size_t size() const { return width_ * height_; }
    double pixel_area() const { return cell_size_ * cell_size_; }

    Box extent() const {
        return Box{origin_, Point{origin_.x() + cell_size_ * static_cast<double>(width_),
                                  origin_.y() + cell_size_ * static_cast<double>(height_)}};
    }

    Point pixel_center(std::size_t col, std::size_t row) const {
        return Point{origin_.x() + (static_cast<double>(col) + 0.5) * cell_size_,
                     origin_.y() + (static_cast<double>(row) + 0.5) * cell_size_};
    }

    bool at(std::size_t col, std::size_t row) const {
        const std::size_t i = row * width_ + col;
        return (words_[i >> 6] >> (i & 63)) & 1u;
    }

    void set(std::size_t col, std::size_t row, bool green = true) {
        const std::size_t i = row * width_ + col;
        const std::uint64_t bit = std::uint64_t{1} << (i & 63);
        if (green) words_[i >> 6] |= bit;
        else words_[i >> 6] &= ~bit;
    }

    // Sets bits [begin, end) of one row.
    void set_run(std::size_t row, std::size_t col_begin, std::size_t col_end) {
        for (std::size_t c = col_begin; c < col_end; ++c) set(c, row);
    }

    // Green pixels among columns [col_begin, col_end) of `row`.
    std::size_t count_run(std::size_t row, std::size_t col_begin, std::size_t col_end) const {
        std::size_t b = row * width_ + col_begin;
        const std::size_t e = row * width_ + col_end;
        std::size_t n = 0;
        while (b < e && (b & 63)) n += (words_[b >> 6] >> (b & 63)) & 1u, ++b;
        while (b + 64 <= e) n += static_cast<std::size_t>(std::popcount(words_[b >> 6])), b += 64;
        while (b < e) n += (words_[b >> 6] >> (b & 63)) & 1u, ++b;
        return n;
    }

    // Pixels among columns [col_begin, col_end) of `row` for which op(this_word, other_word) has a bit set.
    template <class Op>
    std::size_t count_run_with(const GreenRaster& other, std::size_t row, std::size_t col_begin, std::size_t col_end,
                               Op op) const {
        std::size_t b = row * width_ + col_begin;
        const std::size_t e = row * width_ + col_end;
        std::size_t n = 0;
        auto bit = [&](std::size_t i) { return (op(words_[i >> 6], other.words_[i >> 6]) >> (i & 63)) & 1u; };
        while (b < e && (b & 63)) n += bit(b), ++b;
        while (b + 64 <= e) n += static_cast<std::size_t>(std::popcount(op(words_[b >> 6], other.words_[b >> 6]))), b += 64;
        while (b < e) n += bit(b), ++b;
        return n;
    }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }

    bool same_grid(const GreenRaster& o) const {
        return origin_.x() == o.origin_.x() && origin_.y() == o.origin_.y() && cell_size_ == o.cell_size_ &&
               width_ == o.width_ && height_ == o.height_;
    }

    // Bits green in both rasters.
    GreenRaster operator&(const GreenRaster& o) const {
        require_same_grid(o);
        GreenRaster r = *this;
        for (std::size_t i = 0; i < words_.size(); ++i) r.words_[i] &= o.words_[i];
        return r;
    }

    GreenRaster operator|(const GreenRaster& o) const {
        require_same_grid(o);
        GreenRaster r = *this;
        for (std::size_t i = 0; i < words_.size(); ++i) r.words_[i] |= o.words_[i];
        return r;
    }

    // Bits green here and not green in `o`.
    GreenRaster without(const GreenRaster& o) const {
        require_same_grid(o);
        GreenRaster r = *this;
        for (std::size_t i = 0; i < words_.size(); ++i) r.words_[i] &= ~o.words_[i];
        return r;
    }

    GreenRaster empty_like() const { return GreenRaster(origin_, cell_size_, width_, height_); }

    std::span<const std::uint64_t> words() const { return words_; }

    bool operator==(const GreenRaster& o) const { return same_grid(o) && words_ == o.words_; }

private:
    void require_same_grid(const GreenRaster& o) const {
        if (!same_grid(o)) throw ConfigError("rasters are on different grids");
    }
    void clear_tail() {
        const std::size_t used = width_ * height_;
        if (used % 64 && !words_.empty()) words_.back() &= (std::uint64_t{1} << (used % 64)) - 1;
    }

    Point origin_{0.0, 0.0};
    double cell_size_ = 1.0;
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<std::uint64_t> words_;
};

namespace detail {

struct ScanEdge {
    double x_lo, y_lo, x_hi, y_hi; // endpoints ordered by (y, x)
    std::ptrdiff_t row_begin, row_end;
};

// Smallest integer i with origin + (i + 0.5) * cs >= v.
inline std::ptrdiff_t first_center_at_or_after(double v, double origin, double cs) {
    return static_cast<std::ptrdiff_t>(std::ceil((v - origin) / cs - 0.5));
}

template <class Ring>
void collect_edges(const Ring& ring, double oy, double cs, std::vector<ScanEdge>& out) {
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        Point a = ring[i], b = ring[i + 1];
        if (a.y() == b.y()) continue;
        if (b.y() < a.y() || (b.y() == a.y() && b.x() < a.x())) std::swap(a, b);
        ScanEdge e{a.x(), a.y(), b.x(), b.y(), first_center_at_or_after(a.y(), oy, cs),
                   first_center_at_or_after(b.y(), oy, cs)};
        if (e.row_begin < e.row_end) out.push_back(e);
    }
}

} // namespace detail

// Calls fn(row, col_begin, col_end) for every maximal run of pixels whose centers
// lie inside `region` (even-odd rule over all rings, half-open crossings).
template <class Fn>
void for_each_run(const GreenRaster& grid, const MultiPolygon& region, Fn&& fn) {
    const double ox = grid.origin().x();
    const double oy = grid.origin().y();
    const double cs = grid.cell_size();
    const auto width = static_cast<std::ptrdiff_t>(grid.width());
    const auto height = static_cast<std::ptrdiff_t>(grid.height());

    std::vector<detail::ScanEdge> edges;
    for (const auto& poly : region) {
        detail::collect_edges(poly.outer(), oy, cs, edges);
        for (const auto& inner : poly.inners()) detail::collect_edges(inner, oy, cs, edges);
    }
    if (edges.empty()) return;
    std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) { return a.row_begin < b.row_begin; });

    std::ptrdiff_t row = std::max<std::ptrdiff_t>(0, edges.front().row_begin);
    std::ptrdiff_t row_stop = 0;
    for (const auto& e : edges) row_stop = std::max(row_stop, e.row_end);
    row_stop = std::min(row_stop, height);

    std::vector<const detail::ScanEdge*> active;
    std::vector<double> xs;
    std::size_t next = 0;
    for (; row < row_stop; ++row) {
        while (next < edges.size() && edges[next].row_begin <= row) active.push_back(&edges[next++]);
        std::erase_if(active, [row](const detail::ScanEdge* e) { return e->row_end <= row; });
        if (active.empty()) continue;

        const double yc = oy + (static_cast<double>(row) + 0.5) * cs;
        xs.clear();
        for (const auto* e : active) {
            xs.push_back(e->x_lo + (yc - e->y_lo) * (e->x_hi - e->x_lo) / (e->y_hi - e->y_lo));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
            const auto c0 = std::clamp<std::ptrdiff_t>(detail::first_center_at_or_after(xs[i], ox, cs), 0, width);
            const auto c1 = std::clamp<std::ptrdiff_t>(detail::first_center_at_or_after(xs[i + 1], ox, cs), 0, width);
            if (c0 < c1) {
                fn(static_cast<std::size_t>(row), static_cast<std::size_t>(c0), static_cast<std::size_t>(c1));
            }
        }
    }
}

struct Run {
    std::size_t row, col_begin, col_end;
};

// Pixel runs of a region, ordered by row then column, disjoint within a row.
using RunList = std::vector<Run>;

inline RunList runs_of(const GreenRaster& grid, const MultiPolygon& region) {
    RunList out;
    for_each_run(grid, region, [&](std::size_t row, std::size_t c0, std::size_t c1) { out.push_back({row, c0, c1}); });
    return out;
}

inline RunList intersect(const RunList& a, const RunList& b) {
    RunList out;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i].row != b[j].row) {
            (a[i].row < b[j].row ? i : j)++;
            continue;
        }
        const std::size_t lo = std::max(a[i].col_begin, b[j].col_begin);
        const std::size_t hi = std::min(a[i].col_end, b[j].col_end);
        if (lo < hi) out.push_back({a[i].row, lo, hi});
        (a[i].col_end < b[j].col_end ? i : j)++;
    }
    return out;
}

inline std::size_t pixel_count(const RunList& runs) {
    std::size_t n = 0;
    for (const Run& r : runs) n += r.col_end - r.col_begin;
    return n;
}

inline std::size_t green_count(const GreenRaster& raster, const RunList& runs) {
    std::size_t n = 0;
    for (const Run& r : runs) n += raster.count_run(r.row, r.col_begin, r.col_end);
    return n;
}

struct ZoneCount {
    std::size_t pixels = 0; // pixel centers inside the region
    std::size_t green = 0;  // of which green
};

inline ZoneCount zonal_count(const GreenRaster& raster, const MultiPolygon& region) {
    ZoneCount zc;
    for_each_run(raster, region, [&](std::size_t row, std::size_t c0, std::size_t c1) {
        zc.pixels += c1 - c0;
        zc.green += raster.count_run(row, c0, c1);
    });
    return zc;
}

// Raster on the same grid as `like` with every pixel whose center lies in any of `regions` set.
template <class Range>
GreenRaster burn(const GreenRaster& like, const Range& regions) {
    GreenRaster out = like.empty_like();
    for (const MultiPolygon& r : regions) {
        for_each_run(out, r, [&](std::size_t row, std::size_t c0, std::size_t c1) { out.set_run(row, c0, c1); });
    }
    return out;
}

inline GreenRaster burn(const GreenRaster& like, const MultiPolygon& region) {
    return burn(like, std::span<const MultiPolygon>(&region, 1));
}

// Rasterizes vector green cover onto a fresh grid covering `extent`.
inline GreenRaster rasterize_cover(const Box& extent, double cell_size, std::span<const MultiPolygon> cover) {
    if (!(cell_size > 0.0)) throw DomainError("cell_size must be > 0");
    const double w = extent.max_corner().x() - extent.min_corner().x();
    const double h = extent.max_corner().y() - extent.min_corner().y();
    const auto cols = static_cast<std::size_t>(std::ceil(w / cell_size - 1e-9));
    const auto rows = static_cast<std::size_t>(std::ceil(h / cell_size - 1e-9));
    GreenRaster grid(extent.min_corner(), cell_size, cols, rows);
    return burn(grid, cover);
}

struct Fraction {
    double value = 0.0;
    std::size_t pixels = 0;
    std::size_t green = 0;
    bool no_coverage = false; // region covers no pixel centers; value reported as 0
};

// Share of pixels (by center) inside `region` that are green.
inline Fraction rasterize_fraction(const GreenRaster& raster, const MultiPolygon& region) {
    if (is_empty(region)) throw DomainError("region is empty");
    const MultiPolygon valid = validated(region, "region");
    if (looks_geographic(envelope(valid)) != looks_geographic(raster.extent())) {
        throw ConfigError("region and raster appear to use different coordinate systems");
    }
    const ZoneCount zc = zonal_count(raster, valid);
    Fraction f;
    f.pixels = zc.pixels;
    f.green = zc.green;
    if (zc.pixels == 0) {
        f.no_coverage = true;
        return f;
    }
    f.value = static_cast<double>(zc.green) / static_cast<double>(zc.pixels);
    return f;
}

} // namespace greenexp
