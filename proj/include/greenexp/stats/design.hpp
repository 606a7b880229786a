#pragma once

#include <greenexp/error.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace greenexp {

// One row per area: outcome, predictors (no intercept column) and projected coordinates.
struct DesignMatrix {
    std::vector<std::string> area_ids;
    Eigen::VectorXd y;
    Eigen::MatrixXd x;
    std::vector<std::string> predictor_names;
    Eigen::MatrixXd coords; // n x 2
    std::vector<std::string> dropped; // areas removed for missing values

    std::size_t rows() const { return area_ids.size(); }
    std::size_t predictors() const { return static_cast<std::size_t>(x.cols()); }
};

struct Column {
    std::string name;
    std::vector<std::optional<double>> values;
};

// Assembles a design matrix, dropping any area with a missing or non-finite value.
inline DesignMatrix make_design(std::span<const std::string> area_ids, std::span<const std::optional<double>> outcome,
                                std::span<const Column> predictors, std::span<const std::pair<double, double>> coords) {
    const std::size_t n = area_ids.size();
    if (outcome.size() != n || coords.size() != n) throw DomainError("design inputs have mismatched lengths");
    for (const auto& c : predictors)
        if (c.values.size() != n) throw DomainError("predictor '" + c.name + "' has the wrong length");
    auto ok = [](const std::optional<double>& v) { return v && std::isfinite(*v); };
    std::vector<std::size_t> keep;
    DesignMatrix d;
    for (std::size_t i = 0; i < n; ++i) {
        bool good = ok(outcome[i]) && std::isfinite(coords[i].first) && std::isfinite(coords[i].second);
        for (const auto& c : predictors) good = good && ok(c.values[i]);
        if (good) keep.push_back(i);
        else d.dropped.push_back(area_ids[i]);
    }
    const auto m = static_cast<Eigen::Index>(keep.size());
    const auto k = static_cast<Eigen::Index>(predictors.size());
    d.y.resize(m);
    d.x.resize(m, k);
    d.coords.resize(m, 2);
    for (const auto& c : predictors) d.predictor_names.push_back(c.name);
    for (Eigen::Index r = 0; r < m; ++r) {
        const std::size_t i = keep[static_cast<std::size_t>(r)];
        d.area_ids.push_back(area_ids[i]);
        d.y(r) = *outcome[i];
        for (Eigen::Index j = 0; j < k; ++j) d.x(r, j) = *predictors[static_cast<std::size_t>(j)].values[i];
        d.coords(r, 0) = coords[i].first;
        d.coords(r, 1) = coords[i].second;
    }
    return d;
}

// Min-max scaling of an observed range onto [0, 1]. A constant range maps everything to 0.
struct MinMax {
    double lo = 0.0;
    double hi = 0.0;

    static MinMax fit(std::span<const double> v) {
        if (v.empty()) throw DomainError("min-max normalization of an empty range");
        const auto [a, b] = std::minmax_element(v.begin(), v.end());
        return {*a, *b};
    }

    double span() const { return hi - lo; }
    double apply(double v) const { return span() > 0.0 ? (v - lo) / span() : 0.0; }
    double invert(double t) const { return lo + t * span(); }
};

inline std::vector<double> normalize(std::span<const double> v, MinMax* fitted = nullptr) {
    const MinMax mm = MinMax::fit(v);
    if (fitted) *fitted = mm;
    std::vector<double> out;
    out.reserve(v.size());
    for (double x : v) out.push_back(mm.apply(x));
    return out;
}

// Linear-interpolation percentile (numpy's default), p in [0, 100].
inline double percentile(std::vector<double> v, double p) {
    if (v.empty()) throw DomainError("percentile of an empty sample");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return percentile(std::move(v), 50.0); }

// Treated iff strictly above the median of the non-missing values; missing stays missing.
inline std::vector<std::optional<bool>> binarize_treatment(std::span<const std::optional<double>> values) {
    std::vector<double> present;
    for (const auto& v : values)
        if (v) present.push_back(*v);
    std::vector<std::optional<bool>> out(values.size());
    if (present.empty()) return out;
    const double m = median(present);
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i]) out[i] = *values[i] > m;
    return out;
}

} // namespace greenexp
