#pragma once

// Area-level synthetic data with known coefficients and planted treatment effects.

#include <greenexp/stats/design.hpp>

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace greenexp::testing {

struct GwrTruth {
    DesignMatrix data;
    Eigen::MatrixXd beta; // n x 3: intercept, x1, x2
};

// Areas on a side x side grid at 100 m spacing. y = b0 + b1(u) x1 + b2 x2 + e.
// With `varying`, b1 rises linearly from 1 to 3 across the grid in u.
inline GwrTruth gwr_city(std::uint64_t seed, int side = 25, bool varying = false, double noise = 0.1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    const int n = side * side;
    GwrTruth t;
    t.data.y.resize(n);
    t.data.x.resize(n, 2);
    t.data.coords.resize(n, 2);
    t.data.predictor_names = {"x1", "x2"};
    t.beta.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        const double u = 100.0 * (i % side), v = 100.0 * (i / side);
        t.data.area_ids.push_back("W" + std::to_string(i));
        t.data.coords(i, 0) = u;
        t.data.coords(i, 1) = v;
        const double b1 = varying ? 1.0 + 2.0 * u / (100.0 * (side - 1)) : 0.5;
        t.beta.row(i) << 1.0, b1, -0.3;
        const double x1 = z(rng), x2 = z(rng);
        t.data.x(i, 0) = x1;
        t.data.x(i, 1) = x2;
        t.data.y(i) = 1.0 + b1 * x1 - 0.3 * x2 + noise * z(rng);
    }
    return t;
}

struct PsmCity {
    DesignMatrix data; // y is the outcome, x the four confounders
    std::vector<double> greenery;
    std::vector<bool> treated;
};

// Confounded assignment: greenery depends on the confounders, treatment is the
// above-median split of greenery, and the outcome depends on the confounders
// plus delta for treated areas. Outcomes stay roughly inside [0, 1].
inline PsmCity psm_city(std::uint64_t seed, double delta, std::size_t n = 400) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    PsmCity c;
    const auto m = static_cast<Eigen::Index>(n);
    c.data.y.resize(m);
    c.data.x.resize(m, 4);
    c.data.coords.resize(m, 2);
    c.data.predictor_names = {"imd_score", "building_density", "median_age", "white_percent"};
    std::vector<std::optional<double>> g(n);
    for (Eigen::Index i = 0; i < m; ++i) {
        c.data.area_ids.push_back("A" + std::to_string(i));
        c.data.coords(i, 0) = 100.0 * static_cast<double>(i % 20);
        c.data.coords(i, 1) = 100.0 * static_cast<double>(i / 20);
        const double imd = z(rng), dens = z(rng), age = z(rng), white = z(rng);
        c.data.x(i, 0) = 25.0 + 12.0 * imd;
        c.data.x(i, 1) = 0.3 + 0.1 * dens;
        c.data.x(i, 2) = 36.0 + 5.0 * age;
        c.data.x(i, 3) = 60.0 + 15.0 * white;
        const double green = -0.6 * imd - 0.5 * dens + 0.3 * age + 0.2 * white + z(rng);
        g[static_cast<std::size_t>(i)] = green;
        c.greenery.push_back(green);
    }
    const auto flags = binarize_treatment(g);
    for (Eigen::Index i = 0; i < m; ++i) {
        const bool t = *flags[static_cast<std::size_t>(i)];
        c.treated.push_back(t);
        const double imd = (c.data.x(i, 0) - 25.0) / 12.0, dens = (c.data.x(i, 1) - 0.3) / 0.1,
                     age = (c.data.x(i, 2) - 36.0) / 5.0;
        c.data.y(i) = 0.5 + 0.08 * imd + 0.04 * dens + 0.03 * age + 0.05 * z(rng) + (t ? delta : 0.0);
    }
    return c;
}

} // namespace greenexp::testing
