#include <greenexp/stats/design.hpp>
#include <greenexp/stats/gwr.hpp>
#include <greenexp/stats/psm.hpp>

#include "../support/synthetic_city.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace greenexp;
using greenexp::testing::gwr_city;
using greenexp::testing::psm_city;

namespace {

using Rational = boost::multiprecision::cpp_rational;

// Exact least squares: normal equations solved by Gaussian elimination over rationals.
std::vector<double> exact_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const Eigen::Index n = x.rows(), p = x.cols() + 1;
    std::vector<std::vector<Rational>> a(static_cast<std::size_t>(p), std::vector<Rational>(static_cast<std::size_t>(p + 1)));
    auto col = [&](Eigen::Index i, Eigen::Index j) { return j == 0 ? Rational(1) : Rational(x(i, j - 1)); };
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index r = 0; r < p; ++r) {
            const Rational xr = col(i, r);
            for (Eigen::Index c = 0; c < p; ++c) a[r][c] += xr * col(i, c);
            a[r][p] += xr * Rational(y(i));
        }
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
        std::size_t piv = k;
        while (a[piv][k] == 0) ++piv;
        std::swap(a[k], a[piv]);
        for (std::size_t r = 0; r < a.size(); ++r) {
            if (r == k || a[r][k] == 0) continue;
            const Rational f = a[r][k] / a[k][k];
            for (std::size_t c = k; c < a[r].size(); ++c) a[r][c] -= f * a[k][c];
        }
    }
    std::vector<double> beta;
    for (std::size_t k = 0; k < a.size(); ++k) beta.push_back(static_cast<double>(a[k][a.size()] / a[k][k]));
    return beta;
}

DesignMatrix random_design(std::uint64_t seed, int n, int k) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 5000.0);
    DesignMatrix d;
    d.y.resize(n);
    d.x.resize(n, k);
    d.coords.resize(n, 2);
    for (int j = 0; j < k; ++j) d.predictor_names.push_back("x" + std::to_string(j));
    for (int i = 0; i < n; ++i) {
        d.area_ids.push_back(std::to_string(i));
        d.coords(i, 0) = u(rng);
        d.coords(i, 1) = u(rng);
        double y = 2.0;
        for (int j = 0; j < k; ++j) {
            d.x(i, j) = 10.0 * j + (j + 1.0) * z(rng);
            y += (0.5 - 0.3 * j) * d.x(i, j);
        }
        d.y(i) = y + 0.2 * z(rng);
    }
    return d;
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::ArrayXd da = a.array() - a.mean(), db = b.array() - b.mean();
    return (da * db).sum() / std::sqrt(da.square().sum() * db.square().sum());
}

DesignMatrix subset(const DesignMatrix& d, const std::vector<bool>& keep) {
    DesignMatrix o;
    o.predictor_names = d.predictor_names;
    const auto m = static_cast<Eigen::Index>(std::count(keep.begin(), keep.end(), true));
    o.y.resize(m);
    o.x.resize(m, d.x.cols());
    o.coords.resize(m, 2);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < d.y.size(); ++i) {
        if (!keep[static_cast<std::size_t>(i)]) continue;
        o.area_ids.push_back(d.area_ids[static_cast<std::size_t>(i)]);
        o.y(r) = d.y(i);
        o.x.row(r) = d.x.row(i);
        o.coords.row(r) = d.coords.row(i);
        ++r;
    }
    return o;
}

} // namespace

TEST(Gwr, UniformKernelReproducesGlobalLeastSquares) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const DesignMatrix d = random_design(seed, 60, 4);
        const std::vector<double> truth = exact_ols(d.x, d.y);
        const GwrResult r = gwr_fit(d, Kernel::uniform);
        EXPECT_EQ(r.bandwidth, 60u);
        ASSERT_EQ(r.beta.rows(), 60);
        ASSERT_EQ(r.beta.cols(), 5);
        EXPECT_TRUE(r.failed.empty());
        for (Eigen::Index i = 0; i < r.beta.rows(); ++i)
            for (Eigen::Index j = 0; j < r.beta.cols(); ++j)
                EXPECT_NEAR(r.beta(i, j), truth[static_cast<std::size_t>(j)], 1e-8) << "seed " << seed << " row " << i;
        const Eigen::VectorXd o = ols(d);
        for (Eigen::Index j = 0; j < o.size(); ++j) EXPECT_NEAR(o(j), truth[static_cast<std::size_t>(j)], 1e-8);
        // Global fit: the hat matrix trace is the coefficient count.
        EXPECT_NEAR(r.tr_s, 5.0, 1e-8);
    }
}

TEST(Gwr, ConstantCoefficientsWithinThreeStandardErrors) {
    const auto t = gwr_city(7, 25, false);
    const GwrResult r = gwr_fit(t.data);
    EXPECT_GE(r.bandwidth, 4u);
    EXPECT_LE(r.bandwidth, 625u);
    EXPECT_EQ(r.coefficient_names, (std::vector<std::string>{"intercept", "x1", "x2"}));
    for (Eigen::Index j = 0; j < 3; ++j) {
        int inside = 0;
        for (Eigen::Index i = 0; i < r.beta.rows(); ++i)
            inside += std::abs(r.beta(i, j) - t.beta(i, j)) <= 3.0 * r.std_error(i, j);
        EXPECT_GE(inside, static_cast<int>(std::ceil(0.95 * 625))) << r.coefficient_names[static_cast<std::size_t>(j)];
    }
}

TEST(Gwr, LinearlyVaryingCoefficientRecovered) {
    for (std::uint64_t seed : {3u, 11u}) {
        const auto t = gwr_city(seed, 25, true);
        const GwrResult r = gwr_fit(t.data);
        EXPECT_LT(r.bandwidth, 625u);
        EXPECT_GT(correlation(r.beta.col(1), t.beta.col(1)), 0.9) << "seed " << seed;
        EXPECT_TRUE(r.residuals.allFinite());
        EXPECT_TRUE(std::isfinite(r.aicc));
        EXPECT_GT(r.sigma2, 0.0);
    }
}

TEST(Gwr, SingularNeighbourhoodIsRecordedAndSkipped) {
    auto t = gwr_city(5, 20, false);
    // x2 is zero in the left three columns of areas, so it is collinear with the intercept there.
    for (Eigen::Index i = 0; i < t.data.x.rows(); ++i)
        if (t.data.coords(i, 0) < 250.0) t.data.x(i, 1) = 0.0;
    const GwrResult r = gwr_fit(t.data, Kernel::adaptive_bisquare, 5);
    ASSERT_FALSE(r.failed.empty());
    for (std::size_t i : r.failed) {
        EXPECT_LT(t.data.coords(static_cast<Eigen::Index>(i), 0), 250.0);
        EXPECT_TRUE(r.beta.row(static_cast<Eigen::Index>(i)).array().isNaN().all());
    }
    std::size_t finite = 0;
    for (Eigen::Index i = 0; i < r.beta.rows(); ++i) finite += r.beta.row(i).allFinite();
    EXPECT_EQ(finite + r.failed.size(), 400u);
    EXPECT_TRUE(r.beta.row(399).allFinite());
}

TEST(Gwr, BandwidthBounds) {
    const auto t = gwr_city(2, 8, false);
    EXPECT_THROW(gwr_fit(t.data, Kernel::adaptive_bisquare, 3), DomainError);
    EXPECT_THROW(gwr_fit(t.data, Kernel::adaptive_bisquare, 65), DomainError);
    EXPECT_EQ(gwr_fit(t.data, Kernel::adaptive_bisquare, 4).bandwidth, 4u);
    EXPECT_EQ(gwr_fit(t.data, Kernel::adaptive_bisquare, 64).bandwidth, 64u);
    const GwrResult r = gwr_fit(t.data);
    EXPECT_GE(r.bandwidth, 4u);
    EXPECT_LE(r.bandwidth, 64u);
    DesignMatrix tiny = t.data;
    tiny.area_ids.resize(3);
    tiny.y.conservativeResize(3);
    tiny.x.conservativeResize(3, 2);
    tiny.coords.conservativeResize(3, 2);
    EXPECT_THROW(gwr_fit(tiny), DomainError);
}

TEST(Gwr, SelectedBandwidthIsNoWorseThanNeighbours) {
    const auto t = gwr_city(9, 12, true);
    const GwrResult r = gwr_fit(t.data);
    for (std::size_t b : {r.bandwidth - 1, r.bandwidth + 1}) {
        if (b < 4 || b > 144) continue;
        EXPECT_LE(r.aicc, gwr_fit(t.data, Kernel::adaptive_bisquare, b).aicc);
    }
}

TEST(Propensity, IndependentTreatmentScoresNearHalf) {
    auto c = psm_city(4, 0.0, 400);
    std::mt19937_64 rng(99);
    std::vector<bool> t(400, false);
    for (std::size_t i = 0; i < 200; ++i) t[i] = true;
    std::shuffle(t.begin(), t.end(), rng);
    const auto s = propensity_scores(c.data, t);
    ASSERT_EQ(s.size(), 400u);
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / 400.0;
    EXPECT_NEAR(mean, 0.5, 0.05);
    for (double p : s) {
        EXPECT_GT(p, 0.0);
        EXPECT_LT(p, 1.0);
    }
}

TEST(Propensity, DeterministicTreatmentSeparates) {
    const auto c = psm_city(4, 0.0, 200);
    std::vector<bool> t;
    for (Eigen::Index i = 0; i < c.data.x.rows(); ++i) t.push_back(c.data.x(i, 0) > 25.0);
    EXPECT_THROW(propensity_scores(c.data, t), SeparationError);
    EXPECT_THROW(propensity_scores(c.data, std::vector<bool>(200, true)), DomainError);
}

TEST(Propensity, RecoversKnownCoefficient) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 20000;
    DesignMatrix d;
    d.x.resize(n, 1);
    d.y = Eigen::VectorXd::Zero(n);
    d.area_ids.resize(n);
    std::vector<bool> t(n);
    for (int i = 0; i < n; ++i) {
        d.x(i, 0) = 3.0 + 2.0 * z(rng);
        t[static_cast<std::size_t>(i)] = u(rng) < 1.0 / (1.0 + std::exp(-(-3.0 + 1.0 * d.x(i, 0))));
    }
    const LogisticFit f = propensity_fit(d, t);
    EXPECT_NEAR(f.coef(1), 1.0, 0.1);
    EXPECT_NEAR(f.coef(0), -3.0, 0.3);
}

TEST(Propensity, ConstantCovariateIsIgnored) {
    auto c = psm_city(8, 0.0, 300);
    c.data.x.col(2).setConstant(40.0);
    const LogisticFit f = propensity_fit(c.data, c.treated);
    EXPECT_EQ(f.coef(3), 0.0);
    EXPECT_TRUE(f.score.allFinite());
}

TEST(Psm, ConstantOutcomeGivesZeroEffect) {
    auto c = psm_city(1, 0.1, 200);
    c.data.y.setConstant(0.4);
    PsmOptions o;
    o.bootstrap = 100;
    o.seed = 5;
    const AteResult r = psm_ate(c.data, c.treated, o, "g_offroad");
    EXPECT_EQ(r.treatment, "g_offroad");
    EXPECT_EQ(r.ate_mean, 0.0);
    EXPECT_EQ(r.se, 0.0);
    EXPECT_FALSE(r.significant);
    EXPECT_EQ(r.ate_full, 0.0);
}

TEST(Psm, RecoversPlantedEffect) {
    const auto c = psm_city(12, 0.05, 400);
    PsmOptions o;
    o.bootstrap = 300;
    o.seed = 12;
    const AteResult r = psm_ate(c.data, c.treated, o);
    EXPECT_NEAR(r.ate_mean, 0.05, 2.0 * r.se);
    EXPECT_TRUE(r.significant);
    EXPECT_GT(r.se, 0.0);
}

TEST(Psm, ResultShapeAndCi) {
    const auto c = psm_city(3, 0.02, 250);
    PsmOptions o;
    o.bootstrap = 150;
    o.seed = 1;
    const AteResult r = psm_ate(c.data, c.treated, o);
    ASSERT_EQ(r.bootstrap_draws.size(), 150u);
    EXPECT_GE(r.se, 0.0);
    EXPECT_LE(r.ci_lo, r.ci_hi);
    EXPECT_EQ(r.significant, !(r.ci_lo <= 0.0 && 0.0 <= r.ci_hi));
    const auto [lo, hi] = std::minmax_element(r.bootstrap_draws.begin(), r.bootstrap_draws.end());
    EXPECT_GE(r.ci_lo, *lo);
    EXPECT_LE(r.ci_hi, *hi);
}

TEST(Psm, ShiftAndScaleOfOutcome) {
    const auto c = psm_city(6, 0.05, 200);
    PsmOptions o;
    o.bootstrap = 80;
    o.seed = 2;
    const AteResult base = psm_ate(c.data, c.treated, o);
    auto shifted = c;
    shifted.data.y.array() += 3.0;
    auto scaled = c;
    scaled.data.y *= 2.5;
    const AteResult s = psm_ate(shifted.data, shifted.treated, o);
    const AteResult k = psm_ate(scaled.data, scaled.treated, o);
    EXPECT_NEAR(s.ate_mean, base.ate_mean, 1e-12);
    EXPECT_NEAR(s.se, base.se, 1e-12);
    EXPECT_NEAR(k.ate_mean, 2.5 * base.ate_mean, 1e-12 * std::abs(2.5 * base.ate_mean));
    EXPECT_NEAR(k.se, 2.5 * base.se, 1e-12 * 2.5 * base.se);
    EXPECT_EQ(s.significant, base.significant);
    EXPECT_EQ(k.significant, base.significant);
}

TEST(Psm, DeterministicAcrossRunsAndJobCounts) {
    const auto c = psm_city(10, 0.05, 200);
    PsmOptions o;
    o.bootstrap = 64;
    o.seed = 77;
    const AteResult a = psm_ate(c.data, c.treated, o);
    const AteResult b = psm_ate(c.data, c.treated, o);
    o.jobs = 4;
    const AteResult p = psm_ate(c.data, c.treated, o);
    EXPECT_EQ(a.bootstrap_draws, b.bootstrap_draws);
    EXPECT_EQ(a.bootstrap_draws, p.bootstrap_draws);
    EXPECT_EQ(a.ate_mean, p.ate_mean);
    EXPECT_EQ(a.se, p.se);
    EXPECT_EQ(a.redraws, p.redraws);
    o.seed = 78;
    EXPECT_NE(psm_ate(c.data, c.treated, o).bootstrap_draws, a.bootstrap_draws);
}

TEST(Psm, PermutedTreatmentIsRarelySignificant) {
    const auto c = psm_city(30, 0.0, 300);
    int significant = 0;
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        std::vector<bool> t = c.treated;
        std::mt19937_64 rng(1000 + rep);
        std::shuffle(t.begin(), t.end(), rng);
        PsmOptions o;
        o.bootstrap = 150;
        o.seed = rep;
        significant += psm_ate(c.data, t, o).significant;
    }
    EXPECT_LE(significant, 2);
}

TEST(Psm, TooFewPairsEverywhereFails) {
    const auto c = psm_city(2, 0.05, 60);
    PsmOptions o;
    o.bootstrap = 4;
    o.min_pairs = 1000;
    o.max_redraws = 5;
    EXPECT_THROW(psm_ate(c.data, c.treated, o), DomainError);
}

TEST(Psm, MatchingPairsBothDirections) {
    // Logits 0, 1 (control) and 0.9, 5 (treated); the caliper admits only the close pair.
    Eigen::VectorXd logit(4), y(4);
    logit << 0.0, 1.0, 0.9, 5.0;
    y << 1.0, 2.0, 7.0, 100.0;
    const std::vector<bool> t{false, false, true, true};
    const auto m = detail::match_pairs(logit, t, y, 0.5);
    // treated 0.9 -> control 1.0; control 1.0 -> treated 0.9; control 0.0 and treated 5.0 are outside.
    EXPECT_EQ(m.pairs, 2u);
    EXPECT_DOUBLE_EQ(m.ate, 5.0);
    const auto wide = detail::match_pairs(logit, t, y, 10.0);
    // 0.9->1.0 (5), 5.0->1.0 (98), 0.0->0.9 (6), 1.0->0.9 (5)
    EXPECT_EQ(wide.pairs, 4u);
    EXPECT_DOUBLE_EQ(wide.ate, 114.0 / 4.0);
}

TEST(Psm, MatchingTieGoesToLowerRow) {
    Eigen::VectorXd logit(3), y(3);
    logit << 0.0, 2.0, 1.0;
    y << 10.0, 20.0, 0.0;
    const auto m = detail::match_pairs(logit, {false, false, true}, y, 5.0);
    // The treated row is equidistant from both controls and takes row 0; each control matches it.
    EXPECT_EQ(m.pairs, 3u);
    EXPECT_DOUBLE_EQ(m.ate, (-10.0 - 10.0 - 20.0) / 3.0);
}

TEST(Design, MinMaxMapsRangeExactlyAndInverts) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-50.0, 800.0);
    std::vector<double> v(500);
    for (auto& x : v) x = u(rng);
    MinMax mm;
    const auto t = normalize(v, &mm);
    EXPECT_EQ(*std::min_element(t.begin(), t.end()), 0.0);
    EXPECT_EQ(*std::max_element(t.begin(), t.end()), 1.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        EXPECT_GE(t[i], 0.0);
        EXPECT_LE(t[i], 1.0);
        EXPECT_NEAR(mm.invert(t[i]), v[i], 1e-12 * std::max(1.0, std::abs(v[i])));
    }
    const std::vector<double> flat(4, 2.5);
    for (double x : normalize(flat)) EXPECT_EQ(x, 0.0);
    EXPECT_THROW(normalize(std::vector<double>{}), DomainError);
}

TEST(Design, BinarizeIsStrictlyAboveMedian) {
    using O = std::optional<double>;
    auto flags = [](std::vector<O> v) {
        std::vector<std::optional<bool>> out = binarize_treatment(v);
        return out;
    };
    EXPECT_EQ(flags({1.0, 2.0, 3.0}), (std::vector<std::optional<bool>>{false, false, true}));
    EXPECT_EQ(flags({4.0, 4.0, 4.0, 4.0}), (std::vector<std::optional<bool>>{false, false, false, false}));
    EXPECT_EQ(flags({1.0, std::nullopt, 3.0, 2.0, 10.0}),
              (std::vector<std::optional<bool>>{false, std::nullopt, true, false, true}));
    EXPECT_EQ(flags({std::nullopt}), (std::vector<std::optional<bool>>{std::nullopt}));
}

TEST(Design, PercentileIsLinearInterpolation) {
    const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
    EXPECT_DOUBLE_EQ(percentile(v, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(percentile(v, 100.0), 4.0);
    EXPECT_DOUBLE_EQ(percentile(v, 50.0), 2.5);
    EXPECT_DOUBLE_EQ(percentile(v, 0.5), 1.015);
    EXPECT_DOUBLE_EQ(percentile(v, 99.5), 3.985);
}

TEST(Design, RowsWithMissingValuesAreDropped) {
    const std::vector<std::string> ids{"a", "b", "c", "d"};
    const std::vector<std::optional<double>> y{1.0, 2.0, std::nullopt, 4.0};
    const std::vector<Column> cols{{"imd_score", {1.0, std::nullopt, 3.0, 4.0}}, {"median_age", {30.0, 31.0, 32.0, 33.0}}};
    const std::vector<std::pair<double, double>> xy{{0, 0}, {1, 0}, {2, 0}, {3, std::nan("")}};
    const DesignMatrix d = make_design(ids, y, cols, xy);
    EXPECT_EQ(d.area_ids, (std::vector<std::string>{"a"}));
    EXPECT_EQ(d.dropped, (std::vector<std::string>{"b", "c", "d"}));
    EXPECT_EQ(d.predictor_names, (std::vector<std::string>{"imd_score", "median_age"}));
    EXPECT_EQ(d.x(0, 1), 30.0);
    const std::vector<std::optional<double>> short_y{1.0};
    EXPECT_THROW(make_design(ids, short_y, cols, xy), DomainError);
}
