#pragma once

// Propensity-score matching with a bootstrap over areas.
//
// Each replicate resamples areas with replacement, refits the logistic
// propensity model, matches every treated area to its nearest control and
// every control to its nearest treated area on the logit scale (with
// replacement, inside a caliper) and averages y(treated) - y(control) over the
// matched pairs.

#include <greenexp/error.hpp>
#include <greenexp/stats/design.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace greenexp {

struct LogisticFit {
    Eigen::VectorXd coef;  // intercept then one per covariate, on the original covariate scale
    Eigen::VectorXd logit; // linear predictor per row
    Eigen::VectorXd score; // fitted probability per row
    int iterations = 0;
};

namespace detail {

inline constexpr double kSeparationLogit = 30.0;

inline double sigmoid(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

// Newton-Raphson on standardized covariates; constant columns get coefficient 0.
inline LogisticFit logistic_newton(const Eigen::MatrixXd& x, const std::vector<bool>& t) {
    const Eigen::Index n = x.rows(), k = x.cols();
    std::size_t treated = 0;
    for (bool b : t) treated += b;
    if (treated == 0 || treated == t.size()) throw DomainError("propensity model needs both treated and control areas");

    std::vector<Eigen::Index> used;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(k), sd = Eigen::VectorXd::Ones(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        mu(j) = x.col(j).mean();
        const double s = std::sqrt((x.col(j).array() - mu(j)).square().sum() / static_cast<double>(n));
        if (s > 1e-12 * std::max(1.0, std::abs(mu(j)))) {
            sd(j) = s;
            used.push_back(j);
        }
    }
    const auto p = static_cast<Eigen::Index>(used.size()) + 1;
    Eigen::MatrixXd z(n, p);
    z.col(0).setOnes();
    for (Eigen::Index c = 1; c < p; ++c) {
        const Eigen::Index j = used[static_cast<std::size_t>(c - 1)];
        z.col(c) = (x.col(j).array() - mu(j)) / sd(j);
    }
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = t[static_cast<std::size_t>(i)] ? 1.0 : 0.0;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
    bool converged = false;
    int it = 0;
    for (; it < 100 && !converged; ++it) {
        Eigen::VectorXd prob(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            prob(i) = sigmoid(eta(i));
            w(i) = prob(i) * (1.0 - prob(i));
        }
        const Eigen::VectorXd grad = z.transpose() * (y - prob);
        const Eigen::MatrixXd h = z.transpose() * w.asDiagonal() * z;
        const Eigen::VectorXd step = h.ldlt().solve(grad);
        if (!step.allFinite()) break;
        beta += step;
        eta = z * beta;
        if (eta.cwiseAbs().maxCoeff() > kSeparationLogit) {
            throw SeparationError(
                "propensity model separates treated from control areas; review the caliper or the covariate set");
        }
        converged = step.cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, beta.cwiseAbs().maxCoeff());
    }
    if (!converged)
        throw SeparationError("propensity model did not converge; review the caliper or the covariate set");

    LogisticFit f;
    f.iterations = it;
    f.coef = Eigen::VectorXd::Zero(k + 1);
    f.coef(0) = beta(0);
    for (Eigen::Index c = 1; c < p; ++c) {
        const Eigen::Index j = used[static_cast<std::size_t>(c - 1)];
        f.coef(j + 1) = beta(c) / sd(j);
        f.coef(0) -= beta(c) * mu(j) / sd(j);
    }
    f.logit = eta;
    f.score = eta.unaryExpr([](double e) { return sigmoid(e); });
    return f;
}

struct MatchOutcome {
    std::size_t pairs = 0;
    double ate = 0.0;
};

// Nearest neighbour on the logit, with replacement. Ties go to the lower row.
inline MatchOutcome match_pairs(const Eigen::VectorXd& logit, const std::vector<bool>& t, const Eigen::VectorXd& y,
                                double caliper) {
    struct Key {
        double logit;
        Eigen::Index row;
    };
    std::vector<Key> groups[2];
    for (Eigen::Index i = 0; i < logit.size(); ++i) groups[t[static_cast<std::size_t>(i)] ? 1 : 0].push_back({logit(i), i});
    for (auto& g : groups)
        std::sort(g.begin(), g.end(), [](const Key& a, const Key& b) { return a.logit != b.logit ? a.logit < b.logit : a.row < b.row; });
    auto first_with = [](const std::vector<Key>& g, double v) {
        return std::lower_bound(g.begin(), g.end(), v, [](const Key& a, double b) { return a.logit < b; });
    };

    MatchOutcome m;
    double sum = 0.0;
    for (int side = 0; side < 2; ++side) {
        const auto& from = groups[side];
        const auto& to = groups[1 - side];
        for (const Key& k : from) {
            auto right = first_with(to, k.logit);
            std::optional<Key> best;
            double best_d = 0.0;
            auto consider = [&](const Key& c) {
                const double d = std::abs(c.logit - k.logit);
                if (!best || d < best_d || (d == best_d && c.row < best->row)) {
                    best = c;
                    best_d = d;
                }
            };
            if (right != to.end()) consider(*right);
            if (right != to.begin()) consider(*first_with(to, std::prev(right)->logit));
            if (!best || best_d > caliper) continue;
            const double diff = side == 1 ? y(k.row) - y(best->row) : y(best->row) - y(k.row);
            sum += diff;
            ++m.pairs;
        }
    }
    if (m.pairs) m.ate = sum / static_cast<double>(m.pairs);
    return m;
}

} // namespace detail

// Logistic propensity model of treatment on the design's predictors.
inline LogisticFit propensity_fit(const DesignMatrix& data, const std::vector<bool>& treatment) {
    if (treatment.size() != data.rows()) throw DomainError("one treatment flag per area is required");
    return detail::logistic_newton(data.x, treatment);
}

inline std::vector<double> propensity_scores(const DesignMatrix& data, const std::vector<bool>& treatment) {
    const LogisticFit f = propensity_fit(data, treatment);
    return {f.score.data(), f.score.data() + f.score.size()};
}

struct PsmOptions {
    std::size_t bootstrap = 1000;
    std::uint64_t seed = 0;
    double caliper_sd = 0.2;   // caliper as a multiple of SD(logit)
    std::size_t min_pairs = 10;
    std::size_t max_redraws = 1000; // per replicate
    unsigned jobs = 1;
};

struct AteResult {
    std::string treatment;
    double ate_mean = 0.0;
    std::optional<double> ate_full; // on the original sample, when that fit succeeds
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool significant = false;
    std::vector<double> bootstrap_draws;
    std::size_t redraws = 0;
};

// ATE over matched pairs for one sample given as row indices into `data`.
// Returns nullopt when the sample has one group only, separates, or yields too few pairs.
inline std::optional<detail::MatchOutcome> psm_once(const DesignMatrix& data, const std::vector<bool>& treatment,
                                                    const std::vector<std::size_t>& rows, const PsmOptions& opt) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd x(n, data.x.cols());
    Eigen::VectorXd y(n);
    std::vector<bool> t(rows.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
        x.row(i) = data.x.row(r);
        y(i) = data.y(r);
        t[static_cast<std::size_t>(i)] = treatment[static_cast<std::size_t>(r)];
    }
    LogisticFit f;
    try {
        f = detail::logistic_newton(x, t);
    } catch (const DomainError&) {
        return std::nullopt;
    } catch (const SeparationError&) {
        return std::nullopt;
    }
    const double mean = f.logit.mean();
    const double sd = n > 1 ? std::sqrt((f.logit.array() - mean).square().sum() / static_cast<double>(n - 1)) : 0.0;
    const detail::MatchOutcome m = detail::match_pairs(f.logit, t, y, opt.caliper_sd * sd);
    if (m.pairs < opt.min_pairs) return std::nullopt;
    return m;
}

inline AteResult psm_ate(const DesignMatrix& data, const std::vector<bool>& treatment, const PsmOptions& opt = {},
                         std::string treatment_name = {}) {
    const std::size_t n = data.rows();
    if (treatment.size() != n) throw DomainError("one treatment flag per area is required");
    if (opt.bootstrap < 2) throw DomainError("at least two bootstrap replicates are required");
    AteResult out;
    out.treatment = std::move(treatment_name);

    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    if (auto m = psm_once(data, treatment, all, opt)) out.ate_full = m->ate;

    std::vector<double> draws(opt.bootstrap);
    std::vector<std::size_t> redraws(opt.bootstrap, 0);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> exhausted{false};
    auto worker = [&] {
        std::vector<std::size_t> rows(n);
        for (std::size_t b; (b = next.fetch_add(1)) < opt.bootstrap && !exhausted;) {
            std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32),
                              static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(static_cast<std::uint64_t>(b) >> 32)};
            std::mt19937_64 rng(seq);
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (;;) {
                for (auto& r : rows) r = pick(rng);
                if (auto m = psm_once(data, treatment, rows, opt)) {
                    draws[b] = m->ate;
                    break;
                }
                if (++redraws[b] > opt.max_redraws) {
                    exhausted = true;
                    break;
                }
            }
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(opt.jobs, static_cast<unsigned>(opt.bootstrap)));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    if (exhausted)
        throw DomainError("bootstrap resamples keep failing (separation or fewer than " + std::to_string(opt.min_pairs) +
                          " matched pairs); review the caliper or the covariate set");

    for (std::size_t r : redraws) out.redraws += r;
    double sum = 0.0;
    for (double d : draws) sum += d;
    out.ate_mean = sum / static_cast<double>(draws.size());
    double ss = 0.0;
    for (double d : draws) ss += (d - out.ate_mean) * (d - out.ate_mean);
    out.se = std::sqrt(ss / static_cast<double>(draws.size() - 1));
    out.ci_lo = percentile(draws, 0.5);
    out.ci_hi = percentile(draws, 99.5);
    out.significant = !(out.ci_lo <= 0.0 && 0.0 <= out.ci_hi);
    out.bootstrap_draws = std::move(draws);
    return out;
}

} // namespace greenexp
