#pragma once

// Geographically weighted regression with an adaptive bisquare kernel.
//
// At location i the bandwidth is the distance to the bw-th nearest observation
// (the location itself counts as the first), inflated by 1e-7 relative so that
// neighbour keeps a small positive weight. Weights are (1 - (d/b)^2)^2 inside
// the bandwidth and 0 beyond. Diagnostics follow the usual GWR definitions:
// tr(S) from the hat matrix, AICc = 2n ln(sigma) + n ln(2 pi) + n (n + trS) / (n - 2 - trS)
// with sigma^2 = RSS / n.

#include <greenexp/stats/design.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <vector>

namespace greenexp {

enum class Kernel {
    adaptive_bisquare,
    uniform // every observation weighted 1 (global least squares at each location)
};

struct GwrResult {
    std::size_t bandwidth = 0;
    std::vector<std::string> coefficient_names; // "intercept" then the predictors
    Eigen::MatrixXd beta;                       // n x (k + 1); NaN rows where the local fit failed
    Eigen::MatrixXd std_error;
    Eigen::VectorXd fitted;
    Eigen::VectorXd residuals;
    double rss = 0.0;
    double tr_s = 0.0;
    double tr_sts = 0.0;
    double sigma2 = 0.0; // RSS / (n - 2 trS + tr(S'S))
    double aicc = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> failed; // locations whose local design was singular
};

namespace detail {

inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out(x.rows(), x.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(x.cols()) = x;
    return out;
}

inline Eigen::MatrixXd distances(const Eigen::MatrixXd& coords) {
    const Eigen::Index n = coords.rows();
    Eigen::MatrixXd d(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) d(i, j) = (coords.row(i) - coords.row(j)).norm();
    return d;
}

inline Eigen::VectorXd kernel_weights(const Eigen::MatrixXd& dist, Eigen::Index i, std::size_t bw, Kernel kernel) {
    const Eigen::Index n = dist.rows();
    if (kernel == Kernel::uniform) return Eigen::VectorXd::Ones(n);
    std::vector<double> row(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = dist(i, j);
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(bw - 1), row.end());
    const double b = row[bw - 1] * 1.0000001;
    Eigen::VectorXd w(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double d = dist(i, j);
        if (b > 0.0 && d < b) {
            const double r = d / b;
            w(j) = (1.0 - r * r) * (1.0 - r * r);
        } else {
            w(j) = (b == 0.0 && d == 0.0) ? 1.0 : 0.0;
        }
    }
    return w;
}

// Local fit at each location plus fit diagnostics.
inline GwrResult fit_all(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::MatrixXd& dist, std::size_t bw,
                         Kernel kernel, bool want_errors) {
    const Eigen::Index n = X.rows(), p = X.cols();
    GwrResult r;
    r.bandwidth = bw;
    r.beta = Eigen::MatrixXd::Constant(n, p, std::numeric_limits<double>::quiet_NaN());
    r.std_error = r.beta;
    r.fitted = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
    r.residuals = r.fitted;
    std::vector<Eigen::MatrixXd> c_rows; // C_i = (X'WX)^-1 X'W, kept for standard errors
    if (want_errors) c_rows.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd w = kernel_weights(dist, i, bw, kernel);
        // Least squares on sqrt(W) X through a pivoted QR: C = P R^-1 Q' sqrt(W).
        const Eigen::VectorXd sw = w.cwiseSqrt();
        const Eigen::MatrixXd a = sw.asDiagonal() * X;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
        qr.setThreshold(1e-10);
        if (qr.rank() < p) {
            r.failed.push_back(static_cast<std::size_t>(i));
            continue;
        }
        const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
        const Eigen::MatrixXd rhs = q.transpose() * sw.asDiagonal();
        const Eigen::MatrixXd c =
            qr.colsPermutation() * qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>().solve(rhs); // p x n
        r.beta.row(i) = (c * y).transpose();
        const Eigen::RowVectorXd s_row = X.row(i) * c; // row i of the hat matrix
        r.tr_s += s_row(i);
        r.tr_sts += s_row.squaredNorm();
        r.fitted(i) = X.row(i).dot(r.beta.row(i));
        r.residuals(i) = y(i) - r.fitted(i);
        r.rss += r.residuals(i) * r.residuals(i);
        if (want_errors) c_rows[static_cast<std::size_t>(i)] = c;
    }
    const double m = static_cast<double>(n - static_cast<Eigen::Index>(r.failed.size()));
    if (m > 0.0 && m - 2.0 - r.tr_s > 0.0) {
        const double sigma = std::sqrt(r.rss / m);
        r.aicc = 2.0 * m * std::log(sigma) + m * std::log(2.0 * std::numbers::pi) + m * (m + r.tr_s) / (m - 2.0 - r.tr_s);
    }
    const double dof = m - 2.0 * r.tr_s + r.tr_sts;
    r.sigma2 = dof > 0.0 ? r.rss / dof : std::numeric_limits<double>::quiet_NaN();
    if (want_errors) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& c = c_rows[static_cast<std::size_t>(i)];
            if (c.size() == 0) continue;
            const Eigen::MatrixXd cov = c * c.transpose() * r.sigma2;
            r.std_error.row(i) = cov.diagonal().cwiseSqrt().transpose();
        }
    }
    return r;
}

} // namespace detail

// Fits GWR. Without a bandwidth the neighbour count is chosen in [k + 2, n] by
// integer golden-section search on AICc (ties resolve to the smaller count).
inline GwrResult gwr_fit(const DesignMatrix& data, Kernel kernel = Kernel::adaptive_bisquare,
                         std::optional<std::size_t> bandwidth = std::nullopt) {
    const std::size_t n = data.rows();
    const std::size_t k = data.predictors();
    if (n < k + 2) throw DomainError("GWR needs at least k + 2 observations");
    const Eigen::MatrixXd X = detail::with_intercept(data.x);
    const Eigen::MatrixXd dist = detail::distances(data.coords);
    std::vector<std::string> names{"intercept"};
    names.insert(names.end(), data.predictor_names.begin(), data.predictor_names.end());

    std::size_t bw = n;
    if (bandwidth) {
        bw = *bandwidth;
        if (bw < k + 2 || bw > n) throw DomainError("GWR bandwidth must lie in [k + 2, n]");
    } else if (kernel == Kernel::adaptive_bisquare) {
        std::map<std::size_t, double> cache;
        auto score = [&](std::size_t b) {
            auto it = cache.find(b);
            if (it != cache.end()) return it->second;
            const double a = detail::fit_all(X, data.y, dist, b, kernel, false).aicc;
            cache.emplace(b, a);
            return a;
        };
        constexpr double kInvPhi = 0.6180339887498949;
        double lo = static_cast<double>(k + 2), hi = static_cast<double>(n);
        while (hi - lo > 3.0) {
            const auto c = static_cast<std::size_t>(std::llround(hi - kInvPhi * (hi - lo)));
            const auto d = static_cast<std::size_t>(std::llround(lo + kInvPhi * (hi - lo)));
            if (score(c) <= score(d)) hi = static_cast<double>(d);
            else lo = static_cast<double>(c);
        }
        bw = static_cast<std::size_t>(lo);
        for (auto b = static_cast<std::size_t>(lo); b <= static_cast<std::size_t>(hi); ++b)
            if (score(b) < score(bw)) bw = b;
    }
    GwrResult r = detail::fit_all(X, data.y, dist, bw, kernel, true);
    r.coefficient_names = std::move(names);
    return r;
}

// Ordinary least squares with intercept; coefficients in the same order as GWR.
inline Eigen::VectorXd ols(const DesignMatrix& data) {
    const Eigen::MatrixXd X = detail::with_intercept(data.x);
    return X.colPivHouseholderQr().solve(data.y);
}

} // namespace greenexp
