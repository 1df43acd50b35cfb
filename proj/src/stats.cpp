#include "xlab/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "xlab/error.hpp"
#include "xlab/special.hpp"

namespace xlab {

TestResult chi_square_gof(std::size_t successes, std::size_t n, double p0) {
    if (n == 0) throw DataError("chi_square_gof: n must be positive");
    if (successes > n) throw DataError("chi_square_gof: successes exceed n");
    if (!(p0 > 0.0 && p0 < 1.0)) throw DataError("chi_square_gof: p0 must lie in (0,1)");
    const double nn = static_cast<double>(n);
    const double s = static_cast<double>(successes);
    const double e1 = nn * p0;
    const double e0 = nn * (1.0 - p0);
    const double d1 = s - e1;
    const double d0 = (nn - s) - e0;
    TestResult r;
    r.statistic = d1 * d1 / e1 + d0 * d0 / e0;
    r.df = 1.0;
    r.p = std::clamp(chi_square_sf(r.statistic, 1.0), 0.0, 1.0);
    return r;
}

RegressionFit fidelity_regression(std::span<const RegressionRow> rows) {
    const std::size_t n = rows.size();
    if (n <= 4) throw DataError("fidelity_regression: need more than 4 rows");
    Eigen::MatrixXd x(n, 4);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = rows[i];
        if ((r.ai_correct != 0 && r.ai_correct != 1) || (r.explanation != 0 && r.explanation != 1)) {
            throw DataError("fidelity_regression: indicators must be 0 or 1");
        }
        if (!std::isfinite(r.fidelity)) throw DataError("fidelity_regression: non-finite outcome");
        const auto k = static_cast<Eigen::Index>(i);
        x(k, 0) = 1.0;
        x(k, 1) = r.ai_correct;
        x(k, 2) = r.explanation;
        x(k, 3) = r.ai_correct * r.explanation;
        y(k) = r.fidelity;
    }

    // Unpivoted QR: a column whose R diagonal vanishes (relative to its norm)
    // is in the span of the columns before it.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(4).triangularView<Eigen::Upper>();
    std::string collinear;
    for (int j = 0; j < 4; ++j) {
        const double col_norm = x.col(j).norm();
        if (col_norm == 0.0 || std::abs(r(j, j)) <= 1e-10 * col_norm) {
            collinear += (collinear.empty() ? "" : ", ") + std::string(kRegressionColumns[j]);
        }
    }
    if (!collinear.empty()) {
        throw ComputeError("rank-deficient design: column(s) " + collinear +
                           " are zero or collinear with earlier columns");
    }

    RegressionFit fit;
    fit.n = n;
    const Eigen::Vector4d beta = qr.solve(y);
    const Eigen::VectorXd resid = y - x * beta;
    const double rss = resid.squaredNorm();
    const double ybar = y.mean();
    const double tss = (y.array() - ybar).square().sum();
    const double df = static_cast<double>(n - 4);
    fit.sigma2 = rss / df;
    fit.exact_fit = rss <= 1e-24 * std::max(1.0, y.squaredNorm());
    fit.r2 = tss > 0.0 ? std::clamp(1.0 - rss / tss, 0.0, 1.0) : (fit.exact_fit ? 1.0 : 0.0);
    fit.adj_r2 = 1.0 - (1.0 - fit.r2) * static_cast<double>(n - 1) / df;
    fit.residuals.assign(resid.data(), resid.data() + resid.size());

    // (X'X)^-1 = R^-1 R^-T.
    const Eigen::Matrix4d rinv = r.triangularView<Eigen::Upper>().solve(Eigen::Matrix4d::Identity());
    const Eigen::Matrix4d xtx_inv = rinv * rinv.transpose();
    for (int j = 0; j < 4; ++j) {
        fit.beta[j] = beta(j);
        if (fit.exact_fit) {
            fit.se[j] = 0.0;
            fit.t[j] = 0.0;
            fit.p[j] = 0.0;
            continue;
        }
        fit.se[j] = std::sqrt(fit.sigma2 * xtx_inv(j, j));
        fit.t[j] = fit.beta[j] / fit.se[j];
        fit.p[j] = std::clamp(student_t_two_sided_p(fit.t[j], df), 0.0, 1.0);
    }
    return fit;
}

std::vector<double> midranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

TestResult spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DataError("spearman: length mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw DataError("spearman: need at least 3 pairs");
    for (auto v : {x, y}) {
        if (std::all_of(v.begin(), v.end(), [&](double a) { return a == v[0]; })) {
            throw DataError("spearman: constant input");
        }
    }
    const auto rx = midranks(x);
    const auto ry = midranks(y);
    const double mean = 0.5 * static_cast<double>(n + 1);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = rx[i] - mean;
        const double dy = ry[i] - mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    TestResult r;
    r.statistic = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    r.df = static_cast<double>(n - 2);
    if (std::abs(r.statistic) == 1.0) {
        r.p = 0.0;
    } else {
        const double t = r.statistic * std::sqrt(r.df / (1.0 - r.statistic * r.statistic));
        r.p = std::clamp(student_t_two_sided_p(t, r.df), 0.0, 1.0);
    }
    return r;
}

std::string significance_stars(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

std::string format_p_value(double p) {
    if (p < 0.0001) return "< .0001";
    char buf[32];
    if (p < 0.001) {
        std::snprintf(buf, sizeof buf, "%.4f", p);
    } else {
        std::snprintf(buf, sizeof buf, "%.3f", p);
    }
    std::string s = buf;
    if (s.rfind("0.", 0) == 0) s.erase(0, 1);  // APA style: no leading zero
    return s;
}

}  // namespace xlab
