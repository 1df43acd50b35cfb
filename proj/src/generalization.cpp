#include "xlab/generalization.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "xlab/error.hpp"

namespace xlab {

GeneralizationRate::GeneralizationRate(double lambda) : lambda_(lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw DataError("generalization rate must be positive and finite, got " + std::to_string(lambda));
    }
}

namespace {

void check_sim(double sim) {
    if (!(sim >= 0.0 && sim <= 1.0)) throw DataError("similarity outside [0,1]: " + std::to_string(sim));
}

}  // namespace

double log_exp_generalization(double sim, GeneralizationRate rate) {
    check_sim(sim);
    const double lambda = rate.value();
    return std::log(lambda) - lambda * (1.0 - sim);
}

double exp_generalization(double sim, GeneralizationRate rate) {
    check_sim(sim);
    const double lambda = rate.value();
    return lambda * std::exp(-lambda * (1.0 - sim));
}

double log_exp_generalization_l1(double dist, GeneralizationRate rate) {
    if (!(dist >= 0.0)) throw DataError("L1 distance must be nonnegative");
    const double lambda = rate.value();
    return std::log(lambda) - lambda * dist;
}

double exp_generalization_l1(double dist, GeneralizationRate rate) {
    if (!(dist >= 0.0)) throw DataError("L1 distance must be nonnegative");
    const double lambda = rate.value();
    return lambda * std::exp(-lambda * dist);
}

double log_beta_generalization(double sim, GeneralizationRate rate, double clamp) {
    check_sim(sim);
    if (!(clamp >= 0.0 && clamp < 0.5)) throw DataError("beta endpoint clamp must lie in [0, 0.5)");
    const double a = rate.value();
    const double s = std::clamp(sim, clamp, 1.0 - clamp);
    const double log_norm = log_gamma(2.0 * a) - 2.0 * log_gamma(a);
    if (a == 1.0) return log_norm;  // (a - 1) * log(0) would be 0 * -inf
    return log_norm + (a - 1.0) * (std::log(s) + std::log1p(-s));
}

double beta_generalization(double sim, GeneralizationRate rate, double clamp) {
    return std::exp(log_beta_generalization(sim, rate, clamp));
}

double log_gamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DataError("log_gamma requires x > 0");
    if (x == 1.0 || x == 2.0) return 0.0;
    if (x < 0.5) {
        // Reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x).
        return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) - log_gamma(1.0 - x);
    }
    if (x >= 10.0) {
        // Stirling series; truncation error below 1e-13 for x >= 10.
        const double inv = 1.0 / x;
        const double inv2 = inv * inv;
        const double series =
            inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
        return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) + series;
    }
    static constexpr std::array<double, 9> kCoef = {
        0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
        771.32342877765313,   -176.61502916214059,   12.507343278686905,
        -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7,
    };
    constexpr double kG = 7.0;
    const double z = x - 1.0;
    double sum = kCoef[0];
    for (std::size_t i = 1; i < kCoef.size(); ++i) sum += kCoef[i] / (z + static_cast<double>(i));
    const double t = z + kG + 0.5;
    return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(sum);
}

}  // namespace xlab
