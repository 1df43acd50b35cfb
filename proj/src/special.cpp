#include "xlab/special.hpp"

#include <cmath>
#include <limits>

#include "xlab/error.hpp"
#include "xlab/generalization.hpp"

namespace xlab {
namespace {

constexpr int kMaxIter = 10000;
constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;

// Continued fraction for I_x(a, b) (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw ComputeError("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw DataError("incomplete beta requires a, b > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw DataError("incomplete beta requires x in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        log_gamma(a + b) - log_gamma(a) - log_gamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double regularized_gamma_p(double a, double x) {
    if (!(a > 0.0)) throw DataError("incomplete gamma requires a > 0");
    if (!(x >= 0.0)) throw DataError("incomplete gamma requires x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) {
        double ap = a;
        double sum = 1.0 / a;
        double del = sum;
        for (int n = 0; n < kMaxIter; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * kEps) {
                return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
            }
        }
        throw ComputeError("incomplete gamma series did not converge");
    }
    return 1.0 - regularized_gamma_q(a, x);
}

double regularized_gamma_q(double a, double x) {
    if (!(a > 0.0)) throw DataError("incomplete gamma requires a > 0");
    if (!(x >= 0.0)) throw DataError("incomplete gamma requires x >= 0");
    if (x < a + 1.0) return 1.0 - regularized_gamma_p(a, x);
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return std::exp(-x + a * std::log(x) - log_gamma(a)) * h;
    }
    throw ComputeError("incomplete gamma continued fraction did not converge");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double student_t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) throw DataError("student t requires df > 0");
    if (std::isnan(t)) throw DataError("student t statistic is NaN");
    if (std::isinf(t)) return 0.0;
    return regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

double student_t_cdf(double t, double df) {
    const double tail = 0.5 * student_t_two_sided_p(t, df);
    return t >= 0.0 ? 1.0 - tail : tail;
}

double chi_square_sf(double x, double df) {
    if (!(df > 0.0)) throw DataError("chi-square requires df > 0");
    if (!(x >= 0.0)) throw DataError("chi-square statistic must be nonnegative");
    if (df == 1.0) return std::erfc(std::sqrt(0.5 * x));
    return regularized_gamma_q(0.5 * df, 0.5 * x);
}

}  // namespace xlab
