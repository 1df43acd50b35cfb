#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace xlab {

struct TestResult {
    double statistic = 0.0;
    double df = 0.0;
    double p = 1.0;
};

// Chi-square goodness of fit of a binary outcome against success rate p0 (df = 1).
TestResult chi_square_gof(std::size_t successes, std::size_t n, double p0);

// One image in one condition: fidelity ~ b0 + b1 A + b2 E + b3 A*E.
struct RegressionRow {
    double fidelity = 0.0;
    int ai_correct = 0;
    int explanation = 0;
};

struct RegressionFit {
    std::array<double, 4> beta{};
    std::array<double, 4> se{};
    std::array<double, 4> t{};
    std::array<double, 4> p{};
    double sigma2 = 0.0;
    double r2 = 0.0;
    double adj_r2 = 0.0;
    std::size_t n = 0;
    // RSS is zero: SE and p are reported as 0.
    bool exact_fit = false;
    std::vector<double> residuals;
};

inline constexpr std::array<const char*, 4> kRegressionLabels = {
    "Intercept", "AICorrect", "ExplanationCondition", "AICorrect x ExplanationCondition"};
inline constexpr std::array<const char*, 4> kRegressionColumns = {"intercept", "A", "E", "AxE"};

// OLS through Householder QR. Throws ComputeError naming the collinear
// design columns when the design is rank deficient, DataError when n <= 4
// or an indicator is not 0/1.
RegressionFit fidelity_regression(std::span<const RegressionRow> rows);

// Average ranks (1-based), ties share their mean rank.
std::vector<double> midranks(std::span<const double> values);

// Spearman rank correlation; p from t = rho sqrt((n-2)/(1-rho^2)), df = n-2.
TestResult spearman(std::span<const double> x, std::span<const double> y);

// "***" for p < .001, "**" for p < .01, "*" for p < .05.
std::string significance_stars(double p);

// "< .0001", ".006", ...
std::string format_p_value(double p);

}  // namespace xlab
