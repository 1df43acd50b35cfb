#pragma once

// Special functions backing the hypothesis tests. Accuracy target is 1e-8
// absolute on probabilities; the implementations follow the usual
// series / Lentz continued-fraction split.

namespace xlab {

// I_x(a, b), a, b > 0, x in [0, 1].
double regularized_incomplete_beta(double a, double b, double x);

// P(a, x) and Q(a, x) = 1 - P(a, x), a > 0, x >= 0.
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

double normal_cdf(double x);

double student_t_cdf(double t, double df);
// P(|T| >= |t|).
double student_t_two_sided_p(double t, double df);

// Upper tail P(X >= x) of a chi-square with df degrees of freedom. df = 1
// goes through erfc directly.
double chi_square_sf(double x, double df);

}  // namespace xlab
