#pragma once

namespace xlab {

// Rate (exponential) or shape (Beta) parameter of a generalization
// likelihood. Always strictly positive and finite.
class GeneralizationRate {
public:
    explicit GeneralizationRate(double lambda);
    double value() const noexcept { return lambda_; }

private:
    double lambda_;
};

inline constexpr double kBetaEndpointClamp = 1e-9;

// lambda * exp(-lambda * (1 - sim)), sim in [0, 1].
double exp_generalization(double sim, GeneralizationRate rate);
double log_exp_generalization(double sim, GeneralizationRate rate);

// lambda * exp(-lambda * dist): the L1 distance takes the place of 1 - sim.
double exp_generalization_l1(double dist, GeneralizationRate rate);
double log_exp_generalization_l1(double dist, GeneralizationRate rate);

// Beta(lambda, lambda) density at sim, evaluated in log space with sim
// clamped to [clamp, 1 - clamp].
double beta_generalization(double sim, GeneralizationRate rate, double clamp = kBetaEndpointClamp);
double log_beta_generalization(double sim, GeneralizationRate rate, double clamp = kBetaEndpointClamp);

// ln Gamma(x) for x > 0 (Lanczos, g = 7, n = 9), exact at x = 1 and x = 2.
double log_gamma(double x);

}  // namespace xlab
