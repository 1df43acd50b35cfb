#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xlab/explainee.hpp"

namespace xlab {

struct FitOptions {
    double lambda_min = 1e-3;
    double lambda_max = 1e3;
    std::size_t coarse_points = 61;
    // Relative tolerance on lambda (golden-section stops when the bracket is
    // this narrow in log space).
    double rel_tol = 1e-6;
    // Points of the post-hoc optimality audit.
    std::size_t audit_points = 1000;
    double beta_clamp = kBetaEndpointClamp;

    void validate() const;
};

struct FitResult {
    Variant variant = Variant::full;
    double lambda_hat = 1.0;
    double sse = 0.0;
    bool at_boundary = false;
    // SSE is constant over the whole range; lambda_hat is then 1.
    bool flat = false;
    // The audit grid found a better point and refinement was restarted there.
    bool audit_adjusted = false;
};

struct LoocvResult {
    Variant variant = Variant::full;
    std::vector<double> errors;
    std::vector<double> fold_lambdas;  // empty for prior_only
    double mse = 0.0;
};

// Sum over trials of (posterior - empirical)^2.
double sum_squared_error(std::span<const TrialEvidence> evidence, std::span<const double> empirical,
                         const ModelSpec& model);

// argmin over [lambda_min, lambda_max] of the SSE: log-spaced coarse scan,
// golden-section refinement around the best scan point, then an audit on a
// finer log grid. Throws DataError for prior_only ("no free parameter").
FitResult fit_lambda(std::span<const TrialEvidence> evidence, std::span<const double> empirical, Variant variant,
                     const FitOptions& options = {});

// Leave-one-out: fit on n-1 trials, score the held-out trial. prior_only is
// scored directly. Folds run in parallel and are assembled in trial order.
LoocvResult loocv(std::span<const TrialEvidence> evidence, std::span<const double> empirical, Variant variant,
                  const FitOptions& options = {}, unsigned threads = 1);

struct PairedTest {
    double mean_diff = 0.0;
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

// Paired t-test on d = a - b. Throws ComputeError("degenerate paired test")
// when the differences have zero variance.
PairedTest paired_ttest(std::span<const double> a, std::span<const double> b);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Percentile bootstrap of the mean; percentiles in [0, 100].
Interval bootstrap_ci(std::span<const double> diffs, std::size_t n_boot, std::uint64_t seed,
                      double lower_pct = 2.5, double upper_pct = 97.5);

std::string fit_result_json(const FitResult& fit);
std::string loocv_result_json(const LoocvResult& result);

}  // namespace xlab
