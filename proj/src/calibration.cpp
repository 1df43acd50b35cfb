#include "xlab/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <random>

#include "xlab/error.hpp"
#include "xlab/parallel.hpp"
#include "xlab/random.hpp"
#include "xlab/special.hpp"

namespace xlab {

void FitOptions::validate() const {
    if (!(lambda_min > 0.0) || !(lambda_max > lambda_min)) throw DataError("invalid lambda range");
    if (coarse_points < 3) throw DataError("coarse scan needs at least 3 points");
    if (!(rel_tol > 0.0)) throw DataError("rel_tol must be positive");
}

double sum_squared_error(std::span<const TrialEvidence> evidence, std::span<const double> empirical,
                         const ModelSpec& model) {
    if (evidence.size() != empirical.size()) throw DataError("evidence / empirical size mismatch");
    double sse = 0.0;
    for (std::size_t i = 0; i < evidence.size(); ++i) {
        const double e = posterior(evidence[i], model) - empirical[i];
        sse += e * e;
    }
    return sse;
}

namespace {

struct Probe {
    double log_lambda;
    double sse;
};

class Objective {
public:
    Objective(std::span<const TrialEvidence> evidence, std::span<const double> empirical, const FitOptions& options,
              Variant variant)
        : evidence_(evidence), empirical_(empirical), model_(variant, GeneralizationRate(1.0), options.beta_clamp) {}

    Probe at(double log_lambda) const {
        return {log_lambda,
                sum_squared_error(evidence_, empirical_, model_.with_rate(std::exp(log_lambda)))};
    }

private:
    std::span<const TrialEvidence> evidence_;
    std::span<const double> empirical_;
    ModelSpec model_;
};

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = i + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return g;
}

// Golden-section search for the minimum on [a, b] (log-lambda units).
Probe golden_section(const Objective& f, double a, double b, double tol, Probe best) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    Probe fc = f.at(c);
    Probe fd = f.at(d);
    auto keep = [&](const Probe& p) {
        if (p.sse < best.sse) best = p;
    };
    keep(fc);
    keep(fd);
    while (b - a > tol) {
        if (fc.sse <= fd.sse) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f.at(c);
            keep(fc);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f.at(d);
            keep(fd);
        }
    }
    keep(f.at(0.5 * (a + b)));
    return best;
}

Probe refine_around(const Objective& f, const std::vector<double>& grid, std::size_t i, double tol, Probe best) {
    const double a = grid[i == 0 ? 0 : i - 1];
    const double b = grid[std::min(i + 1, grid.size() - 1)];
    return golden_section(f, a, b, tol, best);
}

}  // namespace

FitResult fit_lambda(std::span<const TrialEvidence> evidence, std::span<const double> empirical, Variant variant,
                     const FitOptions& options) {
    if (variant == Variant::prior_only) throw DataError("no free parameter");
    if (evidence.empty()) throw DataError("fit_lambda: no trials");
    options.validate();
    const Objective f(evidence, empirical, options, variant);
    const double lo = std::log(options.lambda_min);
    const double hi = std::log(options.lambda_max);
    const double tol = options.rel_tol;

    const auto coarse = log_grid(lo, hi, options.coarse_points);
    std::vector<Probe> scan;
    scan.reserve(coarse.size());
    for (double x : coarse) scan.push_back(f.at(x));
    const auto best_it = std::min_element(scan.begin(), scan.end(),
                                          [](const Probe& a, const Probe& b) { return a.sse < b.sse; });
    const auto worst_it = std::max_element(scan.begin(), scan.end(),
                                           [](const Probe& a, const Probe& b) { return a.sse < b.sse; });

    FitResult result;
    result.variant = variant;
    if (worst_it->sse - best_it->sse <= 1e-14 * std::max(1.0, best_it->sse)) {
        result.flat = true;
        result.lambda_hat = 1.0;
        result.sse = f.at(0.0).sse;
        return result;
    }

    Probe best = refine_around(f, coarse, static_cast<std::size_t>(best_it - scan.begin()), tol, *best_it);

    // Audit: no point of a finer grid may beat the refined optimum.
    const auto audit = log_grid(lo, hi, options.audit_points);
    for (int round = 0; round < 4; ++round) {
        std::size_t better = audit.size();
        double better_sse = best.sse;
        for (std::size_t i = 0; i < audit.size(); ++i) {
            const Probe p = f.at(audit[i]);
            if (p.sse < better_sse - 1e-12 * std::max(1.0, best.sse)) {
                better = i;
                better_sse = p.sse;
            }
        }
        if (better == audit.size()) break;
        result.audit_adjusted = true;
        best = refine_around(f, audit, better, tol, f.at(audit[better]));
    }

    result.lambda_hat = std::exp(best.log_lambda);
    result.sse = best.sse;
    result.at_boundary = best.log_lambda - lo <= tol || hi - best.log_lambda <= tol;
    return result;
}

LoocvResult loocv(std::span<const TrialEvidence> evidence, std::span<const double> empirical, Variant variant,
                  const FitOptions& options, unsigned threads) {
    if (evidence.size() != empirical.size()) throw DataError("evidence / empirical size mismatch");
    if (evidence.size() < 2) throw DataError("loocv needs at least 2 trials");
    const std::size_t n = evidence.size();
    LoocvResult result;
    result.variant = variant;
    result.errors.assign(n, 0.0);

    if (variant == Variant::prior_only) {
        for (std::size_t i = 0; i < n; ++i) {
            const double e = evidence[i].prior_truth - empirical[i];
            result.errors[i] = e * e;
        }
    } else {
        result.fold_lambdas.assign(n, 0.0);
        parallel_for(n, threads, [&](std::size_t i) {
            std::vector<TrialEvidence> train_ev;
            std::vector<double> train_emp;
            train_ev.reserve(n - 1);
            train_emp.reserve(n - 1);
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                train_ev.push_back(evidence[j]);
                train_emp.push_back(empirical[j]);
            }
            const FitResult fit = fit_lambda(train_ev, train_emp, variant, options);
            const double e =
                posterior(evidence[i], ModelSpec(variant, GeneralizationRate(fit.lambda_hat), options.beta_clamp)) -
                empirical[i];
            result.errors[i] = e * e;
            result.fold_lambdas[i] = fit.lambda_hat;
        });
    }
    double sum = 0.0;
    for (double e : result.errors) sum += e;
    result.mse = sum / static_cast<double>(n);
    return result;
}

PairedTest paired_ttest(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("paired_ttest: length mismatch");
    const std::size_t n = a.size();
    if (n < 2) throw DataError("paired_ttest: need at least 2 pairs");
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = (a[i] - b[i]) - mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(n - 1);
    if (!(var > 0.0)) throw ComputeError("degenerate paired test: differences have zero variance");
    PairedTest out;
    out.mean_diff = mean;
    out.df = static_cast<double>(n - 1);
    out.t = mean / std::sqrt(var / static_cast<double>(n));
    out.p = std::clamp(student_t_two_sided_p(out.t, out.df), 0.0, 1.0);
    return out;
}

namespace {

double percentile_sorted(const std::vector<double>& sorted, double pct) {
    const double pos = pct / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

Interval bootstrap_ci(std::span<const double> diffs, std::size_t n_boot, std::uint64_t seed, double lower_pct,
                      double upper_pct) {
    if (diffs.empty()) throw DataError("bootstrap_ci: no values");
    if (n_boot < 1) throw DataError("bootstrap_ci: n_boot must be positive");
    if (!(0.0 <= lower_pct && lower_pct <= upper_pct && upper_pct <= 100.0)) {
        throw DataError("bootstrap_ci: invalid percentiles");
    }
    auto rng = make_engine(seed, stream::kBootstrap);
    std::uniform_int_distribution<std::size_t> pick(0, diffs.size() - 1);
    std::vector<double> means(n_boot);
    for (auto& m : means) {
        double s = 0.0;
        for (std::size_t k = 0; k < diffs.size(); ++k) s += diffs[pick(rng)];
        m = s / static_cast<double>(diffs.size());
    }
    std::sort(means.begin(), means.end());
    return {percentile_sorted(means, lower_pct), percentile_sorted(means, upper_pct)};
}

std::string fit_result_json(const FitResult& fit) {
    nlohmann::ordered_json j;
    j["variant"] = std::string(to_string(fit.variant));
    j["lambda_hat"] = fit.lambda_hat;
    j["sse"] = fit.sse;
    j["at_boundary"] = fit.at_boundary;
    j["flat"] = fit.flat;
    return j.dump(2) + "\n";
}

std::string loocv_result_json(const LoocvResult& result) {
    nlohmann::ordered_json j;
    j["variant"] = std::string(to_string(result.variant));
    j["mse"] = result.mse;
    j["errors"] = result.errors;
    return j.dump(2) + "\n";
}

}  // namespace xlab
