#pragma once

// Reference evaluations written independently of the library: direct
// formulas in long double, no log-space tricks, no shared helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "xlab/grid.hpp"

namespace oracle {

using Real = long double;

struct Gen {
    std::mt19937_64 rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
    bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

    // Nonnegative grid; some pixels are exactly zero to mimic sparse masks.
    xlab::FloatGrid grid(std::size_t w, std::size_t h, double zero_fraction = 0.2) {
        xlab::FloatGrid g(w, h, 1);
        for (double& v : g.values()) v = coin(zero_fraction) ? 0.0 : uniform(0.0, 1.0);
        return g;
    }
};

inline std::vector<Real> to_real(const xlab::FloatGrid& g) {
    return std::vector<Real>(g.values().begin(), g.values().end());
}

inline std::vector<Real> minmax(std::vector<Real> v) {
    const Real lo = *std::min_element(v.begin(), v.end());
    const Real hi = *std::max_element(v.begin(), v.end());
    for (Real& x : v) x = hi > lo ? (x - lo) / (hi - lo) : 0.0L;
    return v;
}

inline Real cosine(const std::vector<Real>& a, const std::vector<Real>& b) {
    Real ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0 || bb == 0) return 0;
    return std::min<Real>(1, ab / (std::sqrt(aa) * std::sqrt(bb)));
}

inline std::vector<Real> to_unit_mass(std::vector<Real> v) {
    Real s = 0;
    for (Real x : v) s += x;
    for (Real& x : v) x = s > 0 ? x / s : 1.0L / static_cast<Real>(v.size());
    return v;
}

inline Real l1(const std::vector<Real>& a, const std::vector<Real>& b) {
    Real s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
    return s;
}

// Bayes rule on plain likelihood values.
inline Real bayes(Real lik_t, Real lik_f, Real prior) {
    const Real wt = lik_t * prior;
    const Real wf = lik_f * (1 - prior);
    if (wt + wf == 0) return prior;
    return wt / (wt + wf);
}

inline Real exp_lik(Real sim, Real lambda) { return lambda * std::exp(-lambda * (1 - sim)); }
inline Real l1_lik(Real dist, Real lambda) { return lambda * std::exp(-lambda * dist); }
inline Real beta_lik(Real sim, Real lambda) {
    const Real s = std::clamp<Real>(sim, 1e-9L, 1 - 1e-9L);
    const Real norm = std::exp(std::lgamma(2 * lambda) - 2 * std::lgamma(lambda));
    return norm * std::pow(s, lambda - 1) * std::pow(1 - s, lambda - 1);
}

struct Evidence {
    Real prior = 0.5;
    Real sim_t = 0, sim_f = 0, l1_t = 0, l1_f = 0;
};

inline Evidence evidence(Real prior, const xlab::FloatGrid& observed, const xlab::FloatGrid& cons_t,
                         const xlab::FloatGrid& cons_f) {
    Evidence e;
    e.prior = prior;
    const auto o = minmax(to_real(observed));
    e.sim_t = cosine(o, minmax(to_real(cons_t)));
    e.sim_f = cosine(o, minmax(to_real(cons_f)));
    const auto on = to_unit_mass(to_real(observed));
    e.l1_t = l1(on, to_unit_mass(to_real(cons_t)));
    e.l1_f = l1(on, to_unit_mass(to_real(cons_f)));
    return e;
}

enum class Kind { full, prior_only, l1, beta };

inline Real posterior(const Evidence& e, Kind kind, Real lambda) {
    switch (kind) {
        case Kind::full: return bayes(exp_lik(e.sim_t, lambda), exp_lik(e.sim_f, lambda), e.prior);
        case Kind::l1: return bayes(l1_lik(e.l1_t, lambda), l1_lik(e.l1_f, lambda), e.prior);
        case Kind::beta: return bayes(beta_lik(e.sim_t, lambda), beta_lik(e.sim_f, lambda), e.prior);
        case Kind::prior_only: return e.prior;
    }
    return e.prior;
}

inline Real sse(const std::vector<Evidence>& ev, const std::vector<Real>& empirical, Kind kind, Real lambda) {
    Real s = 0;
    for (std::size_t i = 0; i < ev.size(); ++i) {
        const Real d = posterior(ev[i], kind, lambda) - empirical[i];
        s += d * d;
    }
    return s;
}

// Exhaustive grid search in log lambda: n points over [lo, hi], then each
// further level puts n points across the two cells around the best one.
inline Real grid_fit(const std::vector<Evidence>& ev, const std::vector<Real>& empirical, Kind kind, Real lo,
                     Real hi, std::size_t n = 10000, int levels = 2) {
    auto search = [&](Real a, Real b) {
        Real best_x = a, best = INFINITY;
        for (std::size_t k = 0; k < n; ++k) {
            const Real x = a + (b - a) * static_cast<Real>(k) / static_cast<Real>(n - 1);
            const Real f = sse(ev, empirical, kind, std::exp(x));
            if (f < best) {
                best = f;
                best_x = x;
            }
        }
        return best_x;
    };
    const Real la = std::log(lo), lb = std::log(hi);
    Real a = la, b = lb;
    Real x = search(a, b);
    for (int level = 1; level < levels; ++level) {
        const Real step = (b - a) / static_cast<Real>(n - 1);
        a = std::max(la, x - step);
        b = std::min(lb, x + step);
        x = search(a, b);
    }
    return std::exp(x);
}

// Held-out squared errors of leave-one-out refits found by grid_fit.
inline std::vector<Real> loo_errors(const std::vector<Evidence>& ev, const std::vector<Real>& empirical, Kind kind,
                                    Real lo, Real hi, std::size_t n = 10000, int levels = 2) {
    std::vector<Real> out;
    for (std::size_t i = 0; i < ev.size(); ++i) {
        std::vector<Evidence> train_ev;
        std::vector<Real> train_emp;
        for (std::size_t j = 0; j < ev.size(); ++j) {
            if (j == i) continue;
            train_ev.push_back(ev[j]);
            train_emp.push_back(empirical[j]);
        }
        const Real l = grid_fit(train_ev, train_emp, kind, lo, hi, n, levels);
        const Real d = posterior(ev[i], kind, l) - empirical[i];
        out.push_back(d * d);
    }
    return out;
}

}  // namespace oracle
