#include "xlab/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "xlab/diag.hpp"
#include "xlab/error.hpp"

namespace xlab {

ScaledGrid minmax_scale(const FloatGrid& grid) {
    const auto values = grid.values();
    if (values.empty()) throw DataError("minmax_scale: empty grid");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double hi = *hi_it;

    ScaledGrid out{FloatGrid(grid.width(), grid.height(), grid.channels()), false};
    if (!(hi > lo)) {
        out.constant = true;
        diag::warn("minmax_scale: constant grid scaled to zeros");
        return out;
    }
    const double range = hi - lo;
    auto dst = out.grid.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        dst[i] = values[i] == hi ? 1.0 : (values[i] - lo) / range;
    }
    return out;
}

FloatGrid sum_normalize(const FloatGrid& grid) {
    double total = 0.0;
    for (double v : grid.values()) {
        if (v < 0.0) throw ComputeError("sum_normalize: negative value");
        total += v;
    }
    if (!(total > 0.0)) throw ComputeError("sum_normalize: zero mass");
    FloatGrid out = grid;
    for (double& v : out.values()) v /= total;
    return out;
}

SimilarityScore sloman_similarity(const FloatGrid& a, const FloatGrid& b) {
    if (!a.same_shape(b)) {
        throw DataError("sloman_similarity: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
    }
    const auto va = a.values();
    const auto vb = b.values();
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) {
        if (va[i] < 0.0 || vb[i] < 0.0) throw DataError("sloman_similarity: negative input value");
        dot += va[i] * vb[i];
        na += va[i] * va[i];
        nb += vb[i] * vb[i];
    }
    if (na == 0.0 || nb == 0.0) {
        diag::warn("sloman_similarity: zero-norm input, similarity set to 0");
        return {0.0, true};
    }
    // sqrt(na * nb) rather than sqrt(na) * sqrt(nb): identical inputs give exactly 1.
    const double s = dot / std::sqrt(na * nb);
    return {std::clamp(s, 0.0, 1.0), false};
}

L1Distance l1_dissimilarity(const FloatGrid& a, const FloatGrid& b) {
    if (!a.same_shape(b)) {
        throw DataError("l1_dissimilarity: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
    }
    const auto va = a.values();
    const auto vb = b.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) sum += std::abs(va[i] - vb[i]);
    return {sum};
}

}  // namespace xlab
