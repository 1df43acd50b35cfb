#pragma once

#include "xlab/grid.hpp"

namespace xlab {

// Cosine ("Sloman") similarity in [0, 1]. zero_norm marks the degenerate
// case where one input had no mass and the score was defined as 0.
struct SimilarityScore {
    double value = 0.0;
    bool zero_norm = false;
};

struct L1Distance {
    double value = 0.0;
};

struct ScaledGrid {
    FloatGrid grid;
    bool constant = false;  // input had no spread; output is all zeros
};

// (v - min) / (max - min). A constant grid maps to all zeros and warns.
ScaledGrid minmax_scale(const FloatGrid& grid);

// v / sum(v). Requires nonnegative values with positive total; throws
// ComputeError("zero mass") otherwise.
FloatGrid sum_normalize(const FloatGrid& grid);

// Inputs must share a shape and be nonnegative.
SimilarityScore sloman_similarity(const FloatGrid& a, const FloatGrid& b);

// Sum of absolute pixel-wise differences.
L1Distance l1_dissimilarity(const FloatGrid& a, const FloatGrid& b);

}  // namespace xlab
