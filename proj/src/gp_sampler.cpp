#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "xlab/error.hpp"
#include "xlab/parallel.hpp"
#include "xlab/random.hpp"
#include "xlab/teaching.hpp"

namespace xlab {

double GpConfig::proportional_length_scale(std::size_t w, std::size_t h) {
    return 22.4 * std::sqrt(static_cast<double>(w) * static_cast<double>(h)) / 224.0;
}

GpConfig GpConfig::for_grid(std::size_t w, std::size_t h, std::uint64_t seed) {
    GpConfig c;
    c.grid_w = w;
    c.grid_h = h;
    c.length_scale = proportional_length_scale(w, h);
    c.seed = seed;
    return c;
}

void GpConfig::validate() const {
    if (grid_w == 0 || grid_h == 0) throw DataError("GP grid dimensions must be positive");
    if (!(length_scale > 0.0)) throw DataError("GP length_scale must be positive");
    if (!(marginal_std > 0.0)) throw DataError("GP marginal_std must be positive");
    if (!(jitter > 0.0)) throw DataError("GP jitter must be positive");
    if (n_samples < 1) throw DataError("GP n_samples must be at least 1");
    if (!std::isfinite(mean)) throw DataError("GP mean must be finite");
}

std::uint64_t GpConfig::hash() const {
    const std::string text = "gp:" + std::to_string(grid_w) + ":" + std::to_string(grid_h) + ":" + format_real(mean) +
                             ":" + format_real(marginal_std) + ":" + format_real(length_scale) + ":" +
                             std::to_string(n_samples) + ":" + format_real(jitter) + ":" + std::to_string(seed);
    return fnv1a64(text);
}

std::vector<double> rbf_cholesky_1d(std::size_t n, double length_scale, double jitter) {
    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Mat k(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double d = static_cast<double>(i) - static_cast<double>(j);
            k(i, j) = std::exp(-d * d / (2.0 * length_scale * length_scale));
        }
    }
    for (double j = jitter; j <= 1e-2 * (1.0 + 1e-9); j *= 10.0) {
        Mat kj = k;
        kj.diagonal().array() += j;
        Eigen::LLT<Mat> llt(kj);
        if (llt.info() == Eigen::Success) {
            Mat l = llt.matrixL();
            return {l.data(), l.data() + l.size()};
        }
    }
    throw ComputeError("GP Cholesky failed after jitter escalation to 1e-2");
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMat to_matrix(const std::vector<double>& v, std::size_t n) {
    return Eigen::Map<const RowMat>(v.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
}

}  // namespace

std::vector<FloatGrid> sample_fields(const GpConfig& config, unsigned threads) {
    config.validate();
    const std::size_t w = config.grid_w;
    const std::size_t h = config.grid_h;
    const RowMat lx = to_matrix(rbf_cholesky_1d(w, config.length_scale, config.jitter), w);
    const RowMat ly = to_matrix(rbf_cholesky_1d(h, config.length_scale, config.jitter), h);

    std::vector<FloatGrid> out(config.n_samples);
    parallel_for(config.n_samples, threads, [&](std::size_t i) {
        auto rng = make_engine(config.seed, stream::kGpMasks, i);
        std::normal_distribution<double> normal(0.0, 1.0);
        RowMat z(h, w);
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
            for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = normal(rng);
        }
        // Matrix-normal draw: cov(vec F) = sigma^2 (Kx kron Ky).
        const RowMat f = (ly * z * lx.transpose()).array() * config.marginal_std + config.mean;
        out[i] = FloatGrid(w, h, 1, std::vector<double>(f.data(), f.data() + f.size()));
    });
    return out;
}

double sigmoid(double a) noexcept {
    if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
    const double e = std::exp(a);
    return e / (1.0 + e);
}

std::vector<FloatGrid> sample_masks(const GpConfig& config, unsigned threads) {
    auto fields = sample_fields(config, threads);
    for (auto& f : fields) {
        for (double& v : f.values()) v = sigmoid(v);
    }
    return fields;
}

}  // namespace xlab
