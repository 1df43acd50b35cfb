#include <algorithm>

#include "xlab/error.hpp"
#include "xlab/parallel.hpp"
#include "xlab/teaching.hpp"

namespace xlab {

FloatGrid apply_mask(const FloatGrid& image, const FloatGrid& mask) {
    if (mask.channels() != 1 || !image.same_spatial(mask)) {
        throw DataError("apply_mask: mask " + mask.shape_string() + " does not match image " + image.shape_string());
    }
    FloatGrid out = image;
    auto dst = out.values();
    const auto m = mask.values();
    const std::size_t plane = image.pixels();
    for (std::size_t c = 0; c < image.channels(); ++c) {
        for (std::size_t i = 0; i < plane; ++i) dst[c * plane + i] *= m[i];
    }
    return out;
}

std::vector<double> teaching_weights(const FloatGrid& image, const std::string& target_class,
                                     std::span<const FloatGrid> masks, Classifier& classifier, unsigned threads) {
    if (masks.empty()) throw DataError("expected_mask: no mask samples");
    const auto classes = classifier.classes();
    const auto pos = std::find(classes.begin(), classes.end(), target_class);
    if (pos == classes.end()) throw DataError("classifier does not know class '" + target_class + "'");
    const auto target_index = static_cast<std::size_t>(pos - classes.begin());

    std::vector<double> weights(masks.size());
    parallel_for(masks.size(), threads, [&](std::size_t i) {
        weights[i] = classifier.classify(apply_mask(image, masks[i]), classes)[target_index];
    });
    return weights;
}

FloatGrid expected_mask(const FloatGrid& image, const std::string& target_class, std::span<const FloatGrid> masks,
                        Classifier& classifier, unsigned threads) {
    const auto weights = teaching_weights(image, target_class, masks, classifier, threads);
    double total = 0.0;
    for (double q : weights) total += q;
    if (!(total >= 1e-300)) throw ComputeError("degenerate teaching weights");

    FloatGrid out(masks[0].width(), masks[0].height(), 1);
    auto acc = out.values();
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const auto m = masks[i].values();
        for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += m[p] * weights[i];
    }
    for (double& v : acc) v = std::clamp(v / total, 0.0, 1.0);
    return out;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace xlab
