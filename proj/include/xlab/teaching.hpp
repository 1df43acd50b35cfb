#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "xlab/grid.hpp"

namespace xlab {

// Squashed Gaussian-process prior over masks. The field has a constant mean
// and a separable RBF kernel sigma^2 exp(-(dx^2 + dy^2) / (2 l^2)).
struct GpConfig {
    std::size_t grid_w = 32;
    std::size_t grid_h = 32;
    double mean = -100.0;
    double marginal_std = 100.0;
    double length_scale = 3.2;
    std::size_t n_samples = 1000;
    double jitter = 1e-6;
    std::uint64_t seed = 0;

    // Length scale keeping the smoothness ratio of 22.4 px on a 224 px grid.
    static double proportional_length_scale(std::size_t w, std::size_t h);
    static GpConfig for_grid(std::size_t w, std::size_t h, std::uint64_t seed = 0);

    void validate() const;
    // Stable 64-bit digest of every field, used in output sidecars.
    std::uint64_t hash() const;
};

// Lower Cholesky factor of the 1-D RBF correlation matrix on n points,
// escalating jitter x10 up to 1e-2. Row-major n x n. Throws ComputeError.
std::vector<double> rbf_cholesky_1d(std::size_t n, double length_scale, double jitter);

// Pre-squash GP fields. Sample i depends only on (seed, i).
std::vector<FloatGrid> sample_fields(const GpConfig& config, unsigned threads = 1);

// Sigmoid-squashed fields: values in [0, 1].
std::vector<FloatGrid> sample_masks(const GpConfig& config, unsigned threads = 1);

double sigmoid(double a) noexcept;

// Element-wise product, mask broadcast across image channels.
FloatGrid apply_mask(const FloatGrid& image, const FloatGrid& mask);

// Black-box learner answering P(class | image) over a class list.
class Classifier {
public:
    virtual ~Classifier() = default;
    // Probabilities over `classes` (same order), nonnegative, summing to 1.
    virtual std::vector<double> classify(const FloatGrid& image, std::span<const std::string> classes) = 0;
    // Every class the classifier can score.
    virtual std::vector<std::string> classes() const = 0;
};

// Softmax over <image, template_c> / temperature.
class TemplateClassifier final : public Classifier {
public:
    TemplateClassifier(std::map<std::string, FloatGrid> templates, double temperature);

    std::vector<double> classify(const FloatGrid& image, std::span<const std::string> classes) override;
    std::vector<std::string> classes() const override;

private:
    std::map<std::string, FloatGrid> templates_;
    double temperature_;
};

// Child process speaking newline-delimited JSON over stdin/stdout:
//   -> {"hello":"xlab-classifier","version":1}
//   <- {"ok":true,"classes":[...]}
//   -> {"id":n,"classes":[...],"grid":{"w":..,"h":..,"c":..,"values":[...]}}
//   <- {"id":n,"probs":[...]}
// Requests are serialized per process.
class ExternalClassifier final : public Classifier {
public:
    ExternalClassifier(const std::string& command, std::chrono::milliseconds timeout = std::chrono::seconds(30));
    ~ExternalClassifier() override;
    ExternalClassifier(const ExternalClassifier&) = delete;
    ExternalClassifier& operator=(const ExternalClassifier&) = delete;

    std::vector<double> classify(const FloatGrid& image, std::span<const std::string> classes) override;
    std::vector<std::string> classes() const override { return classes_; }

private:
    void send_line(const std::string& line);
    std::string read_line();
    [[noreturn]] void fail(const std::string& why);

    std::string command_;
    std::chrono::milliseconds timeout_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
    std::vector<std::string> transcript_;
    std::vector<std::string> classes_;
    std::uint64_t next_id_ = 0;
    std::mutex mutex_;
};

struct ClassifierSpec {
    enum class Kind { builtin_template, external };
    Kind kind = Kind::builtin_template;
    std::map<std::string, FloatGrid> templates;
    double temperature = 1.0;
    std::string command;
    std::chrono::milliseconds timeout{30000};
};

std::unique_ptr<Classifier> make_classifier(const ClassifierSpec& spec);

// One-shot convenience over make_classifier.
std::vector<double> classify(const ClassifierSpec& spec, const FloatGrid& image,
                             std::span<const std::string> classes);

// Monte Carlo expected mask sum_i m_i Q_i / sum_i Q_i with
// Q_i = P(target_class | image * m_i). Weights are accumulated in sample
// order, so the result is independent of `threads`.
FloatGrid expected_mask(const FloatGrid& image, const std::string& target_class, std::span<const FloatGrid> masks,
                        Classifier& classifier, unsigned threads = 1);

// Teaching weights Q_i alone (same contract as expected_mask).
std::vector<double> teaching_weights(const FloatGrid& image, const std::string& target_class,
                                     std::span<const FloatGrid> masks, Classifier& classifier, unsigned threads = 1);

// FNV-1a, used for config digests.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace xlab
