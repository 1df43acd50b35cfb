#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xlab/corpus.hpp"
#include "xlab/generalization.hpp"
#include "xlab/similarity.hpp"

namespace xlab {

enum class Variant { full, prior_only, l1, beta };

std::string_view to_string(Variant v) noexcept;
Variant parse_variant(std::string_view text);

inline constexpr Variant kAllVariants[] = {Variant::full, Variant::prior_only, Variant::l1, Variant::beta};

class ModelSpec {
public:
    // Throws DataError when a parametric variant has no rate.
    ModelSpec(Variant variant, std::optional<GeneralizationRate> rate, double beta_clamp = kBetaEndpointClamp);

    static ModelSpec prior_only() { return ModelSpec(Variant::prior_only, std::nullopt); }

    Variant variant() const noexcept { return variant_; }
    // Only meaningful for parametric variants.
    GeneralizationRate rate() const;
    bool has_rate() const noexcept { return rate_.has_value(); }

    double beta_clamp() const noexcept { return beta_clamp_; }

    ModelSpec with_rate(double lambda) const { return ModelSpec(variant_, GeneralizationRate(lambda), beta_clamp_); }

private:
    Variant variant_;
    std::optional<GeneralizationRate> rate_;
    double beta_clamp_;
};

// Comparison statistics for one trial: prior and both classes' similarity /
// distance between the observed map and the projected (consensus) map.
struct TrialEvidence {
    double prior_truth = 0.5;
    SimilarityScore sim_truth;
    SimilarityScore sim_foil;
    L1Distance l1_truth;
    L1Distance l1_foil;
};

struct PosteriorRecord {
    std::string trial_id;
    double posterior_truth = 0.0;
    double fidelity = 0.0;
};

// Log likelihood of the observed explanation under the given class for a
// parametric variant.
double class_log_likelihood(const TrialEvidence& evidence, Choice cls, const ModelSpec& model);

// Two-class Bayes rule from log likelihoods. Equal likelihoods return the
// prior unchanged; non-finite combinations fall back to the prior with a
// warning.
double posterior_from_log_likelihoods(double log_lik_truth, double log_lik_foil, double prior_truth);

// Same rule on raw likelihood values; both weighted terms zero returns the
// prior with a warning.
double posterior_from_likelihoods(double lik_truth, double lik_foil, double prior_truth);

// Bayes rule over any number of classes; returns normalized posteriors.
std::vector<double> posterior_multiclass(std::span<const double> log_likelihoods, std::span<const double> priors);

// P(truth | e, x) for the model variant.
double posterior(const TrialEvidence& evidence, const ModelSpec& model);

// Probability that the predicted class matches the AI's classification.
double fidelity(double posterior_truth, Choice ai_class);

// Pairs of projected maps keyed by (trial_id, class).
using ConsensusMap = std::map<std::pair<std::string, Choice>, FloatGrid>;

// Computes the evidence for one trial, applying min-max scaling for the
// similarity inputs and sum-to-one scaling for the L1 inputs.
TrialEvidence compute_evidence(double prior_truth, const FloatGrid& observed, const FloatGrid& consensus_truth,
                               const FloatGrid& consensus_foil);

struct PredictionInputs {
    std::vector<TrialSpec> trials;                // manifest order
    std::map<std::string, double> priors;         // trial_id -> P(truth | x)
    ConsensusMap consensus;                       // (trial_id, class) -> raw consensus mask
    std::map<std::string, FloatGrid> observed;    // trial_id -> observed saliency map
};

// Evidence for every trial in manifest order. Throws DataError listing all
// trials with a missing prior, consensus mask or observed map.
std::vector<TrialEvidence> build_evidence(const PredictionInputs& inputs, unsigned threads = 1);

std::vector<PosteriorRecord> predict_corpus(const PredictionInputs& inputs, const ModelSpec& model,
                                            unsigned threads = 1);

// Posterior records from precomputed evidence (same order as trials).
std::vector<PosteriorRecord> predict_from_evidence(const std::vector<TrialSpec>& trials,
                                                   const std::vector<TrialEvidence>& evidence, const ModelSpec& model);

// n Bernoulli(p) draws, deterministic per seed.
std::vector<Choice> sample_responses(double posterior_truth, std::size_t n_participants, std::uint64_t seed);

// CSV: trial_id,posterior_truth,fidelity,variant,lambda
std::string posterior_records_csv(const std::vector<PosteriorRecord>& records, const ModelSpec& model);

}  // namespace xlab
