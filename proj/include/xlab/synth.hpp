#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "xlab/aggregation.hpp"
#include "xlab/corpus.hpp"
#include "xlab/explainee.hpp"

namespace xlab {

struct SynthConfig {
    std::size_t n_trials = 89;
    std::size_t n_control = 41;
    std::size_t n_explanation = 46;
    // Drawers per target class; the truth and foil groups are disjoint.
    std::size_t n_drawers = 20;
    std::size_t grid_w = 32;
    std::size_t grid_h = 32;
    std::size_t n_classes = 20;
    double true_lambda = 5.0;
    // Concentration kappa of the Beta(kappa m, kappa (1 - m)) generating priors.
    double prior_concentration = 10.0;
    double prior_mean_correct = 0.86;
    double prior_mean_mistake = 0.67;
    double mistake_fraction = 59.0 / 89.0;
    // Contrast between the AI-class weight and the other-class weight in
    // the observed map, per trial type. Positive values favor the AI class.
    double mistake_contrast = 0.3;
    double correct_contrast = 0.1;
    double drawer_noise = 0.15;
    double exclusion_threshold = 1.5;
    std::uint64_t seed = 0;

    // Throws DataError naming the offending field.
    void validate() const;
};

// Generating quantities of one trial.
struct SynthTrialTruth {
    std::string trial_id;
    bool ai_correct = true;
    double generating_prior = 0.5;
    // Control proportion the posterior was computed from.
    double prior_truth = 0.5;
    TrialEvidence evidence;
    double posterior_truth = 0.5;
};

struct SyntheticStudy {
    SynthConfig config;
    StudyCorpus corpus;
    std::map<std::string, FloatGrid> images;
    // Saliency map for the AI's chosen class, per trial.
    std::map<std::string, FloatGrid> observed;
    std::map<std::string, FloatGrid> templates;
    std::vector<SynthTrialTruth> truth;  // manifest order
    // Model posteriors at the true rate, as a noise-free empirical table.
    EmpiricalTable model_empirical;
};

// Trials are generated in parallel; every random draw is keyed by
// (seed, trial), so the study does not depend on `threads`.
SyntheticStudy generate_study(const SynthConfig& config, unsigned threads = 1);

// Writes trials.csv, responses.csv, masks.csv, images/, masks/, saliency/,
// templates/, ground_truth.json and model_empirical.csv under `dir`.
// Throws DataError if the directory is not writable.
void write_study(const SyntheticStudy& study, const std::filesystem::path& dir);

std::string ground_truth_json(const SyntheticStudy& study);

// Replaces every mask of `participant_id` with (1 - s) m + s u, u ~ U(0,1)
// per pixel. Throws DataError for an unknown participant.
StudyCorpus inject_outlier_drawer(StudyCorpus corpus, const std::string& participant_id, double severity,
                                  std::uint64_t seed = 0);

// Participant ids used by the generator.
std::string synth_trial_id(std::size_t index, std::size_t n_trials);
std::string synth_drawer_id(Choice target, std::size_t index, std::size_t n_drawers);

}  // namespace xlab
