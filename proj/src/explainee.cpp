#include "xlab/explainee.hpp"

#include <cmath>
#include <random>

#include "xlab/diag.hpp"
#include "xlab/error.hpp"
#include "xlab/parallel.hpp"
#include "xlab/random.hpp"

namespace xlab {

std::string_view to_string(Variant v) noexcept {
    switch (v) {
        case Variant::full: return "full";
        case Variant::prior_only: return "prior_only";
        case Variant::l1: return "l1";
        case Variant::beta: return "beta";
    }
    return "?";
}

Variant parse_variant(std::string_view text) {
    for (Variant v : kAllVariants) {
        if (to_string(v) == text) return v;
    }
    throw DataError("unknown model variant '" + std::string(text) + "'");
}

ModelSpec::ModelSpec(Variant variant, std::optional<GeneralizationRate> rate, double beta_clamp)
    : variant_(variant), rate_(rate), beta_clamp_(beta_clamp) {
    if (variant_ != Variant::prior_only && !rate_) {
        throw DataError("model variant '" + std::string(to_string(variant_)) + "' requires a rate");
    }
}

GeneralizationRate ModelSpec::rate() const {
    if (!rate_) throw DataError("prior_only model has no rate");
    return *rate_;
}

double class_log_likelihood(const TrialEvidence& evidence, Choice cls, const ModelSpec& model) {
    const bool truth = cls == Choice::truth;
    switch (model.variant()) {
        case Variant::full:
            return log_exp_generalization(truth ? evidence.sim_truth.value : evidence.sim_foil.value, model.rate());
        case Variant::beta:
            return log_beta_generalization(truth ? evidence.sim_truth.value : evidence.sim_foil.value, model.rate(),
                                           model.beta_clamp());
        case Variant::l1:
            return log_exp_generalization_l1(truth ? evidence.l1_truth.value : evidence.l1_foil.value, model.rate());
        case Variant::prior_only: break;
    }
    throw DataError("prior_only model has no likelihood");
}

namespace {

void check_prior(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("prior outside [0,1]");
}

}  // namespace

double posterior_from_log_likelihoods(double log_lik_truth, double log_lik_foil, double prior_truth) {
    check_prior(prior_truth);
    if (prior_truth == 0.0 || prior_truth == 1.0) return prior_truth;
    if (log_lik_truth == log_lik_foil && std::isfinite(log_lik_truth)) return prior_truth;
    const double log_odds = (log_lik_truth - log_lik_foil) + (std::log(prior_truth) - std::log1p(-prior_truth));
    if (std::isnan(log_odds)) {
        diag::warn("posterior: both weighted likelihoods vanish, returning prior");
        return prior_truth;
    }
    // Logistic written to stay accurate in both tails.
    if (log_odds >= 0.0) return 1.0 / (1.0 + std::exp(-log_odds));
    const double e = std::exp(log_odds);
    return e / (1.0 + e);
}

double posterior_from_likelihoods(double lik_truth, double lik_foil, double prior_truth) {
    check_prior(prior_truth);
    if (lik_truth < 0.0 || lik_foil < 0.0) throw DataError("likelihoods must be nonnegative");
    const double wt = lik_truth * prior_truth;
    const double wf = lik_foil * (1.0 - prior_truth);
    if (wt == 0.0 && wf == 0.0) {
        diag::warn("posterior: both weighted likelihoods vanish, returning prior");
        return prior_truth;
    }
    if (lik_truth == lik_foil) return prior_truth;
    return wt / (wt + wf);
}

std::vector<double> posterior_multiclass(std::span<const double> log_likelihoods, std::span<const double> priors) {
    if (log_likelihoods.size() != priors.size() || priors.empty()) {
        throw DataError("posterior_multiclass: size mismatch");
    }
    double max_term = -INFINITY;
    std::vector<double> terms(priors.size());
    for (std::size_t i = 0; i < priors.size(); ++i) {
        check_prior(priors[i]);
        terms[i] = priors[i] > 0.0 ? log_likelihoods[i] + std::log(priors[i]) : -INFINITY;
        max_term = std::max(max_term, terms[i]);
    }
    if (!std::isfinite(max_term)) {
        diag::warn("posterior_multiclass: all weighted likelihoods vanish, returning priors");
        return {priors.begin(), priors.end()};
    }
    double total = 0.0;
    for (double& t : terms) {
        t = std::exp(t - max_term);
        total += t;
    }
    for (double& t : terms) t /= total;
    return terms;
}

double posterior(const TrialEvidence& evidence, const ModelSpec& model) {
    check_prior(evidence.prior_truth);
    if (model.variant() == Variant::prior_only) return evidence.prior_truth;
    return posterior_from_log_likelihoods(class_log_likelihood(evidence, Choice::truth, model),
                                          class_log_likelihood(evidence, Choice::foil, model), evidence.prior_truth);
}

double fidelity(double posterior_truth, Choice ai_class) {
    check_prior(posterior_truth);
    return ai_class == Choice::truth ? posterior_truth : 1.0 - posterior_truth;
}

namespace {

FloatGrid mass_normalized(const FloatGrid& grid, const char* what) {
    double total = 0.0;
    for (double v : grid.values()) total += v;
    if (total > 0.0) return sum_normalize(grid);
    diag::warn(std::string("L1 input '") + what + "' has zero mass; using a uniform map");
    return FloatGrid::filled(grid.width(), grid.height(), grid.channels(), 1.0 / static_cast<double>(grid.size()));
}

}  // namespace

TrialEvidence compute_evidence(double prior_truth, const FloatGrid& observed, const FloatGrid& consensus_truth,
                               const FloatGrid& consensus_foil) {
    check_prior(prior_truth);
    if (!observed.same_shape(consensus_truth) || !observed.same_shape(consensus_foil)) {
        throw DataError("observed map and consensus masks differ in shape");
    }
    TrialEvidence ev;
    ev.prior_truth = prior_truth;

    const auto obs_mm = minmax_scale(observed).grid;
    ev.sim_truth = sloman_similarity(obs_mm, minmax_scale(consensus_truth).grid);
    ev.sim_foil = sloman_similarity(obs_mm, minmax_scale(consensus_foil).grid);

    const auto obs_sum = mass_normalized(observed, "observed");
    ev.l1_truth = l1_dissimilarity(obs_sum, mass_normalized(consensus_truth, "consensus truth"));
    ev.l1_foil = l1_dissimilarity(obs_sum, mass_normalized(consensus_foil, "consensus foil"));
    return ev;
}

std::vector<TrialEvidence> build_evidence(const PredictionInputs& inputs, unsigned threads) {
    std::string missing;
    for (const auto& t : inputs.trials) {
        std::vector<std::string> what;
        if (!inputs.priors.count(t.trial_id)) what.push_back("prior");
        if (!inputs.consensus.count({t.trial_id, Choice::truth})) what.push_back("truth mask");
        if (!inputs.consensus.count({t.trial_id, Choice::foil})) what.push_back("foil mask");
        if (!inputs.observed.count(t.trial_id)) what.push_back("observed map");
        if (what.empty()) continue;
        if (!missing.empty()) missing += "; ";
        missing += t.trial_id + " (";
        for (std::size_t i = 0; i < what.size(); ++i) missing += (i ? ", " : "") + what[i];
        missing += ")";
    }
    if (!missing.empty()) throw DataError("missing model inputs for trials: " + missing);

    std::vector<TrialEvidence> evidence(inputs.trials.size());
    parallel_for(inputs.trials.size(), threads, [&](std::size_t i) {
        const auto& id = inputs.trials[i].trial_id;
        evidence[i] = compute_evidence(inputs.priors.at(id), inputs.observed.at(id),
                                       inputs.consensus.at({id, Choice::truth}),
                                       inputs.consensus.at({id, Choice::foil}));
    });
    return evidence;
}

std::vector<PosteriorRecord> predict_from_evidence(const std::vector<TrialSpec>& trials,
                                                   const std::vector<TrialEvidence>& evidence,
                                                   const ModelSpec& model) {
    if (trials.size() != evidence.size()) throw DataError("trial / evidence count mismatch");
    std::vector<PosteriorRecord> out;
    out.reserve(trials.size());
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const double p = posterior(evidence[i], model);
        out.push_back({trials[i].trial_id, p, fidelity(p, trials[i].ai_class)});
    }
    return out;
}

std::vector<PosteriorRecord> predict_corpus(const PredictionInputs& inputs, const ModelSpec& model,
                                            unsigned threads) {
    return predict_from_evidence(inputs.trials, build_evidence(inputs, threads), model);
}

std::vector<Choice> sample_responses(double posterior_truth, std::size_t n_participants, std::uint64_t seed) {
    check_prior(posterior_truth);
    auto rng = make_engine(seed, stream::kResponses);
    std::bernoulli_distribution draw(posterior_truth);
    std::vector<Choice> out;
    out.reserve(n_participants);
    for (std::size_t i = 0; i < n_participants; ++i) out.push_back(draw(rng) ? Choice::truth : Choice::foil);
    return out;
}

std::string posterior_records_csv(const std::vector<PosteriorRecord>& records, const ModelSpec& model) {
    std::string out = "trial_id,posterior_truth,fidelity,variant,lambda\n";
    const std::string lambda = model.has_rate() ? format_real(model.rate().value()) : "";
    for (const auto& r : records) {
        out += csv_escape(r.trial_id) + "," + format_real(r.posterior_truth) + "," + format_real(r.fidelity) + "," +
               std::string(to_string(model.variant())) + "," + lambda + "\n";
    }
    return out;
}

}  // namespace xlab
