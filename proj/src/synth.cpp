#include "xlab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <random>
#include <system_error>

#include "xlab/error.hpp"
#include "xlab/parallel.hpp"
#include "xlab/random.hpp"
#include "xlab/teaching.hpp"

namespace xlab {

namespace {

// Zero-padded so that lexical order equals index order.
std::string pad_digits(std::size_t index, std::size_t count) {
    std::size_t width = 3;
    for (std::size_t n = count; n >= 1000; n /= 10) ++width;
    std::string digits = std::to_string(index);
    if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
    return digits;
}

std::string padded(char prefix, std::size_t index, std::size_t count) {
    return std::string(1, prefix) + pad_digits(index, count);
}

std::string class_name(std::size_t k, std::size_t n_classes) { return "class" + pad_digits(k, n_classes); }

double quantize(double v, double step) { return std::round(v / step) * step; }

double sample_beta(std::mt19937_64& rng, double a, double b) {
    std::gamma_distribution<double> ga(a, 1.0);
    std::gamma_distribution<double> gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
}

// Binary blob from one smooth field: pixels at or above the smaller of a
// fixed level and the 90th percentile, so every blob covers at least a
// tenth of the grid.
FloatGrid blob_from_field(const FloatGrid& field) {
    std::vector<double> sorted(field.values().begin(), field.values().end());
    std::sort(sorted.begin(), sorted.end());
    const double q90 = sorted[(sorted.size() * 9) / 10];
    const double level = std::min(0.8, q90);
    FloatGrid blob(field.width(), field.height(), 1);
    for (std::size_t i = 0; i < field.size(); ++i) blob.values()[i] = field.values()[i] >= level ? 1.0 : 0.0;
    return blob;
}

std::vector<FloatGrid> smooth_fields(std::size_t w, std::size_t h, std::size_t n, std::uint64_t seed) {
    GpConfig gp = GpConfig::for_grid(w, h, seed);
    gp.mean = 0.0;
    gp.marginal_std = 1.0;
    gp.n_samples = n;
    return sample_fields(gp);
}

struct TrialDraft {
    TrialSpec spec;
    double generating_prior = 0.5;
    FloatGrid image;
    FloatGrid observed;
    std::vector<MaskRecord> masks;
    std::vector<ResponseRecord> control;
};

// Per-response time making a participant's total comfortably exceed the
// condition threshold.
double response_time(std::mt19937_64& rng, double threshold, std::size_t n_trials) {
    std::uniform_real_distribution<double> u(1.2, 2.0);
    return quantize(threshold / static_cast<double>(n_trials) * u(rng), 0.001);
}

}  // namespace

void SynthConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v < 1) throw DataError(std::string("synth: ") + name + " must be at least 1");
    };
    positive(n_trials, "n_trials");
    positive(n_control, "n_control");
    positive(n_explanation, "n_explanation");
    positive(n_drawers, "n_drawers");
    positive(grid_w, "grid_w");
    positive(grid_h, "grid_h");
    if (n_classes < 2) throw DataError("synth: n_classes must be at least 2");
    if (!(true_lambda > 0.0) || !std::isfinite(true_lambda)) throw DataError("synth: true_lambda must be positive");
    if (!(prior_concentration > 0.0) || !std::isfinite(prior_concentration))
        throw DataError("synth: prior_concentration must be positive");
    auto open_unit = [](double v, const char* name) {
        if (!(v > 0.0 && v < 1.0)) throw DataError(std::string("synth: ") + name + " must lie in (0, 1)");
    };
    open_unit(prior_mean_correct, "prior_mean_correct");
    open_unit(prior_mean_mistake, "prior_mean_mistake");
    if (!(mistake_fraction >= 0.0 && mistake_fraction <= 1.0))
        throw DataError("synth: mistake_fraction must lie in [0, 1]");
    if (!(std::abs(mistake_contrast) <= 1.0)) throw DataError("synth: mistake_contrast must lie in [-1, 1]");
    if (!(std::abs(correct_contrast) <= 1.0)) throw DataError("synth: correct_contrast must lie in [-1, 1]");
    if (!(drawer_noise >= 0.0) || !std::isfinite(drawer_noise))
        throw DataError("synth: drawer_noise must be nonnegative");
    if (!(exclusion_threshold >= 1.0)) throw DataError("synth: exclusion_threshold must be at least 1");
}

std::string synth_trial_id(std::size_t index, std::size_t n_trials) { return padded('t', index, n_trials); }

std::string synth_drawer_id(Choice target, std::size_t index, std::size_t n_drawers) {
    return std::string("d") + padded(target == Choice::truth ? 't' : 'f', index, n_drawers);
}

SyntheticStudy generate_study(const SynthConfig& config, unsigned threads) {
    config.validate();
    const std::size_t w = config.grid_w;
    const std::size_t h = config.grid_h;
    const std::size_t n = config.n_trials;
    const RtThresholds rt;

    SyntheticStudy study;
    study.config = config;

    for (std::size_t k = 0; k < config.n_classes; ++k) {
        auto rng = make_engine(config.seed, stream::kSynthClass, k);
        const auto fields = smooth_fields(w, h, 3, rng());
        FloatGrid tmpl(w, h, 3);
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < w * h; ++i) tmpl.values()[c * w * h + i] = std::tanh(fields[c].values()[i]);
        }
        study.templates.emplace(class_name(k, config.n_classes), std::move(tmpl));
    }

    // Which trials the AI gets wrong.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    {
        auto rng = make_engine(config.seed, stream::kSynthClass, ~std::uint64_t{0});
        std::shuffle(order.begin(), order.end(), rng);
    }
    const auto n_mistakes = static_cast<std::size_t>(std::llround(config.mistake_fraction * static_cast<double>(n)));
    std::vector<bool> mistake(n, false);
    for (std::size_t i = 0; i < n_mistakes; ++i) mistake[order[i]] = true;

    std::vector<TrialDraft> drafts(n);
    parallel_for(n, threads, [&](std::size_t t) {
        TrialDraft& d = drafts[t];
        auto rng = make_engine(config.seed, stream::kSynthTrial, t);
        std::uniform_int_distribution<std::size_t> pick(0, config.n_classes - 1);
        const std::size_t truth_k = pick(rng);
        std::size_t foil_k = pick(rng);
        while (foil_k == truth_k) foil_k = pick(rng);

        d.spec.trial_id = synth_trial_id(t, n);
        d.spec.image_path = "images/" + d.spec.trial_id + ".fgrid";
        d.spec.truth_class = class_name(truth_k, config.n_classes);
        d.spec.foil_class = class_name(foil_k, config.n_classes);
        d.spec.ai_class = mistake[t] ? Choice::foil : Choice::truth;

        const double m = mistake[t] ? config.prior_mean_mistake : config.prior_mean_correct;
        const double kappa = config.prior_concentration;
        d.generating_prior = sample_beta(rng, kappa * m, kappa * (1.0 - m));

        const auto fields = smooth_fields(w, h, 2, rng());
        const FloatGrid blob_truth = blob_from_field(fields[0]);
        const FloatGrid blob_foil = blob_from_field(fields[1]);

        // Observed map: weighted blobs, the AI's class weighted by the
        // trial-type contrast.
        std::uniform_real_distribution<double> jitter(-0.15, 0.15);
        const double contrast = mistake[t] ? config.mistake_contrast : config.correct_contrast;
        const double w_ai = std::clamp(0.5 + contrast / 2.0 + jitter(rng), 0.0, 1.0);
        const double w_other = std::clamp(0.5 - contrast / 2.0 + jitter(rng), 0.0, 1.0);
        const double w_truth = d.spec.ai_correct() ? w_ai : w_other;
        const double w_foil = d.spec.ai_correct() ? w_other : w_ai;
        std::uniform_real_distribution<double> speckle(0.0, 0.05);
        d.observed = FloatGrid(w, h, 1);
        for (std::size_t i = 0; i < w * h; ++i) {
            const double v = w_truth * blob_truth.values()[i] + w_foil * blob_foil.values()[i] + speckle(rng);
            d.observed.values()[i] = quantize(std::clamp(v, 0.0, 1.0), 0.001);
        }

        const FloatGrid& tmpl_truth = study.templates.at(d.spec.truth_class);
        const FloatGrid& tmpl_foil = study.templates.at(d.spec.foil_class);
        std::uniform_real_distribution<double> grain(-0.05, 0.05);
        d.image = FloatGrid(w, h, 3);
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < w * h; ++i) {
                const std::size_t j = c * w * h + i;
                const double v = 0.5 + 0.4 * blob_truth.values()[i] * tmpl_truth.values()[j] +
                                 0.3 * blob_foil.values()[i] * tmpl_foil.values()[j] + grain(rng);
                d.image.values()[j] = quantize(std::clamp(v, 0.0, 1.0), 0.001);
            }
        }

        for (Choice target : {Choice::truth, Choice::foil}) {
            const FloatGrid& blob = target == Choice::truth ? blob_truth : blob_foil;
            auto drng = make_engine(config.seed, stream::kSynthDrawer, 2 * t + (target == Choice::truth ? 0 : 1));
            std::normal_distribution<double> noise(0.0, 1.0);
            for (std::size_t p = 0; p < config.n_drawers; ++p) {
                MaskRecord rec;
                rec.participant_id = synth_drawer_id(target, p, config.n_drawers);
                rec.trial_id = d.spec.trial_id;
                rec.target = target;
                rec.mask = FloatGrid(w, h, 1);
                for (std::size_t i = 0; i < w * h; ++i) {
                    const double v = blob.values()[i] + config.drawer_noise * noise(drng);
                    rec.mask.values()[i] = quantize(std::clamp(v, 0.0, 1.0), 0.01);
                }
                d.masks.push_back(std::move(rec));
            }
        }

        auto crng = make_engine(config.seed, stream::kSynthResponse, 2 * t);
        std::bernoulli_distribution says_truth(d.generating_prior);
        for (std::size_t p = 0; p < config.n_control; ++p) {
            ResponseRecord r;
            r.participant_id = padded('c', p, config.n_control);
            r.trial_id = d.spec.trial_id;
            r.condition = Condition::control;
            r.choice = says_truth(crng) ? Choice::truth : Choice::foil;
            r.rt_seconds = response_time(crng, rt.control_seconds, n);
            d.control.push_back(std::move(r));
        }
    });

    std::vector<TrialSpec> trials;
    std::vector<ResponseRecord> responses;
    std::vector<MaskRecord> masks;
    std::map<std::string, GridShape> shapes;
    for (auto& d : drafts) {
        trials.push_back(d.spec);
        shapes[d.spec.trial_id] = GridShape{w, h, 3};
        for (auto& r : d.control) responses.push_back(std::move(r));
        for (auto& m : d.masks) masks.push_back(std::move(m));
        study.images.emplace(d.spec.trial_id, std::move(d.image));
        study.observed.emplace(d.spec.trial_id, std::move(d.observed));
    }
    StudyCorpus control_only = make_corpus(trials, responses, std::move(masks), shapes);

    // Consensus exactly as the analysis pipeline derives it.
    ConsensusMap consensus;
    for (Choice target : {Choice::truth, Choice::foil}) {
        std::vector<MaskRecord> group;
        for (const auto& m : control_only.masks) {
            if (m.target == target) group.push_back(m);
        }
        const ExclusionReport report = exclude_outliers(group, config.exclusion_threshold);
        std::vector<MaskRecord> kept;
        for (auto& m : group) {
            if (report.keeps(m)) kept.push_back(std::move(m));
        }
        for (auto& [key, grid] : to_consensus_map(aggregate_consensus(kept))) consensus.emplace(key, std::move(grid));
    }
    const PriorTable priors = estimate_prior(control_only.trials, control_only.responses);
    const ModelSpec model(Variant::full, GeneralizationRate(config.true_lambda));

    study.truth.resize(n);
    std::vector<std::vector<ResponseRecord>> explanation(n);
    parallel_for(n, threads, [&](std::size_t t) {
        const TrialSpec& spec = control_only.trials[t];
        SynthTrialTruth& tt = study.truth[t];
        tt.trial_id = spec.trial_id;
        tt.ai_correct = spec.ai_correct();
        tt.generating_prior = drafts[t].generating_prior;
        tt.prior_truth = priors.at(spec.trial_id);
        tt.evidence = compute_evidence(tt.prior_truth, study.observed.at(spec.trial_id),
                                       consensus.at({spec.trial_id, Choice::truth}),
                                       consensus.at({spec.trial_id, Choice::foil}));
        tt.posterior_truth = posterior(tt.evidence, model);

        auto rng = make_engine(config.seed, stream::kSynthResponse, 2 * t + 1);
        std::bernoulli_distribution says_truth(tt.posterior_truth);
        auto& out = explanation[t];
        out.reserve(config.n_explanation);
        for (std::size_t p = 0; p < config.n_explanation; ++p) {
            ResponseRecord r;
            r.participant_id = padded('e', p, config.n_explanation);
            r.trial_id = spec.trial_id;
            r.condition = Condition::explanation;
            r.choice = says_truth(rng) ? Choice::truth : Choice::foil;
            r.rt_seconds = response_time(rng, rt.explanation_seconds, n);
            out.push_back(std::move(r));
        }
    });

    for (const auto& tt : study.truth) study.model_empirical.entries[tt.trial_id] = {tt.posterior_truth, config.n_explanation};

    std::vector<ResponseRecord> all = std::move(control_only.responses);
    for (auto& group : explanation) {
        for (auto& r : group) all.push_back(std::move(r));
    }
    study.corpus = make_corpus(std::move(control_only.trials), std::move(all), std::move(control_only.masks), shapes);
    return study;
}

std::string ground_truth_json(const SyntheticStudy& study) {
    using nlohmann::ordered_json;
    const SynthConfig& c = study.config;
    ordered_json j;
    j["true_lambda"] = c.true_lambda;
    j["seed"] = c.seed;
    j["config"] = {{"n_trials", c.n_trials},
                   {"n_control", c.n_control},
                   {"n_explanation", c.n_explanation},
                   {"n_drawers", c.n_drawers},
                   {"grid_w", c.grid_w},
                   {"grid_h", c.grid_h},
                   {"n_classes", c.n_classes},
                   {"true_lambda", c.true_lambda},
                   {"prior_concentration", c.prior_concentration},
                   {"prior_mean_correct", c.prior_mean_correct},
                   {"prior_mean_mistake", c.prior_mean_mistake},
                   {"mistake_fraction", c.mistake_fraction},
                   {"mistake_contrast", c.mistake_contrast},
                   {"correct_contrast", c.correct_contrast},
                   {"drawer_noise", c.drawer_noise},
                   {"exclusion_threshold", c.exclusion_threshold},
                   {"seed", c.seed}};
    j["trials"] = ordered_json::array();
    for (const auto& t : study.truth) {
        j["trials"].push_back({{"trial_id", t.trial_id},
                               {"ai_correct", t.ai_correct},
                               {"generating_prior", t.generating_prior},
                               {"prior_truth", t.prior_truth},
                               {"sim_truth", t.evidence.sim_truth.value},
                               {"sim_foil", t.evidence.sim_foil.value},
                               {"l1_truth", t.evidence.l1_truth.value},
                               {"l1_foil", t.evidence.l1_foil.value},
                               {"posterior_truth", t.posterior_truth}});
    }
    return j.dump(2) + "\n";
}

void write_study(const SyntheticStudy& study, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
    for (const char* sub : {"images", "masks", "saliency", "templates"}) {
        std::filesystem::create_directories(dir / sub, ec);
        if (ec) throw DataError("cannot create directory " + (dir / sub).string() + ": " + ec.message());
    }

    const StudyCorpus& corpus = study.corpus;
    write_trials_csv(corpus.trials, dir / "trials.csv");
    write_responses_csv(corpus.responses, dir / "responses.csv");

    std::vector<MaskManifestRow> rows;
    rows.reserve(corpus.masks.size());
    for (const auto& m : corpus.masks) {
        MaskManifestRow row{m.participant_id, m.trial_id, m.target,
                            "masks/" + m.participant_id + "/" + m.trial_id + "." + std::string(to_string(m.target)) +
                                ".fgrid"};
        write_text_file(dir / row.mask_path, encode_fgrid(m.mask));
        rows.push_back(std::move(row));
    }
    write_masks_csv(rows, dir / "masks.csv");

    for (const auto& t : corpus.trials) {
        write_grid(study.images.at(t.trial_id), dir / t.image_path);
        const std::string target(to_string(t.ai_class));
        const auto base = dir / "saliency" / (t.trial_id + "." + target);
        write_grid(study.observed.at(t.trial_id), base.string() + ".fgrid");
        nlohmann::ordered_json side{{"trial_id", t.trial_id},
                                    {"class", t.class_name(t.ai_class)},
                                    {"target", target},
                                    {"source", "synthetic"}};
        write_text_file(base.string() + ".json", side.dump(2) + "\n");
    }
    for (const auto& [name, grid] : study.templates) write_grid(grid, dir / "templates" / (name + ".fgrid"));

    write_text_file(dir / "ground_truth.json", ground_truth_json(study));
    write_text_file(dir / "model_empirical.csv", proportion_table_csv(study.model_empirical, corpus.trials));
}

StudyCorpus inject_outlier_drawer(StudyCorpus corpus, const std::string& participant_id, double severity,
                                  std::uint64_t seed) {
    if (!(severity >= 0.0 && severity <= 1.0)) throw DataError("outlier severity must lie in [0, 1]");
    bool found = false;
    auto rng = make_engine(seed, stream::kOutlier, fnv1a64(participant_id));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& m : corpus.masks) {
        if (m.participant_id != participant_id) continue;
        found = true;
        if (severity == 0.0) continue;
        for (double& v : m.mask.values()) v = std::clamp((1.0 - severity) * v + severity * u(rng), 0.0, 1.0);
    }
    if (!found) throw DataError("unknown participant '" + participant_id + "'");
    return corpus;
}

}  // namespace xlab
