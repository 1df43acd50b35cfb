#include "xlab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <json.hpp>
#include <set>

#include "xlab/diag.hpp"
#include "xlab/error.hpp"

namespace xlab {

namespace {

// Runs one stage, tagging library errors with the stage name.
template <class F>
auto stage(const char* name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const DataError& e) {
        throw StageError(name, e.what(), true);
    } catch (const ComputeError& e) {
        throw StageError(name, e.what(), false);
    }
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t comma = text.find(',', start);
        if (comma == std::string::npos) comma = text.size();
        std::string item = text.substr(start, comma - start);
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(item);
        start = comma + 1;
    }
    return out;
}

std::size_t get_count(const Config& c, const std::string& key, std::int64_t min) {
    const std::int64_t v = c.get_int(key);
    if (v < min) throw ConfigError(key + " must be at least " + std::to_string(min));
    return static_cast<std::size_t>(v);
}

std::filesystem::path optional_path(const Config& c, const std::string& key) {
    return std::filesystem::path(c.get_string(key));
}

bool is_parametric(Variant v) { return v != Variant::prior_only; }

ModelSpec model_for(const RunConfig& config, Variant v, const ModelResults& models) {
    if (!is_parametric(v)) return ModelSpec::prior_only();
    return ModelSpec(v, GeneralizationRate(models.fits.at(v).lambda_hat), config.fit.beta_clamp);
}

std::vector<MaskRecord> masks_for(const StudyCorpus& corpus, Choice target) {
    std::vector<MaskRecord> out;
    for (const auto& m : corpus.masks) {
        if (m.target == target) out.push_back(m);
    }
    return out;
}

void write_exclusion(const ExclusionReport& report, const std::filesystem::path& dir, Choice target) {
    const std::string base = "exclusion_" + std::string(to_string(target));
    write_text_file(dir / (base + ".json"), exclusion_report_json(report));
    write_text_file(dir / (base + ".csv"), exclusion_summary_csv(report));
}

// Runs `body` with warnings collected; returns them sorted and unique so
// that reports do not depend on thread interleaving. Each warning is also
// echoed to stderr.
template <class F>
std::vector<std::string> collecting_warnings(F&& body) {
    std::vector<std::string> messages;
    {
        diag::WarningCapture capture;
        body();
        messages = capture.messages();
    }
    std::sort(messages.begin(), messages.end());
    messages.erase(std::unique(messages.begin(), messages.end()), messages.end());
    for (const auto& m : messages) std::cerr << "warning: " << m << '\n';
    return messages;
}

}  // namespace

Config RunConfig::defaults() {
    Config c;
    c.set("seed", std::int64_t{0});
    c.set("threads", std::int64_t{1});

    c.set("paths.corpus", std::string());
    c.set("paths.saliency", std::string());
    c.set("paths.out", std::string("out"));
    c.set("paths.empirical", std::string());
    c.set("paths.templates", std::string());

    c.set("model.variants", std::string("full,prior_only,l1,beta"));
    c.set("model.lambda", 1.0);
    c.set("model.lambda_min", 1e-3);
    c.set("model.lambda_max", 1e3);
    c.set("model.coarse_points", std::int64_t{61});
    c.set("model.rel_tol", 1e-6);
    c.set("model.audit_points", std::int64_t{1000});
    c.set("model.beta_clamp", kBetaEndpointClamp);

    c.set("prior.clamp", false);
    c.set("exclusion.threshold", 1.5);
    c.set("exclusion.scope", std::string("participant"));
    c.set("rt.control_seconds", 180.0);
    c.set("rt.explanation_seconds", 300.0);
    c.set("bootstrap.n_boot", std::int64_t{10000});
    c.set("bootstrap.ci_level", 95.0);

    const GpConfig gp;
    c.set("gp.mean", gp.mean);
    c.set("gp.marginal_std", gp.marginal_std);
    c.set("gp.scale_reading", std::string("std"));
    c.set("gp.length_scale", 0.0);
    c.set("gp.n_samples", static_cast<std::int64_t>(gp.n_samples));
    c.set("gp.jitter", gp.jitter);

    c.set("classifier.kind", std::string("template"));
    c.set("classifier.temperature", 10.0);
    c.set("classifier.command", std::string());
    c.set("classifier.timeout_ms", std::int64_t{30000});

    const SynthConfig s;
    c.set("synth.n_trials", static_cast<std::int64_t>(s.n_trials));
    c.set("synth.n_control", static_cast<std::int64_t>(s.n_control));
    c.set("synth.n_explanation", static_cast<std::int64_t>(s.n_explanation));
    c.set("synth.n_drawers", static_cast<std::int64_t>(s.n_drawers));
    c.set("synth.grid_w", static_cast<std::int64_t>(s.grid_w));
    c.set("synth.grid_h", static_cast<std::int64_t>(s.grid_h));
    c.set("synth.n_classes", static_cast<std::int64_t>(s.n_classes));
    c.set("synth.true_lambda", s.true_lambda);
    c.set("synth.prior_concentration", s.prior_concentration);
    c.set("synth.prior_mean_correct", s.prior_mean_correct);
    c.set("synth.prior_mean_mistake", s.prior_mean_mistake);
    c.set("synth.mistake_fraction", s.mistake_fraction);
    c.set("synth.mistake_contrast", s.mistake_contrast);
    c.set("synth.correct_contrast", s.correct_contrast);
    c.set("synth.drawer_noise", s.drawer_noise);
    return c;
}

RunConfig RunConfig::from_config(const Config& resolved) {
    RunConfig r;
    r.resolved = resolved;
    const Config& c = resolved;
    const std::int64_t seed = c.get_int("seed");
    if (seed < 0) throw ConfigError("seed must be nonnegative");
    r.seed = static_cast<std::uint64_t>(seed);
    r.threads = static_cast<unsigned>(get_count(c, "threads", 1));

    r.corpus_dir = optional_path(c, "paths.corpus");
    r.saliency_dir = optional_path(c, "paths.saliency");
    if (r.saliency_dir.empty() && !r.corpus_dir.empty()) r.saliency_dir = r.corpus_dir / "saliency";
    r.out_dir = optional_path(c, "paths.out");
    if (r.out_dir.empty()) throw ConfigError("paths.out must not be empty");
    if (!c.get_string("paths.empirical").empty()) {
        r.empirical_path = optional_path(c, "paths.empirical");
        if (!std::filesystem::is_regular_file(*r.empirical_path))
            throw ConfigError("paths.empirical: no such file " + r.empirical_path->string());
    }
    r.templates_dir = optional_path(c, "paths.templates");
    if (r.templates_dir.empty() && !r.corpus_dir.empty()) r.templates_dir = r.corpus_dir / "templates";

    std::set<Variant> seen;
    for (const auto& name : split_list(c.get_string("model.variants"))) {
        Variant v;
        try {
            v = parse_variant(name);
        } catch (const DataError& e) {
            throw ConfigError(std::string("model.variants: ") + e.what());
        }
        if (seen.insert(v).second) r.variants.push_back(v);
    }
    if (r.variants.empty()) throw ConfigError("model.variants must name at least one variant");
    std::sort(r.variants.begin(), r.variants.end());

    r.lambda = c.get_real("model.lambda");
    if (!(r.lambda > 0.0)) throw ConfigError("model.lambda must be positive");
    r.fit.lambda_min = c.get_real("model.lambda_min");
    r.fit.lambda_max = c.get_real("model.lambda_max");
    r.fit.coarse_points = get_count(c, "model.coarse_points", 3);
    r.fit.rel_tol = c.get_real("model.rel_tol");
    r.fit.audit_points = get_count(c, "model.audit_points", 2);
    r.fit.beta_clamp = c.get_real("model.beta_clamp");
    if (!(r.fit.beta_clamp > 0.0 && r.fit.beta_clamp < 0.5)) throw ConfigError("model.beta_clamp must lie in (0, 0.5)");
    try {
        r.fit.validate();
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }

    r.prior.clamp = c.get_bool("prior.clamp");
    r.exclusion_threshold = c.get_real("exclusion.threshold");
    if (!(r.exclusion_threshold >= 1.0)) throw ConfigError("exclusion.threshold must be at least 1");
    const std::string scope = c.get_string("exclusion.scope");
    if (scope == "participant") {
        r.exclusion_scope = ExclusionScope::participant;
    } else if (scope == "image") {
        r.exclusion_scope = ExclusionScope::image;
    } else {
        throw ConfigError("exclusion.scope must be 'participant' or 'image'");
    }
    r.rt.control_seconds = c.get_real("rt.control_seconds");
    r.rt.explanation_seconds = c.get_real("rt.explanation_seconds");
    if (!(r.rt.control_seconds >= 0.0) || !(r.rt.explanation_seconds >= 0.0))
        throw ConfigError("rt thresholds must be nonnegative");
    r.n_boot = get_count(c, "bootstrap.n_boot", 1);
    r.ci_level = c.get_real("bootstrap.ci_level");
    if (!(r.ci_level > 0.0 && r.ci_level < 100.0)) throw ConfigError("bootstrap.ci_level must lie in (0, 100)");

    r.gp.mean = c.get_real("gp.mean");
    const double spread = c.get_real("gp.marginal_std");
    const std::string reading = c.get_string("gp.scale_reading");
    if (reading == "std") {
        r.gp.marginal_std = spread;
    } else if (reading == "variance") {
        r.gp.marginal_std = std::sqrt(spread);
    } else {
        throw ConfigError("gp.scale_reading must be 'std' or 'variance'");
    }
    const double length = c.get_real("gp.length_scale");
    r.gp_proportional_length = length == 0.0;
    if (!r.gp_proportional_length) r.gp.length_scale = length;
    r.gp.n_samples = get_count(c, "gp.n_samples", 1);
    r.gp.jitter = c.get_real("gp.jitter");
    r.gp.seed = r.seed;
    try {
        r.gp.validate();
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }

    const std::string kind = c.get_string("classifier.kind");
    if (kind == "template") {
        r.classifier.kind = ClassifierSpec::Kind::builtin_template;
    } else if (kind == "external") {
        r.classifier.kind = ClassifierSpec::Kind::external;
    } else {
        throw ConfigError("classifier.kind must be 'template' or 'external'");
    }
    r.classifier.temperature = c.get_real("classifier.temperature");
    if (!(r.classifier.temperature > 0.0)) throw ConfigError("classifier.temperature must be positive");
    r.classifier.command = c.get_string("classifier.command");
    r.classifier.timeout = std::chrono::milliseconds(get_count(c, "classifier.timeout_ms", 1));
    if (r.classifier.kind == ClassifierSpec::Kind::external && r.classifier.command.empty())
        throw ConfigError("classifier.command is required for an external classifier");

    SynthConfig& s = r.synth;
    s.n_trials = get_count(c, "synth.n_trials", 1);
    s.n_control = get_count(c, "synth.n_control", 1);
    s.n_explanation = get_count(c, "synth.n_explanation", 1);
    s.n_drawers = get_count(c, "synth.n_drawers", 1);
    s.grid_w = get_count(c, "synth.grid_w", 1);
    s.grid_h = get_count(c, "synth.grid_h", 1);
    s.n_classes = get_count(c, "synth.n_classes", 2);
    s.true_lambda = c.get_real("synth.true_lambda");
    s.prior_concentration = c.get_real("synth.prior_concentration");
    s.prior_mean_correct = c.get_real("synth.prior_mean_correct");
    s.prior_mean_mistake = c.get_real("synth.prior_mean_mistake");
    s.mistake_fraction = c.get_real("synth.mistake_fraction");
    s.mistake_contrast = c.get_real("synth.mistake_contrast");
    s.correct_contrast = c.get_real("synth.correct_contrast");
    s.drawer_noise = c.get_real("synth.drawer_noise");
    s.exclusion_threshold = r.exclusion_threshold;
    s.seed = r.seed;
    try {
        s.validate();
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    return r;
}

bool RunConfig::has_variant(Variant v) const {
    return std::find(variants.begin(), variants.end(), v) != variants.end();
}

void RunConfig::require_corpus() const {
    if (corpus_dir.empty()) throw ConfigError("paths.corpus is required");
    for (const char* name : {"trials.csv", "responses.csv", "masks.csv"}) {
        if (!std::filesystem::is_regular_file(corpus_dir / name))
            throw ConfigError("corpus file not found: " + (corpus_dir / name).string());
    }
}

std::string RunConfig::provenance_toml() const {
    Config c;
    for (const auto& [key, value] : resolved.values()) {
        if (key == "threads" || key == "paths.out") continue;
        c.set(key, value);
    }
    return c.to_toml();
}

PreparedStudy prepare_study(const RunConfig& config, PrepareLevel level) {
    PreparedStudy s;
    s.corpus = stage("load", [&] { return load_study_dir(config.corpus_dir); });
    const auto& trials = s.corpus.trials;

    stage("rt_filter", [&] {
        s.responses = rt_filter(s.corpus.responses, config.rt);
        s.n_rt_dropped = s.corpus.responses.size() - s.responses.size();
    });
    s.priors = stage("priors", [&] { return estimate_prior(trials, s.responses, config.prior); });
    if (level == PrepareLevel::responses) return s;

    stage("exclusion", [&] {
        for (Choice target : {Choice::truth, Choice::foil}) {
            const auto group = masks_for(s.corpus, target);
            if (group.empty()) throw DataError("no drawn masks for target '" + std::string(to_string(target)) + "'");
            auto& report = target == Choice::truth ? s.exclusion_truth : s.exclusion_foil;
            report = exclude_outliers(group, config.exclusion_threshold, config.exclusion_scope);
        }
    });
    stage("consensus", [&] {
        std::vector<MaskRecord> kept;
        for (const auto& m : s.corpus.masks) {
            const auto& report = m.target == Choice::truth ? s.exclusion_truth : s.exclusion_foil;
            if (report.keeps(m)) kept.push_back(m);
        }
        s.consensus = aggregate_consensus(kept);
        require_consensus(s.consensus, trials);
    });
    if (level == PrepareLevel::consensus) return s;

    stage("empirical", [&] {
        if (config.empirical_path) {
            s.empirical = read_proportion_table(*config.empirical_path);
            s.empirical_from_file = true;
            std::vector<std::string> missing;
            for (const auto& t : trials) {
                if (!s.empirical.entries.count(t.trial_id)) missing.push_back(t.trial_id);
            }
            if (!missing.empty()) {
                std::string list;
                for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
                throw DataError("empirical table lacks trials: " + list);
            }
        } else {
            s.empirical = empirical_table(trials, s.responses);
        }
        for (const auto& t : trials) s.empirical_values.push_back(s.empirical.at(t.trial_id));
    });
    stage("evidence", [&] {
        for (const auto& t : trials) {
            const auto path = config.saliency_dir / (t.trial_id + "." + std::string(to_string(t.ai_class)) + ".fgrid");
            if (std::filesystem::exists(path)) s.observed.emplace(t.trial_id, read_grid(path));
        }
        PredictionInputs inputs;
        inputs.trials = trials;
        inputs.priors = s.priors.values();
        inputs.consensus = to_consensus_map(s.consensus);
        inputs.observed = s.observed;
        s.evidence = build_evidence(inputs, config.threads);
    });
    return s;
}

ModelResults run_models(const RunConfig& config, const PreparedStudy& study, bool with_loocv) {
    ModelResults r;
    stage("fit", [&] {
        for (Variant v : config.variants) {
            if (is_parametric(v)) r.fits[v] = fit_lambda(study.evidence, study.empirical_values, v, config.fit);
        }
    });
    stage("predict", [&] {
        for (Variant v : config.variants) {
            r.predictions[v] = predict_from_evidence(study.corpus.trials, study.evidence, model_for(config, v, r));
        }
    });
    if (!with_loocv) return r;
    stage("loocv", [&] {
        for (Variant v : config.variants) {
            r.loocv[v] = loocv(study.evidence, study.empirical_values, v, config.fit, config.threads);
        }
    });
    return r;
}

AnalysisResults run_analysis(const RunConfig& config, const PreparedStudy& study, const ModelResults& models) {
    AnalysisResults a;
    const auto& trials = study.corpus.trials;
    if (!models.predictions.count(Variant::full)) throw StageError("analysis", "the full model was not run", false);
    const auto& model_pred = models.predictions.at(Variant::full);

    stage("paired_tests", [&] {
        const std::pair<const char*, Variant> pairs[] = {
            {"H4", Variant::prior_only}, {"H5", Variant::l1}, {"H6", Variant::beta}};
        const double tail = (100.0 - config.ci_level) / 2.0;
        for (const auto& [name, baseline] : pairs) {
            Comparison c;
            c.hypothesis = name;
            c.baseline = baseline;
            if (models.loocv.count(Variant::full) && models.loocv.count(baseline)) {
                const auto& full = models.loocv.at(Variant::full).errors;
                const auto& base = models.loocv.at(baseline).errors;
                c.test = paired_ttest(base, full);
                std::vector<double> diffs(full.size());
                for (std::size_t i = 0; i < full.size(); ++i) diffs[i] = base[i] - full[i];
                c.ci = bootstrap_ci(diffs, config.n_boot, config.seed, tail, 100.0 - tail);
                c.available = true;
            }
            a.comparisons.push_back(c);
        }
    });

    stage("h1", [&] {
        for (const auto& r : study.responses) {
            if (r.condition != Condition::control) continue;
            ++a.h1_n;
            if (r.choice == Choice::truth) ++a.h1_successes;
        }
        a.h1 = chi_square_gof(a.h1_successes, a.h1_n, 0.5);
    });

    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto& t = trials[i];
        FidelityRow row;
        row.trial_id = t.trial_id;
        row.ai_correct = t.ai_correct();
        row.control = fidelity(study.priors.at(t.trial_id), t.ai_class);
        row.explanation = fidelity(study.empirical_values[i], t.ai_class);
        row.model = model_pred[i].fidelity;
        a.fidelity.push_back(row);
    }

    auto regression = [&](bool use_model) {
        std::vector<RegressionRow> rows;
        for (const auto& f : a.fidelity) {
            rows.push_back({f.control, f.ai_correct ? 1 : 0, 0});
            rows.push_back({use_model ? f.model : f.explanation, f.ai_correct ? 1 : 0, 1});
        }
        return fidelity_regression(rows);
    };
    a.h2 = stage("h2", [&] { return regression(false); });
    a.h3 = stage("h3", [&] { return regression(true); });
    a.rank = stage("spearman", [&] {
        std::vector<double> model, empirical;
        for (const auto& f : a.fidelity) {
            model.push_back(f.model);
            empirical.push_back(f.explanation);
        }
        return spearman(model, empirical);
    });
    return a;
}

std::string fidelity_by_condition_csv(const AnalysisResults& analysis) {
    std::string out = "trial_id,ai_correct,control_fidelity,explanation_fidelity,model_fidelity\n";
    for (const auto& f : analysis.fidelity) {
        out += csv_escape(f.trial_id) + "," + (f.ai_correct ? "1" : "0") + "," + format_real(f.control) + "," +
               format_real(f.explanation) + "," + format_real(f.model) + "\n";
    }
    return out;
}

std::string loocv_mse_by_variant_csv(const ModelResults& models) {
    std::string out = "variant,mse,se,n\n";
    for (const auto& [variant, result] : models.loocv) {
        const double n = static_cast<double>(result.errors.size());
        double ss = 0.0;
        for (double e : result.errors) ss += (e - result.mse) * (e - result.mse);
        const double se = n > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
        out += std::string(to_string(variant)) + "," + format_real(result.mse) + "," + format_real(se) + "," +
               std::to_string(result.errors.size()) + "\n";
    }
    return out;
}

void cmd_simulate(const RunConfig& config) {
    const SyntheticStudy study = stage("simulate", [&] { return generate_study(config.synth, config.threads); });
    stage("write", [&] { write_study(study, config.out_dir); });
}

void cmd_aggregate(const RunConfig& config) {
    config.require_corpus();
    const PreparedStudy s = prepare_study(config, PrepareLevel::consensus);
    stage("write", [&] {
        write_exclusion(s.exclusion_truth, config.out_dir, Choice::truth);
        write_exclusion(s.exclusion_foil, config.out_dir, Choice::foil);
        std::string manifest = "trial_id,target,n_included,path\n";
        for (const auto& c : s.consensus) {
            const std::string rel = "consensus/" + c.trial_id + "." + std::string(to_string(c.target)) + ".fgrid";
            write_text_file(config.out_dir / rel, encode_fgrid(c.grid));
            manifest += csv_escape(c.trial_id) + "," + std::string(to_string(c.target)) + "," +
                        std::to_string(c.n_included) + "," + rel + "\n";
        }
        write_text_file(config.out_dir / "consensus.csv", manifest);
    });
}

void cmd_prior(const RunConfig& config) {
    config.require_corpus();
    const PreparedStudy s = prepare_study(config, PrepareLevel::responses);
    const bool has_explanation = std::any_of(s.responses.begin(), s.responses.end(),
                                             [](const auto& r) { return r.condition == Condition::explanation; });
    stage("write", [&] {
        write_text_file(config.out_dir / "priors.csv", proportion_table_csv(s.priors, s.corpus.trials));
        if (has_explanation) {
            const auto empirical = empirical_table(s.corpus.trials, s.responses);
            write_text_file(config.out_dir / "empirical.csv", proportion_table_csv(empirical, s.corpus.trials));
        }
    });
}

void cmd_predict(const RunConfig& config) {
    config.require_corpus();
    const PreparedStudy s = prepare_study(config, PrepareLevel::evidence);
    stage("predict", [&] {
        for (Variant v : config.variants) {
            const ModelSpec model = is_parametric(v) ? ModelSpec(v, GeneralizationRate(config.lambda), config.fit.beta_clamp)
                                                     : ModelSpec::prior_only();
            const auto records = predict_from_evidence(s.corpus.trials, s.evidence, model);
            write_text_file(config.out_dir / ("posteriors_" + std::string(to_string(v)) + ".csv"),
                            posterior_records_csv(records, model));
        }
    });
}

void cmd_fit(const RunConfig& config) {
    config.require_corpus();
    const PreparedStudy s = prepare_study(config, PrepareLevel::evidence);
    const ModelResults m = run_models(config, s, false);
    stage("write", [&] {
        for (const auto& [v, fit] : m.fits)
            write_text_file(config.out_dir / ("fit_" + std::string(to_string(v)) + ".json"), fit_result_json(fit));
    });
}

void cmd_loocv(const RunConfig& config) {
    config.require_corpus();
    const PreparedStudy s = prepare_study(config, PrepareLevel::evidence);
    ModelResults m;
    stage("loocv", [&] {
        for (Variant v : config.variants)
            m.loocv[v] = loocv(s.evidence, s.empirical_values, v, config.fit, config.threads);
    });
    stage("write", [&] {
        for (const auto& [v, result] : m.loocv)
            write_text_file(config.out_dir / ("loocv_" + std::string(to_string(v)) + ".json"),
                            loocv_result_json(result));
        write_text_file(config.out_dir / "loocv_mse_by_variant.csv", loocv_mse_by_variant_csv(m));
    });
}

void cmd_analyze(const RunConfig& config) {
    config.require_corpus();
    if (!config.has_variant(Variant::full)) throw ConfigError("analyze needs the full variant");
    const PreparedStudy s = prepare_study(config, PrepareLevel::evidence);
    const ModelResults m = run_models(config, s, false);
    const AnalysisResults a = run_analysis(config, s, m);
    stage("write", [&] {
        nlohmann::ordered_json j;
        j["h1"] = {{"successes", a.h1_successes}, {"n", a.h1_n}, {"chi2", a.h1.statistic}, {"df", a.h1.df},
                   {"p", a.h1.p}};
        auto reg = [](const RegressionFit& f) {
            nlohmann::ordered_json r;
            r["beta"] = f.beta;
            r["se"] = f.se;
            r["t"] = f.t;
            r["p"] = f.p;
            r["r2"] = f.r2;
            r["adj_r2"] = f.adj_r2;
            r["n"] = f.n;
            r["exact_fit"] = f.exact_fit;
            return r;
        };
        j["h2"] = reg(a.h2);
        j["h3"] = reg(a.h3);
        j["spearman"] = {{"rho", a.rank.statistic}, {"df", a.rank.df}, {"p", a.rank.p}};
        write_text_file(config.out_dir / "analysis.json", j.dump(2) + "\n");
        write_text_file(config.out_dir / "fidelity_by_condition.csv", fidelity_by_condition_csv(a));
    });
}

void cmd_run(const RunConfig& config) {
    config.require_corpus();
    if (!config.has_variant(Variant::full)) throw ConfigError("run needs the full variant");
    PreparedStudy s;
    ModelResults m;
    AnalysisResults a;
    const auto warnings = collecting_warnings([&] {
        s = prepare_study(config, PrepareLevel::evidence);
        m = run_models(config, s, true);
        a = run_analysis(config, s, m);
    });
    const Report report = stage("report", [&] { return build_report(config, s, m, a, warnings); });

    stage("write", [&] {
        const auto& dir = config.out_dir;
        write_text_file(dir / "report.json", report.json);
        write_text_file(dir / "report.md", report.markdown);
        write_text_file(dir / "config.toml", config.provenance_toml());
        write_text_file(dir / "fidelity_by_condition.csv", fidelity_by_condition_csv(a));
        write_text_file(dir / "loocv_mse_by_variant.csv", loocv_mse_by_variant_csv(m));
        write_text_file(dir / "priors.csv", proportion_table_csv(s.priors, s.corpus.trials));
        write_text_file(dir / "empirical.csv", proportion_table_csv(s.empirical, s.corpus.trials));
        write_exclusion(s.exclusion_truth, dir, Choice::truth);
        write_exclusion(s.exclusion_foil, dir, Choice::foil);
        for (Variant v : config.variants) {
            const std::string name(to_string(v));
            write_text_file(dir / ("posteriors_" + name + ".csv"),
                            posterior_records_csv(m.predictions.at(v), model_for(config, v, m)));
            write_text_file(dir / ("loocv_" + name + ".json"), loocv_result_json(m.loocv.at(v)));
            if (m.fits.count(v)) write_text_file(dir / ("fit_" + name + ".json"), fit_result_json(m.fits.at(v)));
        }
    });
}

std::vector<TeachFailure> cmd_teach(const RunConfig& config) {
    config.require_corpus();
    const StudyCorpus corpus = stage("load", [&] { return load_study_dir(config.corpus_dir); });
    const auto out = config.out_dir / "saliency";

    std::unique_ptr<Classifier> classifier = stage("classifier", [&] {
        ClassifierSpec spec = config.classifier;
        if (spec.kind == ClassifierSpec::Kind::builtin_template) {
            if (!std::filesystem::is_directory(config.templates_dir))
                throw DataError("template directory not found: " + config.templates_dir.string());
            std::vector<std::filesystem::path> files;
            for (const auto& entry : std::filesystem::directory_iterator(config.templates_dir)) {
                if (entry.path().extension() == ".fgrid") files.push_back(entry.path());
            }
            std::sort(files.begin(), files.end());
            for (const auto& f : files) spec.templates.emplace(f.stem().string(), read_grid(f));
        }
        return make_classifier(spec);
    });

    std::map<std::pair<std::size_t, std::size_t>, std::vector<FloatGrid>> mask_sets;
    std::vector<TeachFailure> failures;
    for (const auto& trial : corpus.trials) {
        try {
            const auto image_path = corpus.image_file(trial);
            if (!std::filesystem::exists(image_path)) throw DataError("missing image file " + image_path.string());
            const FloatGrid image = read_grid(image_path);
            GpConfig gp = config.gp;
            gp.grid_w = image.width();
            gp.grid_h = image.height();
            if (config.gp_proportional_length)
                gp.length_scale = GpConfig::proportional_length_scale(gp.grid_w, gp.grid_h);
            auto& masks = mask_sets[{gp.grid_w, gp.grid_h}];
            if (masks.empty()) masks = sample_masks(gp, config.threads);

            for (Choice target : {Choice::truth, Choice::foil}) {
                const std::string& cls = trial.class_name(target);
                const FloatGrid map = expected_mask(image, cls, masks, *classifier, config.threads);
                const auto base = out / (trial.trial_id + "." + std::string(to_string(target)));
                write_text_file(base.string() + ".fgrid", encode_fgrid(map));
                nlohmann::ordered_json side{{"trial_id", trial.trial_id},
                                            {"class", cls},
                                            {"target", std::string(to_string(target))},
                                            {"source", "teaching"},
                                            {"n_samples", gp.n_samples},
                                            {"seed", gp.seed},
                                            {"gp_hash", hex64(gp.hash())},
                                            {"classifier", config.resolved.get_string("classifier.kind")}};
                write_text_file(base.string() + ".json", side.dump(2) + "\n");
            }
        } catch (const DataError& e) {
            failures.push_back({trial.trial_id, e.what()});
        } catch (const ComputeError& e) {
            failures.push_back({trial.trial_id, e.what()});
        }
    }
    std::string manifest = "trial_id,error\n";
    for (const auto& f : failures) manifest += csv_escape(f.trial_id) + "," + csv_escape(f.message) + "\n";
    stage("write", [&] { write_text_file(out / "teach_errors.csv", manifest); });
    return failures;
}

}  // namespace xlab
