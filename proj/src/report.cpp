#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "xlab/pipeline.hpp"

namespace xlab {

namespace {

using nlohmann::ordered_json;

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    std::string s = buf;
    // Avoid "-0.00" for values that round to zero.
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

std::string general(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

ordered_json nullable(bool available, double v) { return available ? ordered_json(v) : ordered_json(nullptr); }

ordered_json config_json(const RunConfig& config) {
    ordered_json j = ordered_json::object();
    for (const auto& [key, value] : config.resolved.values()) {
        if (key == "threads" || key == "paths.out") continue;
        std::visit([&](const auto& v) { j[key] = v; }, value);
    }
    return j;
}

ordered_json regression_json(const RegressionFit& f) {
    ordered_json j;
    j["terms"] = ordered_json::array();
    for (std::size_t k = 0; k < 4; ++k) {
        j["terms"].push_back({{"label", kRegressionLabels[k]},
                              {"parameter", "beta" + std::to_string(k)},
                              {"estimate", f.beta[k]},
                              {"se", f.se[k]},
                              {"t", f.t[k]},
                              {"p", f.p[k]}});
    }
    j["sigma2"] = f.sigma2;
    j["r2"] = f.r2;
    j["adj_r2"] = f.adj_r2;
    j["n"] = f.n;
    j["exact_fit"] = f.exact_fit;
    return j;
}

ordered_json exclusion_json(const ExclusionReport& r) {
    ordered_json j;
    j["threshold"] = r.threshold;
    j["scope"] = r.scope == ExclusionScope::participant ? "participant" : "image";
    j["iterations"] = r.iterations.size();
    j["included"] = r.included;
    j["excluded"] = r.excluded;
    return j;
}

struct Table {
    std::string title;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> notes;
};

ordered_json table_json(const Table& t) {
    return ordered_json{{"title", t.title}, {"header", t.header}, {"rows", t.rows}, {"notes", t.notes}};
}

std::string md_cell(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '*' || c == '|' || c == '_') out += '\\';
        out += c;
    }
    return out;
}

std::string render_markdown(const std::vector<Table>& tables, const std::vector<std::string>& warnings) {
    std::string md = "# Analysis report\n";
    for (const auto& t : tables) {
        md += "\n## " + t.title + "\n\n|";
        for (const auto& h : t.header) md += " " + md_cell(h) + " |";
        md += "\n|";
        for (std::size_t i = 0; i < t.header.size(); ++i) md += " --- |";
        md += "\n";
        for (const auto& row : t.rows) {
            md += "|";
            for (const auto& cell : row) md += " " + md_cell(cell) + " |";
            md += "\n";
        }
        if (!t.notes.empty()) {
            md += "\n";
            for (const auto& n : t.notes) md += md_cell(n) + "\n";
        }
    }
    if (!warnings.empty()) {
        md += "\n## Warnings\n\n";
        for (const auto& w : warnings) md += "- " + md_cell(w) + "\n";
    }
    return md;
}

const char* kStarsNote = "*** p < 0.001; ** p < 0.01; * p < 0.05";

Table regression_table(const std::string& title, const RegressionFit& f) {
    Table t;
    t.title = title;
    t.header = {"Label", "Parameter", "Coefficient (SE)"};
    for (std::size_t k = 0; k < 4; ++k) {
        t.rows.push_back({kRegressionLabels[k], "β" + std::to_string(k),
                          fixed(f.beta[k], 2) + significance_stars(f.p[k]) + "(" + fixed(f.se[k], 2) + ")"});
    }
    t.rows.push_back({"R²", "", fixed(f.r2, 2)});
    t.rows.push_back({"Adj. R²", "", fixed(f.adj_r2, 2)});
    t.rows.push_back({"I", "", std::to_string(f.n)});
    t.notes.push_back(kStarsNote);
    if (f.exact_fit) t.notes.push_back("Exact fit: residual sum of squares is zero, SE and p reported as 0.");
    return t;
}

std::string variant_label(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::prior_only: return "prior-only";
        case Variant::l1: return "L1-distance";
        case Variant::beta: return "Beta-likelihood";
    }
    return "";
}

}  // namespace

Report build_report(const RunConfig& config, const PreparedStudy& study, const ModelResults& models,
                    const AnalysisResults& analysis, const std::vector<std::string>& warnings) {
    const auto& trials = study.corpus.trials;
    ordered_json j;
    j["format"] = "xlab-report";
    j["version"] = 1;
    j["config"] = config_json(config);

    std::set<std::string> control_ids, explanation_ids;
    for (const auto& r : study.responses) {
        (r.condition == Condition::control ? control_ids : explanation_ids).insert(r.participant_id);
    }
    std::size_t n_correct = 0;
    for (const auto& t : trials) n_correct += t.ai_correct() ? 1 : 0;
    j["corpus"] = {{"n_trials", trials.size()},
                   {"n_ai_correct", n_correct},
                   {"n_ai_mistake", trials.size() - n_correct},
                   {"n_control_participants", control_ids.size()},
                   {"n_explanation_participants", explanation_ids.size()},
                   {"n_responses", study.responses.size()},
                   {"n_rt_dropped", study.n_rt_dropped},
                   {"empirical_source", study.empirical_from_file ? "file" : "responses"}};
    j["exclusion"] = {{"truth", exclusion_json(study.exclusion_truth)},
                      {"foil", exclusion_json(study.exclusion_foil)}};

    j["fits"] = ordered_json::array();
    for (const auto& [v, fit] : models.fits) {
        j["fits"].push_back({{"variant", std::string(to_string(v))},
                             {"lambda_hat", fit.lambda_hat},
                             {"sse", fit.sse},
                             {"at_boundary", fit.at_boundary},
                             {"flat", fit.flat},
                             {"audit_adjusted", fit.audit_adjusted}});
    }
    j["loocv"] = ordered_json::array();
    for (const auto& [v, result] : models.loocv) {
        j["loocv"].push_back({{"variant", std::string(to_string(v))}, {"mse", result.mse}, {"n", result.errors.size()}});
    }
    j["comparisons"] = ordered_json::array();
    for (const auto& c : analysis.comparisons) {
        j["comparisons"].push_back({{"hypothesis", c.hypothesis},
                                    {"model", "full"},
                                    {"baseline", std::string(to_string(c.baseline))},
                                    {"available", c.available},
                                    {"mean_diff", nullable(c.available, c.test.mean_diff)},
                                    {"ci_level", config.ci_level},
                                    {"ci_lower", nullable(c.available, c.ci.lo)},
                                    {"ci_upper", nullable(c.available, c.ci.hi)},
                                    {"t", nullable(c.available, c.test.t)},
                                    {"df", nullable(c.available, c.test.df)},
                                    {"p", nullable(c.available, c.test.p)}});
    }
    const double h1_prop =
        analysis.h1_n > 0 ? static_cast<double>(analysis.h1_successes) / static_cast<double>(analysis.h1_n) : 0.0;
    j["h1"] = {{"successes", analysis.h1_successes}, {"n", analysis.h1_n}, {"proportion", h1_prop},
               {"chi2", analysis.h1.statistic},      {"df", analysis.h1.df}, {"p", analysis.h1.p}};
    j["h2"] = regression_json(analysis.h2);
    j["h3"] = regression_json(analysis.h3);
    j["spearman"] = {{"rho", analysis.rank.statistic},
                     {"df", analysis.rank.df},
                     {"p", analysis.rank.p},
                     {"n", analysis.fidelity.size()}};

    // Hypothesis rows.
    struct Row {
        std::string id, description, test;
        bool available;
        double p;
        bool supported;
        std::string p_cell;
    };
    std::vector<Row> rows;
    const bool h1_ok = h1_prop > 0.5 && analysis.h1.p < 0.05;
    rows.push_back({"H1", "Control participants expect the AI to choose the ground-truth label", "Chi-square", true,
                    analysis.h1.p, h1_ok, format_p_value(analysis.h1.p)});
    auto regression_row = [&](const char* id, const char* description, const RegressionFit& f) {
        const bool ok = f.beta[2] > 0.0 && f.beta[3] < 0.0 && f.p[2] < 0.05 && f.p[3] < 0.05;
        rows.push_back({id, description, "GLM", true, f.p[3], ok, format_p_value(f.p[3])});
    };
    regression_row("H2", "Explanations raise fidelity more when the AI is wrong than when it is right", analysis.h2);
    regression_row("H3", "The full model reproduces the explanation effect of H2", analysis.h3);
    for (const auto& c : analysis.comparisons) {
        const std::string description =
            "The full model predicts explanation responses better than the " + variant_label(c.baseline) + " model";
        const bool ok = c.available && c.test.mean_diff > 0.0 && c.test.p < 0.05;
        rows.push_back({c.hypothesis, description, "LOO-CV MSE", c.available, c.test.p, ok,
                        c.available ? format_p_value(c.test.p) : "not run"});
    }
    const bool rank_ok = analysis.rank.statistic > 0.0 && analysis.rank.p < 0.05;
    rows.push_back({"Spearman", "Modelled fidelity tracks measured fidelity", "Spearman correlation", true,
                    analysis.rank.p, rank_ok,
                    format_p_value(analysis.rank.p) + " (ρ = " + fixed(analysis.rank.statistic, 2) + ")"});

    j["hypotheses"] = ordered_json::array();
    Table t1;
    t1.title = "Table 1. Hypotheses and results";
    t1.header = {"Hypothesis", "Test", "P-value"};
    for (const auto& r : rows) {
        j["hypotheses"].push_back({{"id", r.id},
                                   {"description", r.description},
                                   {"test", r.test},
                                   {"p", nullable(r.available, r.p)},
                                   {"p_display", r.p_cell},
                                   {"supported", r.supported}});
        t1.rows.push_back({r.id + ". " + r.description, r.test, r.p_cell});
    }

    Table comparisons;
    comparisons.title = "LOO-CV model comparisons";
    const std::string level = general(config.ci_level);
    comparisons.header = {"Comparison", "MSE difference [" + level + "% CI]", "t", "p"};
    for (const auto& c : analysis.comparisons) {
        const std::string name = c.hypothesis + ". " + variant_label(c.baseline) + " minus full";
        if (!c.available) {
            comparisons.rows.push_back({name, "not run", "", ""});
            continue;
        }
        comparisons.rows.push_back({name,
                                    fixed(c.test.mean_diff, 3) + " [" + fixed(c.ci.lo, 3) + ", " + fixed(c.ci.hi, 3) +
                                        "]",
                                    "t(" + general(c.test.df) + ") = " + fixed(c.test.t, 2),
                                    format_p_value(c.test.p)});
    }
    comparisons.notes.push_back("Differences are per-trial squared errors of the baseline minus those of the full model.");

    Table fits;
    fits.title = "Fitted generalization rates";
    fits.header = {"Variant", "λ̂", "SSE", "Note"};
    for (const auto& [v, fit] : models.fits) {
        std::string note = fit.flat ? "flat objective" : (fit.at_boundary ? "at search boundary" : "");
        fits.rows.push_back({variant_label(v), general(fit.lambda_hat), general(fit.sse), note});
    }

    Table loo;
    loo.title = "LOO-CV mean squared error by variant";
    loo.header = {"Variant", "MSE"};
    for (const auto& [v, result] : models.loocv) loo.rows.push_back({variant_label(v), fixed(result.mse, 4)});

    Table excl;
    excl.title = "Drawing-experiment exclusion";
    excl.header = {"Target", "Threshold", "Included", "Excluded", "Iterations"};
    for (Choice target : {Choice::truth, Choice::foil}) {
        const auto& r = target == Choice::truth ? study.exclusion_truth : study.exclusion_foil;
        excl.rows.push_back({std::string(to_string(target)), general(r.threshold), std::to_string(r.included.size()),
                             std::to_string(r.excluded.size()), std::to_string(r.iterations.size())});
    }

    Table corpus;
    corpus.title = "Corpus";
    corpus.header = {"Quantity", "Value"};
    corpus.rows = {{"Trials", std::to_string(trials.size())},
                   {"Trials with a correct AI", std::to_string(n_correct)},
                   {"Control participants", std::to_string(control_ids.size())},
                   {"Explanation participants", std::to_string(explanation_ids.size())},
                   {"Responses dropped by the time filter", std::to_string(study.n_rt_dropped)},
                   {"Control responses choosing the ground truth",
                    std::to_string(analysis.h1_successes) + " of " + std::to_string(analysis.h1_n)},
                   {"Chi-square", fixed(analysis.h1.statistic, 2)}};

    const std::vector<Table> tables = {t1,
                                       comparisons,
                                       regression_table("Table 2. Empirical fidelity regression", analysis.h2),
                                       regression_table("Table 3. Model fidelity regression", analysis.h3),
                                       fits,
                                       loo,
                                       excl,
                                       corpus};
    j["tables"] = ordered_json::array();
    for (const auto& t : tables) j["tables"].push_back(table_json(t));
    j["warnings"] = warnings;

    Report report;
    report.json = j.dump(2) + "\n";
    report.markdown = render_markdown(tables, warnings);
    return report;
}

}  // namespace xlab
