#include <doctest.h>

#include <filesystem>
#include <json.hpp>

#include "xlab/error.hpp"
#include "xlab/pipeline.hpp"

using namespace xlab;

namespace {

const std::filesystem::path& small_corpus() {
    static const std::filesystem::path dir = [] {
        auto d = std::filesystem::path(XLAB_TEST_TMP) / "pipeline_corpus";
        std::filesystem::remove_all(d);
        SynthConfig c;
        c.n_trials = 24;
        c.n_drawers = 6;
        c.grid_w = 12;
        c.grid_h = 12;
        c.seed = 11;
        write_study(generate_study(c), d);
        return d;
    }();
    return dir;
}

RunConfig config_for(const std::filesystem::path& out, std::initializer_list<std::string> extra = {}) {
    Config o;
    o.apply_override("paths.corpus=" + small_corpus().string());
    o.apply_override("paths.out=" + out.string());
    o.apply_override("bootstrap.n_boot=500");
    o.apply_override("model.audit_points=200");
    for (const auto& e : extra) o.apply_override(e);
    return RunConfig::from_config(RunConfig::defaults().merged(o));
}

std::string md_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '*' || c == '|' || c == '_') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace

TEST_SUITE("pipeline") {
    TEST_CASE("stages produce consistent results") {
        const RunConfig cfg = config_for(std::filesystem::path(XLAB_TEST_TMP) / "pipeline_out");
        const PreparedStudy s = prepare_study(cfg, PrepareLevel::evidence);
        REQUIRE(s.evidence.size() == 24);
        CHECK(s.empirical_values.size() == 24);
        CHECK(s.consensus.size() == 48);
        CHECK(s.observed.size() == 24);
        CHECK_FALSE(s.empirical_from_file);

        const ModelResults m = run_models(cfg, s);
        CHECK(m.fits.size() == 3);
        CHECK(m.loocv.size() == 4);
        for (const auto& [v, r] : m.loocv) CHECK(r.errors.size() == 24);

        const AnalysisResults a = run_analysis(cfg, s, m);
        CHECK(a.fidelity.size() == 24);
        CHECK(a.h2.n == 48);
        CHECK(a.comparisons.size() == 3);
        for (const auto& c : a.comparisons) CHECK(c.available);

        const Report r = build_report(cfg, s, m, a, {"example warning"});
        const auto j = nlohmann::json::parse(r.json);
        CHECK(j["format"] == "xlab-report");
        CHECK(j["hypotheses"].size() == 7);
        CHECK(j["corpus"]["n_trials"] == 24);
        CHECK(j["warnings"][0] == "example warning");
        CHECK(j["config"].count("threads") == 0);
        // Every table cell of the JSON appears in the markdown rendering.
        for (const auto& t : j["tables"]) {
            CHECK(r.markdown.find("## " + t["title"].get<std::string>()) != std::string::npos);
            for (const auto& row : t["rows"]) {
                std::string line = "|";
                for (const auto& cell : row) line += " " + md_escape(cell.get<std::string>()) + " |";
                CHECK(r.markdown.find(line) != std::string::npos);
            }
        }

        const std::string fid = fidelity_by_condition_csv(a);
        CHECK(fid.rfind("trial_id,ai_correct,control_fidelity,explanation_fidelity,model_fidelity\n", 0) == 0);
        CHECK(std::count(fid.begin(), fid.end(), '\n') == 25);
        const std::string mse = loocv_mse_by_variant_csv(m);
        CHECK(std::count(mse.begin(), mse.end(), '\n') == 5);
    }

    TEST_CASE("89-trial corpus gives 178 regression rows") {
        const auto dir = std::filesystem::path(XLAB_TEST_TMP) / "pipeline_full";
        std::filesystem::remove_all(dir);
        SynthConfig c;
        c.n_drawers = 6;
        c.grid_w = 8;
        c.grid_h = 8;
        write_study(generate_study(c), dir);
        Config o;
        o.apply_override("paths.corpus=" + dir.string());
        o.apply_override("model.variants=full");
        const RunConfig cfg = RunConfig::from_config(RunConfig::defaults().merged(o));
        const PreparedStudy s = prepare_study(cfg, PrepareLevel::evidence);
        const ModelResults m = run_models(cfg, s, false);
        const AnalysisResults a = run_analysis(cfg, s, m);
        CHECK(a.h2.n == 178);
        CHECK(a.h3.n == 178);
        CHECK(a.h1_n == 89 * 41);
        for (const auto& cmp : a.comparisons) CHECK_FALSE(cmp.available);
    }

    TEST_CASE("empirical table from file") {
        const RunConfig cfg =
            config_for(std::filesystem::path(XLAB_TEST_TMP) / "pipeline_emp",
                       {"paths.empirical=" + (small_corpus() / "model_empirical.csv").string(), "model.variants=full"});
        const PreparedStudy s = prepare_study(cfg, PrepareLevel::evidence);
        CHECK(s.empirical_from_file);
        const FitResult fit = run_models(cfg, s, false).fits.at(Variant::full);
        CHECK(std::abs(fit.lambda_hat / 5.0 - 1) <= 1e-3);
    }

    TEST_CASE("stage errors name the stage") {
        const auto dir = std::filesystem::path(XLAB_TEST_TMP) / "pipeline_bad";
        std::filesystem::remove_all(dir);
        std::filesystem::copy(small_corpus(), dir, std::filesystem::copy_options::recursive);
        write_text_file(dir / "model_empirical.csv", "trial_id,value,n\nt000,0.5,1\n");
        Config o;
        o.apply_override("paths.corpus=" + dir.string());
        o.apply_override("paths.empirical=" + (dir / "model_empirical.csv").string());
        const RunConfig cfg = RunConfig::from_config(RunConfig::defaults().merged(o));
        try {
            prepare_study(cfg, PrepareLevel::evidence);
            FAIL("expected StageError");
        } catch (const StageError& e) {
            CHECK(e.stage() == "empirical");
            CHECK(e.input_error());
            CHECK(std::string(e.what()).find("t001") != std::string::npos);
        }
        Config none;
        none.apply_override("paths.corpus=" + (dir / "nothing").string());
        CHECK_THROWS_AS(RunConfig::from_config(RunConfig::defaults().merged(none)).require_corpus(), ConfigError);
    }

    TEST_CASE("run writes the full output set") {
        const auto out = std::filesystem::path(XLAB_TEST_TMP) / "pipeline_run";
        std::filesystem::remove_all(out);
        cmd_run(config_for(out));
        for (const char* f : {"report.json", "report.md", "config.toml", "fidelity_by_condition.csv",
                              "loocv_mse_by_variant.csv", "priors.csv", "empirical.csv", "exclusion_truth.json",
                              "exclusion_foil.csv", "posteriors_full.csv", "posteriors_prior_only.csv",
                              "loocv_beta.json", "fit_l1.json"}) {
            CAPTURE(f);
            CHECK(std::filesystem::is_regular_file(out / f));
        }
        CHECK_FALSE(std::filesystem::exists(out / "fit_prior_only.json"));
        const Config provenance = Config::load(out / "config.toml");
        CHECK_FALSE(provenance.has("threads"));
        CHECK(provenance.get_string("paths.corpus") == small_corpus().string());
    }
}
