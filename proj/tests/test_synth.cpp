#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "xlab/aggregation.hpp"
#include "xlab/calibration.hpp"
#include "xlab/corpus.hpp"
#include "xlab/error.hpp"
#include "xlab/special.hpp"
#include "xlab/synth.hpp"

using namespace xlab;

namespace {

std::filesystem::path tmp_dir(const std::string& name) {
    auto dir = std::filesystem::path(XLAB_TEST_TMP) / name;
    std::filesystem::remove_all(dir);
    return dir;
}

// Relative path -> contents for every regular file under dir.
std::map<std::string, std::string> tree(const std::filesystem::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).string()] = read_text_file(e.path());
    }
    return out;
}

SynthConfig small(std::uint64_t seed) {
    SynthConfig c;
    c.n_trials = 12;
    c.n_control = 15;
    c.n_explanation = 20;
    c.n_drawers = 6;
    c.grid_w = 12;
    c.grid_h = 10;
    c.n_classes = 5;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_SUITE("synth") {
    TEST_CASE("same seed gives byte-identical trees regardless of threads") {
        const auto a = tmp_dir("synth_a"), b = tmp_dir("synth_b"), c = tmp_dir("synth_c");
        write_study(generate_study(small(3), 1), a);
        write_study(generate_study(small(3), 4), b);
        write_study(generate_study(small(4), 1), c);
        const auto ta = tree(a), tb = tree(b), tc = tree(c);
        CHECK(ta.size() == tb.size());
        CHECK(ta == tb);
        CHECK(ta != tc);
        CHECK(ta.count("ground_truth.json") == 1);
        CHECK(ta.count("model_empirical.csv") == 1);
        CHECK(ta.count("templates/class000.fgrid") == 1);
    }

    TEST_CASE("written corpus loads back identically") {
        const auto dir = tmp_dir("synth_load");
        const SyntheticStudy s = generate_study(small(5));
        write_study(s, dir);
        const StudyCorpus c = load_study_dir(dir);
        REQUIRE(c.trials.size() == s.corpus.trials.size());
        CHECK(c.responses.size() == s.corpus.responses.size());
        REQUIRE(c.masks.size() == s.corpus.masks.size());
        for (std::size_t i = 0; i < c.masks.size(); ++i) CHECK(c.masks[i].mask == s.corpus.masks[i].mask);
        CHECK(c.image_shapes.size() == 12);
        const auto emp = read_proportion_table(dir / "model_empirical.csv");
        for (const auto& t : s.truth) CHECK(emp.at(t.trial_id) == t.posterior_truth);
    }

    TEST_CASE("default configuration: 89 trials, 41 control and 46 explanation participants") {
        const SyntheticStudy s = generate_study(SynthConfig{}, 2);
        CHECK(s.corpus.trials.size() == 89);
        std::set<std::string> control, explanation;
        for (const auto& r : s.corpus.responses) {
            (r.condition == Condition::control ? control : explanation).insert(r.participant_id);
        }
        CHECK(control.size() == 41);
        CHECK(explanation.size() == 46);
        std::size_t mistakes = 0;
        for (const auto& t : s.corpus.trials) mistakes += !t.ai_correct();
        CHECK(mistakes == 59);
        // Every response-time total clears the default thresholds.
        CHECK(rt_filter(s.corpus.responses).size() == s.corpus.responses.size());
    }

    TEST_CASE("noise-free empirical table recovers the generating rate") {
        for (double lambda : {2.0, 5.0}) {
            SynthConfig c = small(7);
            c.n_trials = 30;
            c.true_lambda = lambda;
            const SyntheticStudy s = generate_study(c);
            std::vector<TrialEvidence> ev;
            std::vector<double> emp;
            for (const auto& t : s.truth) {
                ev.push_back(t.evidence);
                emp.push_back(s.model_empirical.at(t.trial_id));
            }
            const FitResult fit = fit_lambda(ev, emp, Variant::full);
            CHECK(std::abs(fit.lambda_hat / lambda - 1) <= 1e-3);
        }
    }

    TEST_CASE("large explanation samples approach the model posterior") {
        SynthConfig c = small(8);
        c.n_trials = 4;
        c.n_explanation = 100000;
        const SyntheticStudy s = generate_study(c);
        const EmpiricalTable emp = empirical_table(s.corpus.trials, s.corpus.responses);
        for (const auto& t : s.truth) {
            const double p = t.posterior_truth;
            CHECK(std::abs(emp.at(t.trial_id) - p) <= 4 * std::sqrt(p * (1 - p) / 1e5));
        }
    }

    TEST_CASE("with responses at the true rate the full model beats the prior on most seeds") {
        std::size_t wins = 0;
        const std::size_t seeds = 20;
        for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
            SynthConfig c;
            c.seed = seed;
            c.n_drawers = 8;
            c.grid_w = 16;
            c.grid_h = 16;
            const SyntheticStudy s = generate_study(c);
            const EmpiricalTable emp_table = empirical_table(s.corpus.trials, s.corpus.responses);
            std::vector<TrialEvidence> ev;
            std::vector<double> emp;
            for (const auto& t : s.truth) {
                ev.push_back(t.evidence);
                emp.push_back(emp_table.at(t.trial_id));
            }
            FitOptions opt;
            opt.audit_points = 200;
            const double full = loocv(ev, emp, Variant::full, opt).mse;
            const double base = loocv(ev, emp, Variant::prior_only, opt).mse;
            wins += full <= base;
        }
        // One-sided sign test against a fair coin.
        const double p = 1.0 - regularized_incomplete_beta(static_cast<double>(seeds - wins + 1),
                                                           static_cast<double>(wins), 0.5);
        CAPTURE(wins);
        CHECK(p < 0.05);
    }

    TEST_CASE("configuration and id rules") {
        SynthConfig c;
        c.n_trials = 0;
        CHECK_THROWS_AS(c.validate(), DataError);
        c = SynthConfig{};
        c.true_lambda = -1;
        CHECK_THROWS_AS(generate_study(c), DataError);
        c = SynthConfig{};
        c.n_classes = 1;
        CHECK_THROWS_AS(c.validate(), DataError);
        CHECK(synth_trial_id(7, 89) == "t007");
        CHECK(synth_trial_id(7, 5000) == "t0007");
        CHECK(synth_drawer_id(Choice::foil, 3, 20) == "df003");
    }

    TEST_CASE("unwritable output directory") {
        const auto dir = tmp_dir("synth_blocked");
        std::filesystem::create_directories(dir);
        write_text_file(dir / "file", "x");
        CHECK_THROWS_AS(write_study(generate_study(small(1)), dir / "file" / "sub"), DataError);
    }
}
