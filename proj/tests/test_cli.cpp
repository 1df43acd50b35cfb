#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <regex>
#include <set>
#include <sys/wait.h>

#include "xlab/corpus.hpp"

using namespace xlab;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) {
    auto dir = fs::path(XLAB_TEST_TMP) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Runs the CLI with stdout/stderr captured to <log>; returns the exit code.
int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("'") + XLAB_CLI + "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_text_file(e.path());
    }
    return out;
}

const std::string kSmall =
    "--set synth.n_trials=20 --set synth.n_drawers=6 --set synth.grid_w=10 --set synth.grid_h=10 ";

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("simulate is deterministic and validates counts") {
        const auto dir = tmp("cli_sim");
        CHECK(run_cli("simulate " + kSmall + "--seed 5 -o '" + (dir / "a").string() + "'", dir / "log") == 0);
        CHECK(run_cli("simulate " + kSmall + "--seed 5 --threads 3 -o '" + (dir / "b").string() + "'", dir / "log") == 0);
        CHECK(tree(dir / "a") == tree(dir / "b"));
        CHECK(run_cli("simulate --set synth.n_trials=0 -o '" + (dir / "c").string() + "'", dir / "log") == 1);
        CHECK(read_text_file(dir / "log").find("synth.n_trials") != std::string::npos);
        CHECK(run_cli("simulate --set synth.bogus=1 -o x", dir / "log") == 1);
        CHECK(run_cli("frobnicate", dir / "log") == 1);
        CHECK(run_cli("defaults", dir / "log") == 0);
        CHECK(read_text_file(dir / "log").find("[model]") != std::string::npos);
    }

    TEST_CASE("noise-free empirical table recovers the generating rate end to end") {
        const auto dir = tmp("cli_fit");
        const auto corpus = dir / "corpus";
        REQUIRE(run_cli("simulate --set synth.true_lambda=5 --seed 2 -o '" + corpus.string() + "'", dir / "log") == 0);
        REQUIRE(run_cli("fit --corpus '" + corpus.string() + "' --set 'paths.empirical=" +
                         (corpus / "model_empirical.csv").string() + "' --set model.variants=full -o '" +
                         (dir / "out").string() + "'",
                     dir / "log") == 0);
        const auto j = nlohmann::json::parse(read_text_file(dir / "out" / "fit_full.json"));
        const double lambda = j["lambda_hat"];
        CHECK(std::abs(lambda / 5.0 - 1) <= 5e-3);
    }

    TEST_CASE("run report: hypotheses, markdown and json agree, schema, thread independence") {
        const auto dir = tmp("cli_run");
        const auto corpus = dir / "corpus";
        REQUIRE(run_cli("simulate " + kSmall + "--seed 9 -o '" + corpus.string() + "'", dir / "log") == 0);
        const std::string common = "run --corpus '" + corpus.string() + "' --set bootstrap.n_boot=500 ";
        REQUIRE(run_cli(common + "--threads 1 -o '" + (dir / "r1").string() + "'", dir / "log") == 0);
        REQUIRE(run_cli(common + "--threads 3 -o '" + (dir / "r3").string() + "'", dir / "log") == 0);
        CHECK(tree(dir / "r1") == tree(dir / "r3"));

        const std::string json_text = read_text_file(dir / "r1" / "report.json");
        const auto j = nlohmann::json::parse(json_text);
        CHECK(j["hypotheses"].size() == 7);
        const std::string md = read_text_file(dir / "r1" / "report.md");
        // Every number shown in the markdown also appears in the json.
        const std::regex number(R"(-?\d+(\.\d+)?)");
        std::set<std::string> missing;
        for (auto it = std::sregex_iterator(md.begin(), md.end(), number); it != std::sregex_iterator(); ++it) {
            if (json_text.find(it->str()) == std::string::npos) missing.insert(it->str());
        }
        CHECK(missing.empty());

        const std::string check = "python3 -c 'import json,sys,jsonschema; jsonschema.validate(json.load(open(sys.argv[1])), "
                                  "json.load(open(sys.argv[2])))' '" +
                                  (dir / "r1" / "report.json").string() + "' '" + XLAB_SCHEMA + "' > '" +
                                  (dir / "schema.log").string() + "' 2>&1";
        const int status = std::system(check.c_str());
        CAPTURE(read_text_file(dir / "schema.log"));
        CHECK(WIFEXITED(status));
        CHECK(WEXITSTATUS(status) == 0);
    }

    TEST_CASE("run reports input failures with exit code 3") {
        const auto dir = tmp("cli_run_bad");
        CHECK(run_cli("run --corpus '" + (dir / "none").string() + "' -o '" + (dir / "o").string() + "'", dir / "log") == 1);
        const auto corpus = dir / "corpus";
        REQUIRE(run_cli("simulate " + kSmall + "-o '" + corpus.string() + "'", dir / "log") == 0);
        write_text_file(corpus / "masks" / "dt000" / "t000.truth.fgrid", "fgrid 2 2 1\n0 0 0 0\n");
        CHECK(run_cli("run --corpus '" + corpus.string() + "' -o '" + (dir / "o").string() + "'", dir / "log") == 3);
        CHECK(read_text_file(dir / "log").find("stage 'load'") != std::string::npos);
    }

    TEST_CASE("teach writes maps and lists failed trials") {
        const auto dir = tmp("cli_teach");
        const auto corpus = dir / "corpus";
        REQUIRE(run_cli("simulate --set synth.n_trials=4 --set synth.n_drawers=3 --set synth.grid_w=8 "
                     "--set synth.grid_h=8 -o '" +
                         corpus.string() + "'",
                     dir / "log") == 0);
        const std::string args = "teach --corpus '" + corpus.string() + "' --set gp.n_samples=50 -o ";
        REQUIRE(run_cli(args + "'" + (dir / "ok").string() + "'", dir / "log") == 0);
        std::size_t maps = 0;
        for (const auto& e : fs::directory_iterator(dir / "ok" / "saliency")) {
            const auto ext = e.path().extension();
            maps += ext == ".fgrid" || ext == ".json";
        }
        CHECK(maps == 16);
        CHECK(read_text_file(dir / "ok" / "saliency" / "teach_errors.csv") == "trial_id,error\n");

        fs::remove(corpus / "images" / "t002.fgrid");
        CHECK(run_cli(args + "'" + (dir / "bad").string() + "'", dir / "log") == 2);
        const std::string errors = read_text_file(dir / "bad" / "saliency" / "teach_errors.csv");
        CHECK(errors.find("t002") != std::string::npos);
        CHECK(fs::exists(dir / "bad" / "saliency" / "t003.foil.fgrid"));
    }
}
