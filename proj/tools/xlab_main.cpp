// Command-line front end: one subcommand per pipeline stage plus `run`.

#include <CLI11.hpp>
#include <iostream>

#include "xlab/config.hpp"
#include "xlab/error.hpp"
#include "xlab/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kInput = 2, kCompute = 3 };

struct CommonOptions {
    std::string config_file;
    std::vector<std::string> overrides;
    std::string corpus;
    std::string out;
    std::optional<std::int64_t> seed;
    std::optional<std::int64_t> threads;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("-c,--config", o.config_file, "TOML configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--set", o.overrides, "Override a config key (section.key=value); repeatable");
    cmd->add_option("--corpus", o.corpus, "Corpus directory (paths.corpus)");
    cmd->add_option("-o,--out", o.out, "Output directory (paths.out)");
    cmd->add_option("--seed", o.seed, "Random seed");
    cmd->add_option("--threads", o.threads, "Worker threads (results do not depend on it)");
}

xlab::RunConfig resolve(const CommonOptions& o) {
    xlab::Config user;
    if (!o.config_file.empty()) user = xlab::Config::load(o.config_file);
    for (const auto& s : o.overrides) user.apply_override(s);
    if (!o.corpus.empty()) user.set("paths.corpus", o.corpus);
    if (!o.out.empty()) user.set("paths.out", o.out);
    if (o.seed) user.set("seed", *o.seed);
    if (o.threads) user.set("threads", *o.threads);
    return xlab::RunConfig::from_config(xlab::RunConfig::defaults().merged(user));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian explainee model: saliency teaching, calibration and hypothesis tests"};
    app.require_subcommand(1);

    CommonOptions opts;
    struct Entry {
        const char* name;
        const char* help;
    };
    const Entry entries[] = {
        {"simulate", "Generate a synthetic study corpus"},
        {"teach", "Generate saliency maps for every trial and class"},
        {"aggregate", "Exclude outlying drawers and build consensus masks"},
        {"prior", "Control-condition priors and explanation-condition proportions"},
        {"predict", "Posterior predictions at a fixed rate (model.lambda)"},
        {"fit", "Fit the generalization rate of each parametric variant"},
        {"loocv", "Leave-one-out cross-validation of each variant"},
        {"analyze", "Hypothesis tests on the fitted full model"},
        {"run", "Full analysis with report.json and report.md"},
        {"defaults", "Print the default configuration"},
    };
    std::map<std::string, CLI::App*> commands;
    for (const auto& e : entries) {
        CLI::App* cmd = app.add_subcommand(e.name, e.help);
        if (std::string(e.name) != "defaults") add_common(cmd, opts);
        commands[e.name] = cmd;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    std::string which;
    for (const auto& [name, cmd] : commands) {
        if (cmd->parsed()) which = name;
    }

    try {
        if (which == "defaults") {
            std::cout << xlab::RunConfig::defaults().to_toml();
            return kOk;
        }
        const xlab::RunConfig config = resolve(opts);
        if (which == "simulate") {
            xlab::cmd_simulate(config);
        } else if (which == "teach") {
            const auto failures = xlab::cmd_teach(config);
            if (!failures.empty()) {
                for (const auto& f : failures) std::cerr << "error: trial " << f.trial_id << ": " << f.message << '\n';
                std::cerr << "error: " << failures.size() << " trial(s) failed; see "
                          << (config.out_dir / "saliency" / "teach_errors.csv").string() << '\n';
                return kInput;
            }
        } else if (which == "aggregate") {
            xlab::cmd_aggregate(config);
        } else if (which == "prior") {
            xlab::cmd_prior(config);
        } else if (which == "predict") {
            xlab::cmd_predict(config);
        } else if (which == "fit") {
            xlab::cmd_fit(config);
        } else if (which == "loocv") {
            xlab::cmd_loocv(config);
        } else if (which == "analyze") {
            xlab::cmd_analyze(config);
        } else if (which == "run") {
            try {
                xlab::cmd_run(config);
            } catch (const xlab::StageError& e) {
                std::cerr << "error: " << e.what() << '\n';
                return kCompute;
            }
        }
        return kOk;
    } catch (const xlab::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const xlab::StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.input_error() ? kInput : kCompute;
    } catch (const xlab::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kCompute;
    }
}
