#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "xlab/aggregation.hpp"
#include "xlab/calibration.hpp"
#include "xlab/config.hpp"
#include "xlab/corpus.hpp"
#include "xlab/explainee.hpp"
#include "xlab/stats.hpp"
#include "xlab/synth.hpp"
#include "xlab/teaching.hpp"

namespace xlab {

// Validated view of a resolved Config.
struct RunConfig {
    Config resolved;

    std::filesystem::path corpus_dir;
    std::filesystem::path saliency_dir;  // where observed maps are read
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> empirical_path;

    std::vector<Variant> variants;
    FitOptions fit;
    double lambda = 1.0;  // rate used by the predict subcommand

    double exclusion_threshold = 1.5;
    ExclusionScope exclusion_scope = ExclusionScope::participant;
    RtThresholds rt;
    PriorOptions prior;

    std::size_t n_boot = 10000;
    double ci_level = 95.0;

    GpConfig gp;                     // grid size is taken from each image
    bool gp_proportional_length = true;
    ClassifierSpec classifier;       // templates are loaded on demand
    std::filesystem::path templates_dir;

    SynthConfig synth;

    unsigned threads = 1;
    std::uint64_t seed = 0;

    // Every recognized key with its default value.
    static Config defaults();
    // Throws ConfigError on an invalid value.
    static RunConfig from_config(const Config& resolved);

    bool has_variant(Variant v) const;
    // Throws ConfigError unless the corpus manifests exist.
    void require_corpus() const;
    // Settings that can change results, as TOML (execution-only keys such
    // as the thread count and output directory are left out).
    std::string provenance_toml() const;
};

// Failure of one pipeline stage. `input_error` distinguishes bad inputs
// from computations that could not complete.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message, bool input_error)
        : std::runtime_error("stage '" + stage + "': " + message), stage_(std::move(stage)), input_error_(input_error) {}
    const std::string& stage() const noexcept { return stage_; }
    bool input_error() const noexcept { return input_error_; }

private:
    std::string stage_;
    bool input_error_;
};

enum class PrepareLevel { responses, consensus, evidence };

// Inputs shared by every analysis stage.
struct PreparedStudy {
    StudyCorpus corpus;
    std::vector<ResponseRecord> responses;  // after the response-time filter
    std::size_t n_rt_dropped = 0;
    ExclusionReport exclusion_truth;
    ExclusionReport exclusion_foil;
    std::vector<ConsensusMask> consensus;
    PriorTable priors;
    EmpiricalTable empirical;
    bool empirical_from_file = false;
    std::map<std::string, FloatGrid> observed;
    std::vector<double> empirical_values;  // manifest order
    std::vector<TrialEvidence> evidence;   // manifest order
};

PreparedStudy prepare_study(const RunConfig& config, PrepareLevel level);

struct ModelResults {
    std::map<Variant, FitResult> fits;
    std::map<Variant, std::vector<PosteriorRecord>> predictions;
    std::map<Variant, LoocvResult> loocv;
};

// Fits, predictions and LOO-CV for the configured variants.
ModelResults run_models(const RunConfig& config, const PreparedStudy& study, bool with_loocv = true);

struct Comparison {
    std::string hypothesis;
    Variant baseline = Variant::prior_only;
    bool available = false;
    PairedTest test;
    Interval ci;
};

struct FidelityRow {
    std::string trial_id;
    bool ai_correct = true;
    double control = 0.0;
    double explanation = 0.0;
    double model = 0.0;
};

struct AnalysisResults {
    std::size_t h1_successes = 0;
    std::size_t h1_n = 0;
    TestResult h1;
    RegressionFit h2;
    RegressionFit h3;
    TestResult rank;
    std::vector<Comparison> comparisons;
    std::vector<FidelityRow> fidelity;
};

// Requires a full-model fit in `models`.
AnalysisResults run_analysis(const RunConfig& config, const PreparedStudy& study, const ModelResults& models);

struct Report {
    std::string json;
    std::string markdown;
};

Report build_report(const RunConfig& config, const PreparedStudy& study, const ModelResults& models,
                    const AnalysisResults& analysis, const std::vector<std::string>& warnings);

std::string fidelity_by_condition_csv(const AnalysisResults& analysis);
std::string loocv_mse_by_variant_csv(const ModelResults& models);

// Subcommand bodies. Each writes under config.out_dir and throws StageError.
void cmd_simulate(const RunConfig& config);
void cmd_aggregate(const RunConfig& config);
void cmd_prior(const RunConfig& config);
void cmd_predict(const RunConfig& config);
void cmd_fit(const RunConfig& config);
void cmd_loocv(const RunConfig& config);
void cmd_analyze(const RunConfig& config);
void cmd_run(const RunConfig& config);

struct TeachFailure {
    std::string trial_id;
    std::string message;
};

// Saliency maps for both classes of every trial, written to
// <out_dir>/saliency. Per-trial failures are collected rather than thrown
// and listed in <out_dir>/saliency/teach_errors.csv.
std::vector<TeachFailure> cmd_teach(const RunConfig& config);

}  // namespace xlab
