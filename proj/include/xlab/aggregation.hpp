#pragma once

#include <functional>
#include <map>
#include <span>
#include <set>
#include <string>
#include <vector>

#include "xlab/corpus.hpp"
#include "xlab/explainee.hpp"

namespace xlab {

enum class ExclusionScope {
    participant,  // drop every mask of an outlying participant
    image,        // score and drop (participant, image) pairs per image
};

struct ExclusionEntry {
    std::string participant_id;
    std::string trial_id;  // empty in participant scope
    double mean_l2 = 0.0;
    double sigma_hat = 0.0;
    double z = 0.0;
    bool excluded = false;
};

struct ExclusionIteration {
    std::string trial_id;  // empty in participant scope
    std::size_t index = 0;
    std::vector<ExclusionEntry> entries;
};

struct ExclusionReport {
    double threshold = 1.5;
    ExclusionScope scope = ExclusionScope::participant;
    std::vector<ExclusionIteration> iterations;
    // Participant scope: included participants. Image scope: participants
    // with at least one included mask.
    std::set<std::string> included;
    std::set<std::string> excluded;
    // Image scope only: excluded (participant, trial) pairs.
    std::set<std::pair<std::string, std::string>> excluded_pairs;

    bool keeps(const MaskRecord& m) const;
};

struct HalfNormalScores {
    double sigma_hat = 0.0;
    std::vector<double> z;
};

// sigma_hat = sqrt(mean(x^2)) (half-normal scale MLE), z = x / sigma_hat.
// If every value is zero, sigma_hat = 0 and every z is 1.
HalfNormalScores half_normal_scores(const std::vector<double>& values);

// One round of iterative exclusion over abstract items.
struct ExclusionStep {
    std::vector<std::size_t> items;  // included at the start of the round
    std::vector<double> scores;
    double sigma_hat = 0.0;
    std::vector<double> z;
    std::vector<bool> excluded;
};

// Deviation score of each included item, in the order given.
using ExclusionScorer = std::function<std::vector<double>(std::span<const std::size_t> included)>;

// Scores the included items, drops those with z above `threshold`, and
// repeats until a round drops nothing. The last step never excludes.
std::vector<ExclusionStep> iterate_exclusion(std::size_t n_items, double threshold, const ExclusionScorer& score);

// Iterative consensus exclusion over the masks of one drawing condition.
// Throws DataError on empty input.
ExclusionReport exclude_outliers(const std::vector<MaskRecord>& masks, double threshold = 1.5,
                                 ExclusionScope scope = ExclusionScope::participant);

struct ConsensusMask {
    std::string trial_id;
    Choice target = Choice::truth;
    FloatGrid grid;
    std::size_t n_included = 0;
    std::set<std::string> excluded;
};

// Pixel-wise raw mean of the masks per (trial, target).
std::vector<ConsensusMask> aggregate_consensus(const std::vector<MaskRecord>& included);
// Throws DataError naming every (trial, target) pair without a consensus mask.
void require_consensus(const std::vector<ConsensusMask>& consensus, const std::vector<TrialSpec>& trials);
ConsensusMap to_consensus_map(const std::vector<ConsensusMask>& consensus);

struct ProportionEntry {
    double value = 0.0;
    std::size_t n = 0;
};

// trial_id -> proportion of truth choices.
struct ProportionTable {
    std::map<std::string, ProportionEntry> entries;

    double at(const std::string& trial_id) const;
    std::map<std::string, double> values() const;
};
using PriorTable = ProportionTable;
using EmpiricalTable = ProportionTable;

struct PriorOptions {
    // Clamp priors to [eps, 1 - eps] with eps = 1 / (2 n) per trial.
    bool clamp = false;
};

// Control-condition truth proportion per trial. Every trial needs at least
// one control response.
PriorTable estimate_prior(const std::vector<TrialSpec>& trials, const std::vector<ResponseRecord>& responses,
                          PriorOptions options = {});

// Explanation-condition truth proportion per trial.
EmpiricalTable empirical_table(const std::vector<TrialSpec>& trials, const std::vector<ResponseRecord>& responses);

struct RtThresholds {
    double control_seconds = 180.0;
    double explanation_seconds = 300.0;
};

// Drops all responses of a participant (per condition) whose total response
// time is below the condition threshold.
std::vector<ResponseRecord> rt_filter(const std::vector<ResponseRecord>& responses, RtThresholds thresholds = {});

// CSV `trial_id,value,n`.
std::string proportion_table_csv(const ProportionTable& table, const std::vector<TrialSpec>& trials);
ProportionTable read_proportion_table(const std::filesystem::path& path);

// JSON (iteration by iteration) and summary CSV.
std::string exclusion_report_json(const ExclusionReport& report);
std::string exclusion_summary_csv(const ExclusionReport& report);

}  // namespace xlab
