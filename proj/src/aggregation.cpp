#include "xlab/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "xlab/error.hpp"

namespace xlab {

bool ExclusionReport::keeps(const MaskRecord& m) const {
    if (scope == ExclusionScope::participant) return included.count(m.participant_id) > 0;
    return excluded_pairs.count({m.participant_id, m.trial_id}) == 0;
}

HalfNormalScores half_normal_scores(const std::vector<double>& values) {
    if (values.empty()) throw DataError("half_normal_scores: no values");
    double sum_sq = 0.0;
    for (double v : values) {
        if (!(v >= 0.0)) throw DataError("half_normal_scores: values must be nonnegative");
        sum_sq += v * v;
    }
    HalfNormalScores out;
    out.sigma_hat = std::sqrt(sum_sq / static_cast<double>(values.size()));
    out.z.reserve(values.size());
    for (double v : values) out.z.push_back(out.sigma_hat > 0.0 ? v / out.sigma_hat : 1.0);
    return out;
}

std::vector<ExclusionStep> iterate_exclusion(std::size_t n_items, double threshold, const ExclusionScorer& score) {
    if (!(threshold >= 1.0)) throw DataError("exclusion threshold must be at least 1");
    std::vector<std::size_t> included(n_items);
    for (std::size_t i = 0; i < n_items; ++i) included[i] = i;
    std::vector<ExclusionStep> steps;
    while (!included.empty()) {
        ExclusionStep step;
        step.items = included;
        step.scores = score(included);
        if (step.scores.size() != included.size()) throw ComputeError("exclusion scorer returned the wrong count");
        const auto hn = half_normal_scores(step.scores);
        step.sigma_hat = hn.sigma_hat;
        step.z = hn.z;
        std::vector<std::size_t> next;
        for (std::size_t k = 0; k < included.size(); ++k) {
            const bool out = step.z[k] > threshold;
            step.excluded.push_back(out);
            if (!out) next.push_back(included[k]);
        }
        const bool changed = next.size() != included.size();
        steps.push_back(std::move(step));
        if (!changed) break;
        included = std::move(next);
    }
    return steps;
}

namespace {

using MaskKey = std::pair<std::string, Choice>;

double l2_distance(const FloatGrid& a, const FloatGrid& b) {
    const auto va = a.values();
    const auto vb = b.values();
    double s = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) {
        const double d = va[i] - vb[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// Pixel mean over masks, summed in the given order.
FloatGrid mean_grid(const std::vector<const MaskRecord*>& masks) {
    FloatGrid out(masks.front()->mask.width(), masks.front()->mask.height(), 1);
    auto acc = out.values();
    for (const auto* m : masks) {
        if (!m->mask.same_shape(out)) throw DataError("mask shape mismatch in trial '" + m->trial_id + "'");
        const auto v = m->mask.values();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
    }
    const double n = static_cast<double>(masks.size());
    for (double& v : acc) v /= n;
    return out;
}

void check_threshold(double threshold) {
    // Below 1 every participant could be excluded (mean z^2 is always 1).
    if (!(threshold >= 1.0)) throw DataError("exclusion threshold must be at least 1");
}

ExclusionReport exclude_by_participant(const std::vector<MaskRecord>& masks, double threshold) {
    ExclusionReport report;
    report.threshold = threshold;
    report.scope = ExclusionScope::participant;
    std::vector<std::string> ids;
    for (const auto& m : masks) report.included.insert(m.participant_id);
    ids.assign(report.included.begin(), report.included.end());
    std::map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < ids.size(); ++i) index_of[ids[i]] = i;

    // Mean L2 distance of each included participant's masks to the
    // consensus of the included participants.
    auto score = [&](std::span<const std::size_t> included) {
        std::vector<bool> in(ids.size(), false);
        for (std::size_t i : included) in[i] = true;
        std::map<MaskKey, std::vector<const MaskRecord*>> by_image;
        for (const auto& m : masks) {
            if (in[index_of.at(m.participant_id)]) by_image[{m.trial_id, m.target}].push_back(&m);
        }
        std::map<MaskKey, FloatGrid> aggregate;
        for (const auto& [key, group] : by_image) aggregate.emplace(key, mean_grid(group));

        std::vector<double> sum(ids.size(), 0.0);
        std::vector<std::size_t> count(ids.size(), 0);
        for (const auto& m : masks) {
            const std::size_t i = index_of.at(m.participant_id);
            if (!in[i]) continue;
            sum[i] += l2_distance(m.mask, aggregate.at({m.trial_id, m.target}));
            count[i] += 1;
        }
        std::vector<double> out;
        for (std::size_t i : included) out.push_back(sum[i] / static_cast<double>(count[i]));
        return out;
    };

    for (const auto& step : iterate_exclusion(ids.size(), threshold, score)) {
        ExclusionIteration it;
        it.index = report.iterations.size();
        for (std::size_t k = 0; k < step.items.size(); ++k) {
            const std::string& pid = ids[step.items[k]];
            it.entries.push_back({pid, "", step.scores[k], step.sigma_hat, step.z[k], step.excluded[k]});
            if (step.excluded[k]) {
                report.included.erase(pid);
                report.excluded.insert(pid);
            }
        }
        report.iterations.push_back(std::move(it));
    }
    return report;
}

ExclusionReport exclude_by_image(const std::vector<MaskRecord>& masks, double threshold) {
    ExclusionReport report;
    report.threshold = threshold;
    report.scope = ExclusionScope::image;

    std::map<MaskKey, std::vector<const MaskRecord*>> by_image;
    for (const auto& m : masks) by_image[{m.trial_id, m.target}].push_back(&m);

    for (const auto& [key, group] : by_image) {
        std::vector<const MaskRecord*> kept = group;
        for (std::size_t iter = 0;; ++iter) {
            const FloatGrid aggregate = mean_grid(kept);
            std::vector<double> dist;
            for (const auto* m : kept) dist.push_back(l2_distance(m->mask, aggregate));
            const auto scores = half_normal_scores(dist);

            ExclusionIteration it;
            it.trial_id = key.first;
            it.index = iter;
            std::vector<const MaskRecord*> next;
            for (std::size_t i = 0; i < kept.size(); ++i) {
                const bool out = scores.z[i] > threshold;
                it.entries.push_back({kept[i]->participant_id, key.first, dist[i], scores.sigma_hat, scores.z[i], out});
                if (out) {
                    report.excluded_pairs.insert({kept[i]->participant_id, key.first});
                } else {
                    next.push_back(kept[i]);
                }
            }
            report.iterations.push_back(std::move(it));
            if (next.size() == kept.size()) break;
            kept = std::move(next);
        }
    }
    for (const auto& m : masks) {
        if (report.keeps(m)) report.included.insert(m.participant_id);
    }
    for (const auto& m : masks) {
        if (!report.included.count(m.participant_id)) report.excluded.insert(m.participant_id);
    }
    return report;
}

}  // namespace

ExclusionReport exclude_outliers(const std::vector<MaskRecord>& masks, double threshold, ExclusionScope scope) {
    if (masks.empty()) throw DataError("exclude_outliers: no masks");
    check_threshold(threshold);
    return scope == ExclusionScope::participant ? exclude_by_participant(masks, threshold)
                                                : exclude_by_image(masks, threshold);
}

std::vector<ConsensusMask> aggregate_consensus(const std::vector<MaskRecord>& included) {
    std::map<MaskKey, std::vector<const MaskRecord*>> by_image;
    for (const auto& m : included) by_image[{m.trial_id, m.target}].push_back(&m);
    std::vector<ConsensusMask> out;
    for (const auto& [key, group] : by_image) {
        out.push_back({key.first, key.second, mean_grid(group), group.size(), {}});
    }
    return out;
}

void require_consensus(const std::vector<ConsensusMask>& consensus, const std::vector<TrialSpec>& trials) {
    std::set<MaskKey> present;
    for (const auto& c : consensus) present.insert({c.trial_id, c.target});
    std::string missing;
    for (const auto& t : trials) {
        for (Choice target : {Choice::truth, Choice::foil}) {
            if (present.count({t.trial_id, target})) continue;
            if (!missing.empty()) missing += ", ";
            missing += t.trial_id + "/" + std::string(to_string(target));
        }
    }
    if (!missing.empty()) throw DataError("no included masks for: " + missing);
}

ConsensusMap to_consensus_map(const std::vector<ConsensusMask>& consensus) {
    ConsensusMap out;
    for (const auto& c : consensus) out.emplace(std::make_pair(c.trial_id, c.target), c.grid);
    return out;
}

double ProportionTable::at(const std::string& trial_id) const {
    auto it = entries.find(trial_id);
    if (it == entries.end()) throw DataError("no table entry for trial '" + trial_id + "'");
    return it->second.value;
}

std::map<std::string, double> ProportionTable::values() const {
    std::map<std::string, double> out;
    for (const auto& [id, e] : entries) out.emplace(id, e.value);
    return out;
}

namespace {

ProportionTable proportions(const std::vector<TrialSpec>& trials, const std::vector<ResponseRecord>& responses,
                            Condition condition) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // truth, total
    for (const auto& r : responses) {
        if (r.condition != condition) continue;
        auto& c = counts[r.trial_id];
        c.first += r.choice == Choice::truth ? 1 : 0;
        c.second += 1;
    }
    ProportionTable table;
    std::string missing;
    for (const auto& t : trials) {
        auto it = counts.find(t.trial_id);
        if (it == counts.end()) {
            missing += (missing.empty() ? "" : ", ") + t.trial_id;
            continue;
        }
        table.entries[t.trial_id] = {static_cast<double>(it->second.first) / static_cast<double>(it->second.second),
                                     it->second.second};
    }
    if (!missing.empty()) {
        throw DataError("no " + std::string(to_string(condition)) + " responses for trials: " + missing);
    }
    return table;
}

}  // namespace

PriorTable estimate_prior(const std::vector<TrialSpec>& trials, const std::vector<ResponseRecord>& responses,
                          PriorOptions options) {
    auto table = proportions(trials, responses, Condition::control);
    if (options.clamp) {
        for (auto& [id, e] : table.entries) {
            const double eps = 1.0 / (2.0 * static_cast<double>(e.n));
            e.value = std::clamp(e.value, eps, 1.0 - eps);
        }
    }
    return table;
}

EmpiricalTable empirical_table(const std::vector<TrialSpec>& trials, const std::vector<ResponseRecord>& responses) {
    return proportions(trials, responses, Condition::explanation);
}

std::vector<ResponseRecord> rt_filter(const std::vector<ResponseRecord>& responses, RtThresholds thresholds) {
    std::map<std::pair<std::string, Condition>, double> totals;
    for (const auto& r : responses) totals[{r.participant_id, r.condition}] += r.rt_seconds;
    std::vector<ResponseRecord> out;
    for (const auto& r : responses) {
        const double limit =
            r.condition == Condition::control ? thresholds.control_seconds : thresholds.explanation_seconds;
        if (totals.at({r.participant_id, r.condition}) >= limit) out.push_back(r);
    }
    return out;
}

std::string proportion_table_csv(const ProportionTable& table, const std::vector<TrialSpec>& trials) {
    std::string out = "trial_id,value,n\n";
    for (const auto& t : trials) {
        auto it = table.entries.find(t.trial_id);
        if (it == table.entries.end()) continue;
        out += csv_escape(t.trial_id) + "," + format_real(it->second.value) + "," + std::to_string(it->second.n) + "\n";
    }
    return out;
}

ProportionTable read_proportion_table(const std::filesystem::path& path) {
    ProportionTable table;
    for (const auto& row : read_csv(path, "trial_id,value,n")) {
        double v = 0.0;
        double n = 0.0;
        if (!parse_real(row.fields[1], v) || v < 0.0 || v > 1.0) {
            throw FormatError(path.string() + ": value must lie in [0,1]", row.line);
        }
        if (!parse_real(row.fields[2], n) || n < 0.0 || n != std::floor(n)) {
            throw FormatError(path.string() + ": n must be a nonnegative integer", row.line);
        }
        if (!table.entries.emplace(row.fields[0], ProportionEntry{v, static_cast<std::size_t>(n)}).second) {
            throw FormatError(path.string() + ": duplicate trial_id '" + row.fields[0] + "'", row.line);
        }
    }
    return table;
}

std::string exclusion_report_json(const ExclusionReport& report) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["threshold"] = report.threshold;
    j["scope"] = report.scope == ExclusionScope::participant ? "participant" : "image";
    j["iterations"] = ordered_json::array();
    for (const auto& it : report.iterations) {
        ordered_json ji;
        ji["index"] = it.index;
        if (!it.trial_id.empty()) ji["trial_id"] = it.trial_id;
        ji["entries"] = ordered_json::array();
        for (const auto& e : it.entries) {
            ji["entries"].push_back({{"participant_id", e.participant_id},
                                     {"mean_l2", e.mean_l2},
                                     {"sigma_hat", e.sigma_hat},
                                     {"z", e.z},
                                     {"excluded", e.excluded}});
        }
        j["iterations"].push_back(std::move(ji));
    }
    j["included"] = report.included;
    j["excluded"] = report.excluded;
    return j.dump(2) + "\n";
}

std::string exclusion_summary_csv(const ExclusionReport& report) {
    // Last score seen for every participant (participant scope) or pair (image scope).
    std::map<std::pair<std::string, std::string>, const ExclusionEntry*> last;
    for (const auto& it : report.iterations) {
        for (const auto& e : it.entries) last[{e.participant_id, e.trial_id}] = &e;
    }
    std::string out = "participant_id,trial_id,mean_l2,z,status\n";
    for (const auto& [key, e] : last) {
        out += csv_escape(key.first) + "," + csv_escape(key.second) + "," + format_real(e->mean_l2) + "," +
               format_real(e->z) + "," + (e->excluded ? "excluded" : "included") + "\n";
    }
    return out;
}

}  // namespace xlab
