#include "xlab/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "xlab/diag.hpp"
#include "xlab/error.hpp"

namespace xlab {

std::string_view to_string(Choice c) noexcept { return c == Choice::truth ? "truth" : "foil"; }

std::string_view to_string(Condition c) noexcept { return c == Condition::control ? "control" : "explanation"; }

Choice parse_choice(std::string_view text) {
    if (text == "truth") return Choice::truth;
    if (text == "foil") return Choice::foil;
    throw DataError("expected 'truth' or 'foil', got '" + std::string(text) + "'");
}

Condition parse_condition(std::string_view text) {
    if (text == "control") return Condition::control;
    if (text == "explanation") return Condition::explanation;
    throw DataError("expected 'control' or 'explanation', got '" + std::string(text) + "'");
}

const TrialSpec* StudyCorpus::find_trial(std::string_view id) const {
    auto it = std::lower_bound(trials.begin(), trials.end(), id,
                               [](const TrialSpec& t, std::string_view key) { return t.trial_id < key; });
    if (it == trials.end() || it->trial_id != id) return nullptr;
    return &*it;
}

std::filesystem::path StudyCorpus::image_file(const TrialSpec& trial) const {
    std::filesystem::path p(trial.image_path);
    return p.is_absolute() ? p : base_dir / p;
}

StudyCorpus make_corpus(std::vector<TrialSpec> trials, std::vector<ResponseRecord> responses,
                        std::vector<MaskRecord> masks, std::map<std::string, GridShape> image_shapes) {
    std::sort(trials.begin(), trials.end(),
              [](const TrialSpec& a, const TrialSpec& b) { return a.trial_id < b.trial_id; });
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto& t = trials[i];
        if (t.trial_id.empty()) throw DataError("empty trial_id");
        if (i > 0 && trials[i - 1].trial_id == t.trial_id) throw DataError("duplicate trial_id '" + t.trial_id + "'");
        if (t.truth_class == t.foil_class) {
            throw DataError("trial '" + t.trial_id + "': truth_class equals foil_class");
        }
    }

    StudyCorpus corpus;
    corpus.trials = std::move(trials);
    auto require_trial = [&](const std::string& id, const char* what) {
        if (!corpus.find_trial(id)) throw DataError(std::string(what) + " references unknown trial_id '" + id + "'");
    };

    auto response_key = [](const ResponseRecord& r) {
        return std::tie(r.participant_id, r.trial_id, r.condition);
    };
    std::sort(responses.begin(), responses.end(),
              [&](const ResponseRecord& a, const ResponseRecord& b) { return response_key(a) < response_key(b); });
    for (std::size_t i = 0; i < responses.size(); ++i) {
        const auto& r = responses[i];
        require_trial(r.trial_id, "response");
        if (!(r.rt_seconds >= 0.0)) throw DataError("negative rt_seconds for participant '" + r.participant_id + "'");
        if (i > 0 && response_key(responses[i - 1]) == response_key(r)) {
            throw DataError("duplicate response (" + r.participant_id + ", " + r.trial_id + ", " +
                            std::string(to_string(r.condition)) + ")");
        }
    }
    corpus.responses = std::move(responses);

    auto mask_key = [](const MaskRecord& m) { return std::tie(m.participant_id, m.trial_id, m.target); };
    std::sort(masks.begin(), masks.end(),
              [&](const MaskRecord& a, const MaskRecord& b) { return mask_key(a) < mask_key(b); });
    std::map<std::string, GridShape> mask_shapes;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const auto& m = masks[i];
        require_trial(m.trial_id, "mask");
        if (i > 0 && mask_key(masks[i - 1]) == mask_key(m)) {
            throw DataError("duplicate mask (" + m.participant_id + ", " + m.trial_id + ", " +
                            std::string(to_string(m.target)) + ")");
        }
        if (m.mask.channels() != 1) throw DataError("mask for trial '" + m.trial_id + "' must have one channel");
        for (double v : m.mask.values()) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw DataError("mask value outside [0,1] for participant '" + m.participant_id + "', trial '" +
                                m.trial_id + "'");
            }
        }
        const GridShape shape{m.mask.width(), m.mask.height(), 1};
        const GridShape* reference = nullptr;
        if (auto it = image_shapes.find(m.trial_id); it != image_shapes.end()) {
            reference = &it->second;
        } else if (auto jt = mask_shapes.find(m.trial_id); jt != mask_shapes.end()) {
            reference = &jt->second;
        }
        if (!reference) {
            mask_shapes.emplace(m.trial_id, shape);
        } else if (reference->width != shape.width || reference->height != shape.height) {
            throw DataError("dimension mismatch for trial '" + m.trial_id + "': mask of participant '" +
                            m.participant_id + "' is " + std::to_string(shape.width) + "x" +
                            std::to_string(shape.height) + ", expected " + std::to_string(reference->width) + "x" +
                            std::to_string(reference->height));
        }
    }
    corpus.masks = std::move(masks);
    corpus.image_shapes = std::move(image_shapes);
    return corpus;
}

namespace {

std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (quoted) throw FormatError("unterminated quote", line_no);
    fields.push_back(std::move(cur));
    return fields;
}

}  // namespace

std::vector<CsvRow> read_csv(const std::filesystem::path& path, std::string_view header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<CsvRow> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t columns = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!seen_header) {
            if (line != header) {
                throw FormatError(path.string() + ": expected header '" + std::string(header) + "'", line_no);
            }
            seen_header = true;
            columns = split_csv_line(header, line_no).size();
            continue;
        }
        if (line.empty()) continue;
        CsvRow row{line_no, split_csv_line(line, line_no)};
        if (row.fields.size() != columns) {
            throw FormatError(path.string() + ": expected " + std::to_string(columns) + " fields", line_no);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

StudyCorpus load_study(const std::filesystem::path& trials_csv, const std::filesystem::path& responses_csv,
                       const std::filesystem::path& masks_csv) {
    const auto trial_dir = trials_csv.parent_path();
    const auto mask_dir = masks_csv.parent_path();

    std::vector<TrialSpec> trials;
    std::map<std::string, GridShape> shapes;
    for (auto& row : read_csv(trials_csv, "trial_id,image_path,truth_class,foil_class,ai_class")) {
        try {
            TrialSpec t{row.fields[0], row.fields[1], row.fields[2], row.fields[3], parse_choice(row.fields[4])};
            std::filesystem::path image(t.image_path);
            if (!image.is_absolute()) image = trial_dir / image;
            if (std::filesystem::exists(image)) {
                shapes[t.trial_id] = read_grid_shape(image);
            } else {
                diag::warn("image for trial '" + t.trial_id + "' not found: " + image.string());
            }
            trials.push_back(std::move(t));
        } catch (const FormatError&) {
            throw;
        } catch (const DataError& e) {
            throw FormatError(trials_csv.string() + ": " + e.what(), row.line);
        }
    }

    std::vector<ResponseRecord> responses;
    for (auto& row : read_csv(responses_csv, "participant_id,trial_id,condition,choice,rt_seconds")) {
        double rt = 0.0;
        if (!parse_real(row.fields[4], rt) || rt < 0.0) {
            throw FormatError(responses_csv.string() + ": invalid rt_seconds '" + row.fields[4] + "'", row.line);
        }
        try {
            responses.push_back(
                {row.fields[0], row.fields[1], parse_condition(row.fields[2]), parse_choice(row.fields[3]), rt});
        } catch (const DataError& e) {
            throw FormatError(responses_csv.string() + ": " + e.what(), row.line);
        }
    }
    if (responses.empty()) diag::warn("responses file " + responses_csv.string() + " contains no responses");

    std::vector<MaskRecord> masks;
    for (auto& row : read_csv(masks_csv, "participant_id,trial_id,target,mask_path")) {
        Choice target;
        try {
            target = parse_choice(row.fields[2]);
        } catch (const DataError& e) {
            throw FormatError(masks_csv.string() + ": " + e.what(), row.line);
        }
        std::filesystem::path mp(row.fields[3]);
        if (!mp.is_absolute()) mp = mask_dir / mp;
        masks.push_back({row.fields[0], row.fields[1], target, read_grid(mp)});
    }

    auto corpus = make_corpus(std::move(trials), std::move(responses), std::move(masks), std::move(shapes));
    corpus.base_dir = trial_dir;
    return corpus;
}

StudyCorpus load_study_dir(const std::filesystem::path& dir) {
    return load_study(dir / "trials.csv", dir / "responses.csv", dir / "masks.csv");
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw DataError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_trials_csv(const std::vector<TrialSpec>& trials, const std::filesystem::path& path) {
    std::string out = "trial_id,image_path,truth_class,foil_class,ai_class\n";
    for (const auto& t : trials) {
        out += csv_escape(t.trial_id) + "," + csv_escape(t.image_path) + "," + csv_escape(t.truth_class) + "," +
               csv_escape(t.foil_class) + "," + std::string(to_string(t.ai_class)) + "\n";
    }
    write_text_file(path, out);
}

void write_responses_csv(const std::vector<ResponseRecord>& responses, const std::filesystem::path& path) {
    std::string out = "participant_id,trial_id,condition,choice,rt_seconds\n";
    for (const auto& r : responses) {
        out += csv_escape(r.participant_id) + "," + csv_escape(r.trial_id) + "," +
               std::string(to_string(r.condition)) + "," + std::string(to_string(r.choice)) + "," +
               format_real(r.rt_seconds) + "\n";
    }
    write_text_file(path, out);
}

void write_masks_csv(const std::vector<MaskManifestRow>& rows, const std::filesystem::path& path) {
    std::string out = "participant_id,trial_id,target,mask_path\n";
    for (const auto& r : rows) {
        out += csv_escape(r.participant_id) + "," + csv_escape(r.trial_id) + "," + std::string(to_string(r.target)) +
               "," + csv_escape(r.mask_path) + "\n";
    }
    write_text_file(path, out);
}

}  // namespace xlab
