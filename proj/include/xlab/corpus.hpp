#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xlab/grid.hpp"

namespace xlab {

// One of the two alternatives of a 2AFC trial. Also used for the AI's
// classification and for the class a drawn mask explains.
enum class Choice { truth, foil };
enum class Condition { control, explanation };

std::string_view to_string(Choice c) noexcept;
std::string_view to_string(Condition c) noexcept;
Choice parse_choice(std::string_view text);
Condition parse_condition(std::string_view text);

inline Choice other(Choice c) noexcept { return c == Choice::truth ? Choice::foil : Choice::truth; }

struct TrialSpec {
    std::string trial_id;
    std::string image_path;
    std::string truth_class;
    std::string foil_class;
    Choice ai_class = Choice::truth;

    bool ai_correct() const noexcept { return ai_class == Choice::truth; }
    const std::string& class_name(Choice c) const { return c == Choice::truth ? truth_class : foil_class; }
};

struct ResponseRecord {
    std::string participant_id;
    std::string trial_id;
    Condition condition = Condition::control;
    Choice choice = Choice::truth;
    double rt_seconds = 0.0;
};

struct MaskRecord {
    std::string participant_id;
    std::string trial_id;
    Choice target = Choice::truth;
    FloatGrid mask;
};

// Cross-validated study data. Rows are stored in canonical order (trials by
// id, responses and masks by key), so the corpus does not depend on the row
// order of the source files.
struct StudyCorpus {
    std::vector<TrialSpec> trials;
    std::vector<ResponseRecord> responses;
    std::vector<MaskRecord> masks;
    // Known image dimensions per trial id (absent when the image file is missing).
    std::map<std::string, GridShape> image_shapes;
    // Directory image paths are resolved against.
    std::filesystem::path base_dir;

    const TrialSpec* find_trial(std::string_view id) const;
    std::filesystem::path image_file(const TrialSpec& trial) const;
};

// Canonicalizes and validates: unique keys, referential integrity, mask
// dimensions consistent per trial (and with the image when known), mask
// values in [0,1]. Throws DataError.
StudyCorpus make_corpus(std::vector<TrialSpec> trials, std::vector<ResponseRecord> responses,
                        std::vector<MaskRecord> masks, std::map<std::string, GridShape> image_shapes = {});

// Reads trials.csv, responses.csv and masks.csv. Paths inside a CSV are
// resolved relative to the directory of that CSV.
StudyCorpus load_study(const std::filesystem::path& trials_csv, const std::filesystem::path& responses_csv,
                       const std::filesystem::path& masks_csv);

// load_study on <dir>/trials.csv, <dir>/responses.csv, <dir>/masks.csv.
StudyCorpus load_study_dir(const std::filesystem::path& dir);

// Minimal CSV support (comma separated, optional double quotes).
struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

// Reads a CSV whose first line must equal `header` (comma-joined). An empty
// file yields no rows.
std::vector<CsvRow> read_csv(const std::filesystem::path& path, std::string_view header);
std::string csv_escape(std::string_view field);

void write_trials_csv(const std::vector<TrialSpec>& trials, const std::filesystem::path& path);
void write_responses_csv(const std::vector<ResponseRecord>& responses, const std::filesystem::path& path);

struct MaskManifestRow {
    std::string participant_id;
    std::string trial_id;
    Choice target = Choice::truth;
    std::string mask_path;
};
void write_masks_csv(const std::vector<MaskManifestRow>& rows, const std::filesystem::path& path);

// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace xlab
