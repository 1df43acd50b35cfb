#pragma once

#include <functional>
#include <string>
#include <vector>

namespace xlab::diag {

using WarningSink = std::function<void(const std::string&)>;

// Emits a warning through the current sink (stderr by default). Thread-safe.
void warn(const std::string& message);

// Replaces the sink and returns the previous one. Passing an empty function
// restores the stderr sink.
WarningSink set_warning_sink(WarningSink sink);

// RAII capture of warnings, used by tests and by the pipeline report.
class WarningCapture {
public:
    WarningCapture();
    ~WarningCapture();
    WarningCapture(const WarningCapture&) = delete;
    WarningCapture& operator=(const WarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }
    bool contains(const std::string& needle) const;

private:
    std::vector<std::string> messages_;
    WarningSink previous_;
};

}  // namespace xlab::diag
