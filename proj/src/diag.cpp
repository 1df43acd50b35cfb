#include "xlab/diag.hpp"

#include <iostream>
#include <mutex>

namespace xlab::diag {
namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

WarningSink& current_sink() {
    static WarningSink sink;
    return sink;
}

}  // namespace

void warn(const std::string& message) {
    std::lock_guard lock(sink_mutex());
    if (auto& sink = current_sink()) {
        sink(message);
    } else {
        std::cerr << "warning: " << message << '\n';
    }
}

WarningSink set_warning_sink(WarningSink sink) {
    std::lock_guard lock(sink_mutex());
    return std::exchange(current_sink(), std::move(sink));
}

WarningCapture::WarningCapture() {
    previous_ = set_warning_sink([this](const std::string& m) { messages_.push_back(m); });
}

WarningCapture::~WarningCapture() { set_warning_sink(std::move(previous_)); }

bool WarningCapture::contains(const std::string& needle) const {
    for (const auto& m : messages_) {
        if (m.find(needle) != std::string::npos) return true;
    }
    return false;
}

}  // namespace xlab::diag
