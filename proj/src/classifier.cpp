#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <json.hpp>

#include "xlab/error.hpp"
#include "xlab/teaching.hpp"

namespace xlab {

using nlohmann::json;

TemplateClassifier::TemplateClassifier(std::map<std::string, FloatGrid> templates, double temperature)
    : templates_(std::move(templates)), temperature_(temperature) {
    if (!(temperature_ > 0.0)) throw DataError("classifier temperature must be positive");
    if (templates_.empty()) throw DataError("template classifier needs at least one template");
    const FloatGrid& first = templates_.begin()->second;
    for (const auto& [name, t] : templates_) {
        if (!t.same_shape(first)) throw DataError("template '" + name + "' differs in shape from the others");
    }
}

std::vector<std::string> TemplateClassifier::classes() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : templates_) out.push_back(name);
    return out;
}

std::vector<double> TemplateClassifier::classify(const FloatGrid& image, std::span<const std::string> classes) {
    if (classes.empty()) throw DataError("classify: empty class list");
    std::vector<double> scores;
    scores.reserve(classes.size());
    for (const auto& name : classes) {
        auto it = templates_.find(name);
        if (it == templates_.end()) throw DataError("no template for class '" + name + "'");
        if (!it->second.same_shape(image)) {
            throw DataError("image shape " + image.shape_string() + " does not match template " +
                            it->second.shape_string());
        }
        const auto a = image.values();
        const auto b = it->second.values();
        double dot = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
        scores.push_back(dot / temperature_);
    }
    const double top = *std::max_element(scores.begin(), scores.end());
    double total = 0.0;
    for (double& s : scores) {
        s = std::exp(s - top);
        total += s;
    }
    for (double& s : scores) s /= total;
    return scores;
}

namespace {

constexpr std::size_t kTranscriptLines = 6;
constexpr std::size_t kExcerptChars = 200;

std::string excerpt(const std::string& line) {
    return line.size() <= kExcerptChars ? line : line.substr(0, kExcerptChars) + "...";
}

}  // namespace

ExternalClassifier::ExternalClassifier(const std::string& command, std::chrono::milliseconds timeout)
    : command_(command), timeout_(timeout) {
    int in_pipe[2];
    int out_pipe[2];
    if (pipe(in_pipe) != 0) throw ComputeError("pipe() failed");
    if (pipe(out_pipe) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw ComputeError("pipe() failed");
    }
    const pid_t pid = fork();
    if (pid < 0) throw ComputeError("fork() failed");
    if (pid == 0) {
        // Own process group, so that killing it also reaches the command
        // the shell started.
        setpgid(0, 0);
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    pid_ = pid;
    setpgid(pid, pid);
    close(in_pipe[0]);
    close(out_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    fcntl(to_child_, F_SETFD, FD_CLOEXEC);
    fcntl(from_child_, F_SETFD, FD_CLOEXEC);

    send_line(json{{"hello", "xlab-classifier"}, {"version", 1}}.dump());
    const std::string reply = read_line();
    try {
        const auto j = json::parse(reply);
        if (!j.value("ok", false) || !j.contains("classes") || !j["classes"].is_array()) {
            fail("handshake rejected");
        }
        classes_ = j["classes"].get<std::vector<std::string>>();
    } catch (const json::exception&) {
        fail("handshake reply is not valid JSON");
    }
}

ExternalClassifier::~ExternalClassifier() {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    if (pid_ > 0) {
        // Give the child a moment to exit on EOF before killing it.
        for (int i = 0; i < 50; ++i) {
            if (waitpid(pid_, nullptr, WNOHANG) == pid_) {
                kill(-pid_, SIGKILL);
                return;
            }
            usleep(2000);
        }
        kill(-pid_, SIGKILL);
        waitpid(pid_, nullptr, 0);
    }
}

void ExternalClassifier::fail(const std::string& why) {
    std::string msg = "external classifier '" + command_ + "': " + why;
    if (!transcript_.empty()) {
        msg += "; transcript:";
        for (const auto& line : transcript_) msg += "\n  " + line;
    }
    throw ComputeError(msg);
}

void ExternalClassifier::send_line(const std::string& line) {
    transcript_.push_back("> " + excerpt(line));
    if (transcript_.size() > kTranscriptLines) transcript_.erase(transcript_.begin());
    const std::string data = line + "\n";
    std::size_t sent = 0;
    // The child may have exited; a broken pipe must surface as an error, not SIGPIPE.
    struct sigaction ignore {};
    struct sigaction previous {};
    ignore.sa_handler = SIG_IGN;
    sigaction(SIGPIPE, &ignore, &previous);
    while (sent < data.size()) {
        const ssize_t n = write(to_child_, data.data() + sent, data.size() - sent);
        if (n < 0) {
            if (errno == EINTR) continue;
            sigaction(SIGPIPE, &previous, nullptr);
            fail(std::string("write failed: ") + std::strerror(errno));
        }
        sent += static_cast<std::size_t>(n);
    }
    sigaction(SIGPIPE, &previous, nullptr);
}

std::string ExternalClassifier::read_line() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    for (;;) {
        if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            transcript_.push_back("< " + excerpt(line));
            if (transcript_.size() > kTranscriptLines) transcript_.erase(transcript_.begin());
            return line;
        }
        const auto left =
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) fail("timed out after " + std::to_string(timeout_.count()) + " ms");
        pollfd pfd{from_child_, POLLIN, 0};
        const int rc = poll(&pfd, 1, static_cast<int>(left.count()));
        if (rc < 0) {
            if (errno == EINTR) continue;
            fail("poll failed");
        }
        if (rc == 0) continue;
        char chunk[65536];
        const ssize_t n = read(from_child_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail("read failed");
        }
        if (n == 0) {
            if (!buffer_.empty()) transcript_.push_back("< " + excerpt(buffer_));
            fail("process exited or closed its output");
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

std::vector<double> ExternalClassifier::classify(const FloatGrid& image, std::span<const std::string> classes) {
    std::lock_guard lock(mutex_);
    const std::uint64_t id = next_id_++;
    json request{{"id", id},
                 {"classes", std::vector<std::string>(classes.begin(), classes.end())},
                 {"grid",
                  {{"w", image.width()},
                   {"h", image.height()},
                   {"c", image.channels()},
                   {"values", std::vector<double>(image.values().begin(), image.values().end())}}}};
    send_line(request.dump());
    const std::string reply = read_line();
    std::vector<double> probs;
    try {
        const auto j = json::parse(reply);
        if (!j.contains("id") || j["id"].get<std::uint64_t>() != id) fail("response id mismatch");
        probs = j.at("probs").get<std::vector<double>>();
    } catch (const json::exception& e) {
        fail(std::string("protocol violation: ") + e.what());
    }
    if (probs.size() != classes.size()) fail("expected " + std::to_string(classes.size()) + " probabilities");
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) fail("negative or non-finite probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) fail("probabilities sum to " + format_real(total));
    for (double& p : probs) p /= total;
    return probs;
}

std::unique_ptr<Classifier> make_classifier(const ClassifierSpec& spec) {
    if (spec.kind == ClassifierSpec::Kind::external) {
        if (spec.command.empty()) throw DataError("external classifier needs a command");
        return std::make_unique<ExternalClassifier>(spec.command, spec.timeout);
    }
    return std::make_unique<TemplateClassifier>(spec.templates, spec.temperature);
}

std::vector<double> classify(const ClassifierSpec& spec, const FloatGrid& image,
                             std::span<const std::string> classes) {
    return make_classifier(spec)->classify(image, classes);
}

}  // namespace xlab
