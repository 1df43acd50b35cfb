// Test double for the external classifier protocol.
//
//   xlab_stub_classifier <classes,comma,separated> <mode> [args...]
//
// Modes:
//   fixed p1 p2 ...   reply with the given probabilities
//   mean              P(first class) = mean pixel value clamped to [0,1]
//   crash             exit on the first request
//   garbage           reply with a non-JSON line
//   hang              never reply to requests
//   badsum            reply with probabilities summing to 2
//   reject            refuse the handshake

#include <algorithm>
#include <chrono>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using nlohmann::json;

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: xlab_stub_classifier <classes> <mode> [args...]\n";
        return 64;
    }
    std::vector<std::string> classes;
    std::stringstream ss(argv[1]);
    for (std::string c; std::getline(ss, c, ',');) classes.push_back(c);
    const std::string mode = argv[2];
    std::vector<double> fixed;
    for (int i = 3; i < argc; ++i) fixed.push_back(std::stod(argv[i]));

    std::string line;
    if (!std::getline(std::cin, line)) return 0;
    if (mode == "reject") {
        std::cout << json{{"ok", false}}.dump() << std::endl;
        return 0;
    }
    std::cout << json{{"ok", true}, {"classes", classes}}.dump() << std::endl;

    while (std::getline(std::cin, line)) {
        const json req = json::parse(line);
        const auto n = req["classes"].size();
        if (mode == "crash") return 3;
        if (mode == "garbage") {
            std::cout << "this is not json" << std::endl;
            continue;
        }
        if (mode == "hang") {
            std::this_thread::sleep_for(std::chrono::hours(1));
            return 0;
        }
        std::vector<double> probs(n, 0.0);
        if (mode == "fixed") {
            for (std::size_t i = 0; i < n && i < fixed.size(); ++i) probs[i] = fixed[i];
        } else if (mode == "mean") {
            const auto values = req["grid"]["values"].get<std::vector<double>>();
            double mean = 0;
            for (double v : values) mean += v;
            mean = values.empty() ? 0.0 : std::clamp(mean / static_cast<double>(values.size()), 0.0, 1.0);
            const double first = n > 1 ? mean : 1.0;
            probs[0] = first;
            for (std::size_t i = 1; i < n; ++i) probs[i] = (1.0 - first) / static_cast<double>(n - 1);
            // Requests name classes in any order; the reply follows the request.
            if (n > 1 && req["classes"][0] != classes[0]) std::reverse(probs.begin(), probs.end());
        } else if (mode == "badsum") {
            std::fill(probs.begin(), probs.end(), 2.0 / static_cast<double>(n));
        }
        std::cout << json{{"id", req["id"]}, {"probs", probs}}.dump() << std::endl;
    }
    return 0;
}
