#include "xlab/grid.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "xlab/error.hpp"

namespace xlab {

FloatGrid::FloatGrid(std::size_t width, std::size_t height, std::size_t channels)
    : width_(width), height_(height), channels_(channels), values_(width * height * channels, 0.0) {
    if (width == 0 || height == 0 || channels == 0) {
        throw DataError("grid dimensions must be positive");
    }
}

FloatGrid::FloatGrid(std::size_t width, std::size_t height, std::size_t channels, std::vector<double> values)
    : width_(width), height_(height), channels_(channels), values_(std::move(values)) {
    if (width == 0 || height == 0 || channels == 0) {
        throw DataError("grid dimensions must be positive");
    }
    if (values_.size() != width * height * channels) {
        throw DataError("value count mismatch: expected " + std::to_string(width * height * channels) + ", got " +
                        std::to_string(values_.size()));
    }
    check_finite();
}

FloatGrid FloatGrid::filled(std::size_t width, std::size_t height, std::size_t channels, double value) {
    FloatGrid g(width, height, channels);
    std::fill(g.values_.begin(), g.values_.end(), value);
    g.check_finite();
    return g;
}

void FloatGrid::check_finite() const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw DataError("non-finite value at index " + std::to_string(i));
        }
    }
}

std::string FloatGrid::shape_string() const {
    return std::to_string(width_) + "x" + std::to_string(height_) + "x" + std::to_string(channels_);
}

SaliencyMap::SaliencyMap(FloatGrid grid) : grid_(std::move(grid)) {
    if (grid_.channels() != 1) throw DataError("saliency map must have one channel");
    for (double v : grid_.values()) {
        if (!(v >= 0.0 && v <= 1.0)) throw DataError("saliency value outside [0,1]: " + format_real(v));
    }
}

std::string format_real(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) throw ComputeError("cannot format value");
    return std::string(buf, end);
}

bool parse_real(std::string_view text, double& out) {
    if (text.empty()) return false;
    // from_chars rejects a leading '+', accept it for hand-written files.
    if (text.front() == '+') text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size() && std::isfinite(out);
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) tokens.push_back(line.substr(start, i - start));
    }
    return tokens;
}

bool parse_dim(std::string_view token, std::size_t& out) {
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
    return ec == std::errc{} && ptr == token.data() + token.size() && out > 0;
}

}  // namespace

std::string encode_fgrid(const FloatGrid& grid) {
    grid.check_finite();
    std::string out = "fgrid " + std::to_string(grid.width()) + " " + std::to_string(grid.height()) + " " +
                      std::to_string(grid.channels()) + "\n";
    const auto values = grid.values();
    std::size_t k = 0;
    for (std::size_t row = 0; row < grid.height() * grid.channels(); ++row) {
        for (std::size_t x = 0; x < grid.width(); ++x) {
            if (x) out += ' ';
            out += format_real(values[k++]);
        }
        out += '\n';
    }
    return out;
}

FloatGrid decode_fgrid(std::string_view text) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    auto next_line = [&](std::string_view& line) {
        if (pos >= text.size()) return false;
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = nl + 1;
        ++line_no;
        return true;
    };

    std::string_view line;
    if (!next_line(line)) throw FormatError("malformed header: empty file", 1);
    const auto header = split_ws(line);
    std::size_t w = 0, h = 0, c = 0;
    if (header.size() != 4 || header[0] != "fgrid" || !parse_dim(header[1], w) || !parse_dim(header[2], h) ||
        !parse_dim(header[3], c)) {
        throw FormatError("malformed header", line_no);
    }

    const std::size_t expected = w * h * c;
    std::vector<double> values;
    values.reserve(expected);
    while (next_line(line)) {
        const auto tokens = split_ws(line);
        if (tokens.empty()) continue;
        if (tokens.size() != w) {
            throw FormatError("value count mismatch: row has " + std::to_string(tokens.size()) + " values, expected " +
                                  std::to_string(w),
                              line_no);
        }
        for (auto tok : tokens) {
            double v = 0.0;
            if (!parse_real(tok, v)) {
                throw FormatError("non-finite or invalid value '" + std::string(tok) + "'", line_no);
            }
            values.push_back(v);
        }
        if (values.size() > expected) {
            throw FormatError("value count mismatch: more than " + std::to_string(expected) + " values", line_no);
        }
    }
    if (values.size() != expected) {
        throw FormatError("value count mismatch: expected " + std::to_string(expected) + ", got " +
                              std::to_string(values.size()),
                          line_no);
    }
    return FloatGrid(w, h, c, std::move(values));
}

FloatGrid read_grid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open grid file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return decode_fgrid(ss.str());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.detail(), e.line());
    }
}

void write_grid(const FloatGrid& grid, const std::filesystem::path& path) {
    const std::string text = encode_fgrid(grid);  // validates before touching the file
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write grid file " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
}

GridShape read_grid_shape(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open grid file " + path.string());
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_ws(line);
    GridShape s;
    if (header.size() != 4 || header[0] != "fgrid" || !parse_dim(header[1], s.width) ||
        !parse_dim(header[2], s.height) || !parse_dim(header[3], s.channels)) {
        throw FormatError(path.string() + ": malformed header", 1);
    }
    return s;
}

}  // namespace xlab
