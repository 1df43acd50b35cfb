#include "xlab/config.hpp"

#include <charconv>
#include <vector>

#include "xlab/corpus.hpp"
#include "xlab/error.hpp"
#include "xlab/grid.hpp"

namespace xlab {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool is_bare_key(std::string_view key) {
    if (key.empty()) return false;
    for (char c : key) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '-' || c == '.';
        if (!ok) return false;
    }
    return key.front() != '.' && key.back() != '.' && key.find("..") == std::string_view::npos;
}

// Position just past the closing quote of a string starting at `text[0]`,
// or npos if unterminated.
std::size_t string_end(std::string_view text) {
    const char quote = text.front();
    for (std::size_t i = 1; i < text.size(); ++i) {
        if (quote == '"' && text[i] == '\\') {
            ++i;
            continue;
        }
        if (text[i] == quote) return i + 1;
    }
    return std::string_view::npos;
}

// Removes a trailing comment outside of string literals.
std::string_view strip_comment(std::string_view line) {
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '#') return line.substr(0, i);
        if (line[i] == '"' || line[i] == '\'') {
            const std::size_t end = string_end(line.substr(i));
            if (end == std::string_view::npos) return line;
            i += end - 1;
        }
    }
    return line;
}

bool parse_string(std::string_view text, std::string& out, std::string& error) {
    if (text.size() < 2 || string_end(text) != text.size()) {
        error = "unterminated or malformed string";
        return false;
    }
    out.clear();
    if (text.front() == '\'') {
        out = std::string(text.substr(1, text.size() - 2));
        return true;
    }
    for (std::size_t i = 1; i + 1 < text.size(); ++i) {
        char c = text[i];
        if (c == '\\') {
            const char e = text[++i];
            switch (e) {
                case 'n': c = '\n'; break;
                case 't': c = '\t'; break;
                case '"': c = '"'; break;
                case '\\': c = '\\'; break;
                default: error = std::string("unsupported escape \\") + e; return false;
            }
        }
        out += c;
    }
    return true;
}

bool parse_int(std::string_view text, std::int64_t& out) {
    std::string digits;
    for (char c : text) {
        if (c != '_') digits += c;
    }
    std::string_view d = digits;
    if (!d.empty() && d.front() == '+') d.remove_prefix(1);
    if (d.empty()) return false;
    auto [ptr, ec] = std::from_chars(d.data(), d.data() + d.size(), out);
    return ec == std::errc{} && ptr == d.data() + d.size();
}

bool parse_scalar(std::string_view text, ConfigValue& out, std::string& error) {
    if (text.empty()) {
        error = "missing value";
        return false;
    }
    if (text.front() == '"' || text.front() == '\'') {
        std::string s;
        if (!parse_string(text, s, error)) return false;
        out = std::move(s);
        return true;
    }
    if (text == "true" || text == "false") {
        out = text == "true";
        return true;
    }
    if (text.front() == '[' || text.front() == '{') {
        error = "arrays and inline tables are not supported";
        return false;
    }
    std::int64_t i = 0;
    if (parse_int(text, i)) {
        out = i;
        return true;
    }
    double d = 0.0;
    std::string cleaned;
    for (char c : text) {
        if (c != '_') cleaned += c;
    }
    if (parse_real(cleaned, d)) {
        out = d;
        return true;
    }
    error = "cannot parse value '" + std::string(text) + "'";
    return false;
}

const char* type_name(const ConfigValue& v) {
    switch (v.index()) {
        case 0: return "boolean";
        case 1: return "integer";
        case 2: return "real";
        default: return "string";
    }
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out + "\"";
}

}  // namespace

std::string config_value_text(const ConfigValue& v) {
    switch (v.index()) {
        case 0: return std::get<bool>(v) ? "true" : "false";
        case 1: return std::to_string(std::get<std::int64_t>(v));
        case 2: {
            std::string s = format_real(std::get<double>(v));
            if (s.find_first_of(".e") == std::string::npos) s += ".0";
            return s;
        }
        default: return quote(std::get<std::string>(v));
    }
}

Config Config::parse_toml(std::string_view text) {
    Config config;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        line = trim(strip_comment(line));
        if (line.empty()) {
            if (nl == text.size()) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) throw FormatError("malformed section header", line_no);
            const std::string_view name = trim(line.substr(1, line.size() - 2));
            if (!is_bare_key(name)) throw FormatError("invalid section name", line_no);
            section = std::string(name);
        } else {
            const std::size_t eq = line.find('=');
            if (eq == std::string_view::npos) throw FormatError("expected key = value", line_no);
            const std::string_view key = trim(line.substr(0, eq));
            if (!is_bare_key(key)) throw FormatError("invalid key '" + std::string(key) + "'", line_no);
            ConfigValue value;
            std::string error;
            if (!parse_scalar(trim(line.substr(eq + 1)), value, error)) throw FormatError(error, line_no);
            const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
            if (config.has(full)) throw FormatError("duplicate key '" + full + "'", line_no);
            config.values_[full] = std::move(value);
        }
        if (nl == text.size()) break;
    }
    return config;
}

Config Config::load(const std::filesystem::path& path) {
    try {
        return parse_toml(read_text_file(path));
    } catch (const FormatError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
}

void Config::set(const std::string& key, ConfigValue value) { values_[key] = std::move(value); }

void Config::set_text(const std::string& key, std::string_view text) {
    ConfigValue value;
    std::string error;
    if (parse_scalar(trim(text), value, error)) {
        values_[key] = std::move(value);
    } else {
        values_[key] = std::string(trim(text));
    }
}

void Config::apply_override(std::string_view assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
    const std::string_view key = trim(assignment.substr(0, eq));
    if (!is_bare_key(key)) throw ConfigError("invalid key '" + std::string(key) + "'");
    set_text(std::string(key), assignment.substr(eq + 1));
}

const ConfigValue& Config::at(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
}

std::string Config::get_string(const std::string& key) const {
    const auto& v = at(key);
    if (auto* s = std::get_if<std::string>(&v)) return *s;
    throw ConfigError("config key '" + key + "' must be a string");
}

double Config::get_real(const std::string& key) const {
    const auto& v = at(key);
    if (auto* d = std::get_if<double>(&v)) return *d;
    if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    throw ConfigError("config key '" + key + "' must be a number");
}

std::int64_t Config::get_int(const std::string& key) const {
    const auto& v = at(key);
    if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
    throw ConfigError("config key '" + key + "' must be an integer");
}

bool Config::get_bool(const std::string& key) const {
    const auto& v = at(key);
    if (auto* b = std::get_if<bool>(&v)) return *b;
    throw ConfigError("config key '" + key + "' must be true or false");
}

Config Config::merged(const Config& overrides) const {
    Config out = *this;
    for (const auto& [key, value] : overrides.values_) {
        auto it = out.values_.find(key);
        if (it == out.values_.end()) throw ConfigError("unknown config key '" + key + "'");
        const bool same = it->second.index() == value.index();
        const bool widen = it->second.index() == 2 && value.index() == 1;
        if (widen) {
            it->second = static_cast<double>(std::get<std::int64_t>(value));
        } else if (same) {
            it->second = value;
        } else if (it->second.index() == 3) {
            // Bare override text that happened to parse as a scalar.
            it->second = config_value_text(value);
        } else {
            throw ConfigError("config key '" + key + "' expects a " + type_name(it->second) + ", got a " +
                              type_name(value));
        }
    }
    return out;
}

std::string Config::to_toml() const {
    std::map<std::string, std::vector<std::pair<std::string, const ConfigValue*>>> sections;
    for (const auto& [key, value] : values_) {
        const std::size_t dot = key.rfind('.');
        if (dot == std::string::npos) {
            sections[""].push_back({key, &value});
        } else {
            sections[key.substr(0, dot)].push_back({key.substr(dot + 1), &value});
        }
    }
    std::string out;
    for (const auto& [name, entries] : sections) {
        if (!name.empty()) out += (out.empty() ? "[" : "\n[") + name + "]\n";
        for (const auto& [key, value] : entries) out += key + " = " + config_value_text(*value) + "\n";
    }
    return out;
}

}  // namespace xlab
