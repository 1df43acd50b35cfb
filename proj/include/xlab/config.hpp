#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>

namespace xlab {

using ConfigValue = std::variant<bool, std::int64_t, double, std::string>;

std::string config_value_text(const ConfigValue& v);

// Flat key/value configuration. Keys are "section.key" (or "key" for the
// top-level table).
class Config {
public:
    // Parses a TOML subset: [section] headers (dotted names allowed),
    // key = value lines, # comments, and scalar values (basic or literal
    // strings, integers, floats, booleans). Throws FormatError.
    static Config parse_toml(std::string_view text);
    static Config load(const std::filesystem::path& path);

    void set(const std::string& key, ConfigValue value);
    // Parses `text` as a TOML scalar; anything else is taken as a bare string.
    void set_text(const std::string& key, std::string_view text);
    // "key=value" override.
    void apply_override(std::string_view assignment);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    const std::map<std::string, ConfigValue>& values() const noexcept { return values_; }

    // Typed accessors; throw ConfigError on a missing key or wrong type.
    // get_real accepts integers.
    std::string get_string(const std::string& key) const;
    double get_real(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    // `overrides` layered on top of this config. Every key of `overrides`
    // must exist here and have a compatible type (an integer may replace a
    // real); throws ConfigError otherwise.
    Config merged(const Config& overrides) const;

    // TOML rendering, grouped by section, keys sorted.
    std::string to_toml() const;

private:
    const ConfigValue& at(const std::string& key) const;

    std::map<std::string, ConfigValue> values_;
};

}  // namespace xlab
