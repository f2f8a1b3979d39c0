#include "bbm/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace bbm::cli {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    errno = 0;
    char* end = nullptr;
    if (!value.empty() && value[0] == '-')
        throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + value + "'");
    unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (errno != 0 || end == value.c_str() || *end != '\0')
        throw ConfigError("key '" + key + "': expected an unsigned integer, got '" + value + "'");
    return v;
}

std::int64_t parse_i64(const std::string& key, const std::string& value) {
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(value.c_str(), &end, 10);
    if (errno != 0 || end == value.c_str() || *end != '\0')
        throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
    return v;
}

double parse_f64(const std::string& key, const std::string& value) {
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(value.c_str(), &end);
    if (errno != 0 || end == value.c_str() || *end != '\0')
        throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("key '" + key + "': expected true/false, got '" + value + "'");
}

std::vector<double> parse_f64_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty())
            throw ConfigError("key '" + key + "': empty element in list '" + value + "'");
        out.push_back(parse_f64(key, item));
    }
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

void require_positive(const std::string& key, const std::string& value) {
    if (!(parse_f64(key, value) > 0.0))
        throw ConfigError("key '" + key + "': must be > 0, got '" + value + "'");
}

void require_alpha_domain(const std::string& key, const std::string& value) {
    double a = parse_f64(key, value);
    if (!(a > 0.0 && a <= 0.5))
        throw ConfigError("key '" + key + "': must lie in (0, 1/2], got '" + value + "'");
}

Config::Config(std::vector<KeySpec> schema) : schema_(std::move(schema)) {}

const KeySpec& Config::spec_for(const std::string& key) const {
    for (const auto& s : schema_)
        if (s.name == key) return s;
    throw ConfigError("unknown key '" + key + "'");
}

void Config::set_checked(const std::string& key, const std::string& value) {
    const KeySpec& spec = spec_for(key);
    // type check up front so errors name the key
    switch (spec.type) {
    case KeySpec::Type::u64: parse_u64(key, value); break;
    case KeySpec::Type::i64: parse_i64(key, value); break;
    case KeySpec::Type::f64: parse_f64(key, value); break;
    case KeySpec::Type::boolean: parse_bool(key, value); break;
    case KeySpec::Type::f64_list: parse_f64_list(key, value); break;
    case KeySpec::Type::string: break;
    }
    if (spec.validate) spec.validate(key, value);
    for (auto& kv : values_) {
        if (kv.first == key) {
            kv.second = value;
            return;
        }
    }
    values_.emplace_back(key, value);
}

void Config::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        if (has(key))
            warnings.push_back("warning: duplicate key '" + key + "' at " + path + ":" +
                               std::to_string(lineno) + "; last value wins");
        set_checked(key, value);
    }
}

void Config::apply_flags(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& arg = args[i];
        if (arg.rfind("--", 0) != 0)
            throw ConfigError("expected a --key flag, got '" + arg + "'");
        std::string key = arg.substr(2);
        std::string value;
        auto eq = key.find('=');
        if (eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            const KeySpec& spec = spec_for(key);
            if (spec.type == KeySpec::Type::boolean &&
                (i + 1 >= args.size() || args[i + 1].rfind("--", 0) == 0)) {
                value = "true"; // bare boolean flag
            } else {
                if (i + 1 >= args.size())
                    throw ConfigError("flag '--" + key + "' is missing its value");
                value = args[++i];
            }
        }
        set_checked(key, value);
    }
}

void Config::finalize() {
    for (const auto& spec : schema_) {
        if (has(spec.name)) continue;
        if (!spec.default_value)
            throw ConfigError("missing required key '" + spec.name + "'");
        set_checked(spec.name, *spec.default_value);
    }
    // echo in schema order for stable manifests
    std::vector<std::pair<std::string, std::string>> ordered;
    for (const auto& spec : schema_)
        for (const auto& kv : values_)
            if (kv.first == spec.name) ordered.push_back(kv);
    values_ = std::move(ordered);
}

bool Config::has(const std::string& key) const {
    return std::any_of(values_.begin(), values_.end(),
                       [&](const auto& kv) { return kv.first == key; });
}

std::string Config::get_string(const std::string& key) const {
    spec_for(key); // validates the key name
    for (const auto& kv : values_)
        if (kv.first == key) return kv.second;
    throw ConfigError("key '" + key + "' not set");
}

double Config::get_f64(const std::string& key) const { return parse_f64(key, get_string(key)); }
std::uint64_t Config::get_u64(const std::string& key) const { return parse_u64(key, get_string(key)); }
std::int64_t Config::get_i64(const std::string& key) const { return parse_i64(key, get_string(key)); }
bool Config::get_bool(const std::string& key) const { return parse_bool(key, get_string(key)); }
std::vector<double> Config::get_f64_list(const std::string& key) const {
    return parse_f64_list(key, get_string(key));
}

std::vector<std::pair<std::string, std::string>> Config::entries() const { return values_; }

} // namespace bbm::cli
