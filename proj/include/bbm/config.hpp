#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bbm::cli {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One permitted key: name, type, default (empty optional = required), and an
// optional domain validator run on the parsed value.
struct KeySpec {
    enum class Type { u64, i64, f64, boolean, string, f64_list };
    std::string name;
    Type type = Type::string;
    std::optional<std::string> default_value;
    std::function<void(const std::string& key, const std::string& value)> validate;
};

// Resolved configuration: every schema key present, defaults materialized.
class Config {
public:
    explicit Config(std::vector<KeySpec> schema);

    // `key = value` lines; '#' comments and blank lines skipped. Duplicate
    // keys: last one wins, with a warning appended to `warnings`.
    void load_file(const std::string& path);
    // --key value (or --flag for booleans); overrides file values
    void apply_flags(const std::vector<std::string>& args);
    // fills remaining keys from defaults; throws on missing required keys
    void finalize();

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    double get_f64(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    std::int64_t get_i64(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_f64_list(const std::string& key) const; // comma-separated

    // insertion-ordered (key, value) pairs for manifest echoing
    std::vector<std::pair<std::string, std::string>> entries() const;
    std::vector<std::string> warnings;

private:
    const KeySpec& spec_for(const std::string& key) const;
    void set_checked(const std::string& key, const std::string& value);

    std::vector<KeySpec> schema_;
    std::vector<std::pair<std::string, std::string>> values_; // schema order
};

// shared domain validators
void require_positive(const std::string& key, const std::string& value);
void require_alpha_domain(const std::string& key, const std::string& value);

std::uint64_t parse_u64(const std::string& key, const std::string& value);
std::int64_t parse_i64(const std::string& key, const std::string& value);
double parse_f64(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
std::vector<double> parse_f64_list(const std::string& key, const std::string& value);

} // namespace bbm::cli
