#pragma once

#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace imstab {

// Key-value configuration with nested tables; a small TOML subset
// ([a.b] sections, strings, numbers, booleans, flat and nested arrays).
// Every key must be consumed by the schema walk; leftovers are rejected so
// typos fail loudly.
class ConfigValue {
public:
    using Array = std::vector<ConfigValue>;
    std::variant<double, bool, std::string, Array> data;

    bool is_number() const { return std::holds_alternative<double>(data); }
    bool is_string() const { return std::holds_alternative<std::string>(data); }
    bool is_bool() const { return std::holds_alternative<bool>(data); }
    bool is_array() const { return std::holds_alternative<Array>(data); }

    double as_number() const;
    bool as_bool() const;
    const std::string& as_string() const;
    const Array& as_array() const;
    std::string render() const;
};

class ConfigTable {
public:
    std::map<std::string, ConfigValue> values;
    std::map<std::string, ConfigTable> tables;

    static ConfigTable parse_file(const std::string& path);
    static ConfigTable parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values.count(key) > 0; }
    bool has_table(const std::string& key) const { return tables.count(key) > 0; }

    // typed accessors; mark keys as consumed
    double number(const std::string& key) const;
    double number_or(const std::string& key, double fallback) const;
    long integer(const std::string& key) const;
    long integer_or(const std::string& key, long fallback) const;
    bool boolean_or(const std::string& key, bool fallback) const;
    std::string str(const std::string& key) const;
    std::string str_or(const std::string& key, const std::string& fallback) const;
    std::vector<double> number_list(const std::string& key) const;
    std::vector<std::vector<double>> matrix(const std::string& key) const;
    const ConfigTable& table(const std::string& key) const;

    // "inf" and numbers both accepted
    double number_or_inf(const std::string& key) const;

    void mark_consumed(const std::string& key) const;
    // throws listing any key that was never consumed (recursively)
    void ensure_all_consumed(const std::string& prefix = "") const;

    // canonical serialization (sorted sections and keys)
    std::string serialize() const;

private:
    mutable std::map<std::string, bool> consumed_;
    const ConfigValue& get(const std::string& key) const;
};

}  // namespace imstab
