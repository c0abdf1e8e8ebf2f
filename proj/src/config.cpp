#include "imstab/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace imstab {

namespace {

std::string fmt_double(double v) {
    if (v == static_cast<long long>(v) && std::abs(v) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%lld.0", static_cast<long long>(v));
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct LineParser {
    const std::string& s;
    std::size_t pos = 0;
    int line_no;
    const std::string& origin;

    void skip_ws() {
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    }
    [[noreturn]] void fail(const std::string& what) {
        throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": " + what);
    }

    ConfigValue parse_value() {
        skip_ws();
        if (pos >= s.size()) fail("missing value");
        char c = s[pos];
        if (c == '"') {
            ++pos;
            std::string out;
            while (pos < s.size() && s[pos] != '"') {
                if (s[pos] == '\\' && pos + 1 < s.size()) {
                    ++pos;
                    char e = s[pos];
                    out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
                } else {
                    out += s[pos];
                }
                ++pos;
            }
            if (pos >= s.size()) fail("unterminated string");
            ++pos;
            return ConfigValue{out};
        }
        if (c == '[') {
            ++pos;
            ConfigValue::Array arr;
            skip_ws();
            if (pos < s.size() && s[pos] == ']') {
                ++pos;
                return ConfigValue{arr};
            }
            for (;;) {
                arr.push_back(parse_value());
                skip_ws();
                if (pos < s.size() && s[pos] == ',') {
                    ++pos;
                    continue;
                }
                if (pos < s.size() && s[pos] == ']') {
                    ++pos;
                    return ConfigValue{arr};
                }
                fail("expected ',' or ']' in array");
            }
        }
        // bare token: bool, inf, or number
        std::size_t start = pos;
        while (pos < s.size() && s[pos] != ',' && s[pos] != ']' && s[pos] != '#' &&
               !std::isspace(static_cast<unsigned char>(s[pos])))
            ++pos;
        std::string tok = s.substr(start, pos - start);
        if (tok == "true") return ConfigValue{true};
        if (tok == "false") return ConfigValue{false};
        if (tok == "inf") return ConfigValue{std::string("inf")};
        try {
            std::size_t used = 0;
            double v = std::stod(tok, &used);
            if (used != tok.size()) fail("bad number '" + tok + "'");
            return ConfigValue{v};
        } catch (const std::exception&) {
            fail("unrecognized value '" + tok + "'");
        }
    }
};

}  // namespace

double ConfigValue::as_number() const {
    if (!is_number()) throw std::invalid_argument("config value is not a number: " + render());
    return std::get<double>(data);
}
bool ConfigValue::as_bool() const {
    if (!is_bool()) throw std::invalid_argument("config value is not a boolean: " + render());
    return std::get<bool>(data);
}
const std::string& ConfigValue::as_string() const {
    if (!is_string()) throw std::invalid_argument("config value is not a string: " + render());
    return std::get<std::string>(data);
}
const ConfigValue::Array& ConfigValue::as_array() const {
    if (!is_array()) throw std::invalid_argument("config value is not an array: " + render());
    return std::get<Array>(data);
}

std::string ConfigValue::render() const {
    if (is_number()) return fmt_double(std::get<double>(data));
    if (is_bool()) return std::get<bool>(data) ? "true" : "false";
    if (is_string()) return "\"" + std::get<std::string>(data) + "\"";
    std::string out = "[";
    const Array& arr = std::get<Array>(data);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (i) out += ", ";
        out += arr[i].render();
    }
    return out + "]";
}

ConfigTable ConfigTable::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
}

ConfigTable ConfigTable::parse_string(const std::string& text, const std::string& origin) {
    ConfigTable root;
    ConfigTable* current = &root;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // strip comments outside strings
        bool in_str = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_str = !in_str;
            if (line[i] == '#' && !in_str) {
                line = line.substr(0, i);
                break;
            }
        }
        std::size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        std::size_t b = line.find_last_not_of(" \t\r");
        line = line.substr(a, b - a + 1);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                            ": malformed section header");
            std::string path = line.substr(1, line.size() - 2);
            current = &root;
            std::size_t start = 0;
            while (start <= path.size()) {
                std::size_t dot = path.find('.', start);
                std::string part = path.substr(start, dot == std::string::npos ? std::string::npos
                                                                               : dot - start);
                if (part.empty())
                    throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                                ": empty section name");
                current = &current->tables[part];
                if (dot == std::string::npos) break;
                start = dot + 1;
            }
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                        ": expected key = value");
        std::string key = line.substr(0, eq);
        key.erase(key.find_last_not_of(" \t") + 1);
        if (key.empty())
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": empty key");
        LineParser lp{line, eq + 1, line_no, origin};
        ConfigValue v = lp.parse_value();
        lp.skip_ws();
        if (lp.pos != line.size())
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                        ": trailing characters after value");
        if (current->values.count(key))
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                        ": duplicate key '" + key + "'");
        current->values[key] = std::move(v);
    }
    return root;
}

const ConfigValue& ConfigTable::get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw std::invalid_argument("missing config key '" + key + "'");
    consumed_[key] = true;
    return it->second;
}

void ConfigTable::mark_consumed(const std::string& key) const { consumed_[key] = true; }

double ConfigTable::number(const std::string& key) const { return get(key).as_number(); }
double ConfigTable::number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
}
long ConfigTable::integer(const std::string& key) const {
    double v = number(key);
    long l = static_cast<long>(v);
    if (double(l) != v) throw std::invalid_argument("config key '" + key + "' must be an integer");
    return l;
}
long ConfigTable::integer_or(const std::string& key, long fallback) const {
    return has(key) ? integer(key) : fallback;
}
bool ConfigTable::boolean_or(const std::string& key, bool fallback) const {
    return has(key) ? get(key).as_bool() : fallback;
}
std::string ConfigTable::str(const std::string& key) const { return get(key).as_string(); }
std::string ConfigTable::str_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
}
std::vector<double> ConfigTable::number_list(const std::string& key) const {
    const auto& arr = get(key).as_array();
    std::vector<double> out;
    for (const auto& v : arr) out.push_back(v.as_number());
    return out;
}
std::vector<std::vector<double>> ConfigTable::matrix(const std::string& key) const {
    const auto& arr = get(key).as_array();
    std::vector<std::vector<double>> out;
    for (const auto& row : arr) {
        std::vector<double> r;
        for (const auto& v : row.as_array()) r.push_back(v.as_number());
        out.push_back(std::move(r));
    }
    return out;
}
double ConfigTable::number_or_inf(const std::string& key) const {
    const ConfigValue& v = get(key);
    if (v.is_string() && v.as_string() == "inf") return std::numeric_limits<double>::infinity();
    return v.as_number();
}
const ConfigTable& ConfigTable::table(const std::string& key) const {
    auto it = tables.find(key);
    if (it == tables.end()) throw std::invalid_argument("missing config table [" + key + "]");
    consumed_["[" + key + "]"] = true;
    return it->second;
}

void ConfigTable::ensure_all_consumed(const std::string& prefix) const {
    std::vector<std::string> unknown;
    for (const auto& [k, v] : values)
        if (!consumed_.count(k)) unknown.push_back(prefix + k);
    for (const auto& [k, t] : tables) {
        if (!consumed_.count("[" + k + "]"))
            unknown.push_back(prefix + k + ".*");
        else
            t.ensure_all_consumed(prefix + k + ".");
    }
    if (!unknown.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw std::invalid_argument(msg);
    }
}

std::string ConfigTable::serialize() const {
    std::string out;
    std::function<void(const ConfigTable&, const std::string&)> walk =
        [&](const ConfigTable& t, const std::string& path) {
            if (!t.values.empty() && !path.empty()) out += "[" + path + "]\n";
            for (const auto& [k, v] : t.values) out += k + " = " + v.render() + "\n";
            if (!t.values.empty()) out += "\n";
            for (const auto& [k, sub] : t.tables)
                walk(sub, path.empty() ? k : path + "." + k);
        };
    walk(*this, "");
    return out;
}

}  // namespace imstab
