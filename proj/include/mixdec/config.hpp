#pragma once

// Key-value configuration files in a TOML subset:
//
//   # comment
//   dimension = 2
//   domain    = [[0, 1], [0, 1]]
//   periodic  = [true, true]
//   map       = ["mod(2*x1 + x2, 1)", "mod(x1 + x2, 1)"]
//   [manifold]
//   gap = 1e-3           # stored as "manifold.gap"
//
// Values are numbers, booleans, double-quoted strings and (nested, possibly
// multi-line) arrays. Parse errors report line and column.

#include "mixdec/core.hpp"
#include "mixdec/types.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace mixdec {

struct ConfigValue {
    using Array = std::vector<ConfigValue>;
    std::variant<double, bool, std::string, Array> data;

    bool is_number() const { return std::holds_alternative<double>(data); }
    bool is_bool() const { return std::holds_alternative<bool>(data); }
    bool is_string() const { return std::holds_alternative<std::string>(data); }
    bool is_array() const { return std::holds_alternative<Array>(data); }

    double number(const std::string& key) const {
        if (!is_number()) throw usage_error("config key '" + key + "' must be a number");
        return std::get<double>(data);
    }
    bool boolean(const std::string& key) const {
        if (!is_bool()) throw usage_error("config key '" + key + "' must be a boolean");
        return std::get<bool>(data);
    }
    const std::string& string(const std::string& key) const {
        if (!is_string()) throw usage_error("config key '" + key + "' must be a string");
        return std::get<std::string>(data);
    }
    const Array& array(const std::string& key) const {
        if (!is_array()) throw usage_error("config key '" + key + "' must be an array");
        return std::get<Array>(data);
    }
};

class Config {
public:
    static Config parse(const std::string& text);

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw usage_error("cannot open config file '" + path + "'");
        std::stringstream buffer;
        buffer << in.rdbuf();
        Config cfg = parse(buffer.str());
        cfg.source_ = buffer.str();
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const ConfigValue& at(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw usage_error("config is missing required key '" + key + "'");
        return it->second;
    }
    const std::map<std::string, ConfigValue>& values() const { return values_; }
    const std::string& source() const { return source_; }

    double number_or(const std::string& key, double fallback) const {
        return has(key) ? at(key).number(key) : fallback;
    }
    std::vector<double> numbers(const std::string& key) const {
        std::vector<double> out;
        for (const auto& v : at(key).array(key)) out.push_back(v.number(key));
        return out;
    }
    std::vector<bool> booleans(const std::string& key) const {
        std::vector<bool> out;
        for (const auto& v : at(key).array(key)) out.push_back(v.boolean(key));
        return out;
    }
    std::vector<std::string> strings(const std::string& key) const {
        std::vector<std::string> out;
        for (const auto& v : at(key).array(key)) out.push_back(v.string(key));
        return out;
    }

private:
    std::map<std::string, ConfigValue> values_;
    std::string source_;
};

namespace detail {

class ConfigParser {
public:
    explicit ConfigParser(const std::string& text) : text_(text) {}

    std::map<std::string, ConfigValue> run() {
        std::map<std::string, ConfigValue> out;
        std::string section;
        for (;;) {
            skip_blank_lines();
            if (at_end()) break;
            if (peek() == '[') {
                advance();
                skip_inline_space();
                section = read_key();
                skip_inline_space();
                expect(']');
                end_of_line();
                continue;
            }
            const std::size_t key_line = line_, key_col = col_;
            std::string key = read_key();
            if (!section.empty()) key = section + "." + key;
            skip_inline_space();
            expect('=');
            skip_inline_space();
            ConfigValue value = read_value();
            end_of_line();
            if (out.count(key)) fail_at(key_line, key_col, "duplicate key '" + key + "'");
            out.emplace(std::move(key), std::move(value));
        }
        return out;
    }

private:
    const std::string& text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return at_end() ? '\0' : text_[pos_]; }
    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    [[noreturn]] void fail_at(std::size_t line, std::size_t col, const std::string& message) const {
        throw usage_error("config parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                          ": " + message);
    }
    [[noreturn]] void fail(const std::string& message) const { fail_at(line_, col_, message); }

    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        advance();
    }

    void skip_inline_space() {
        while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) advance();
    }
    void skip_comment() {
        if (peek() == '#')
            while (!at_end() && peek() != '\n') advance();
    }
    void skip_blank_lines() {
        for (;;) {
            skip_inline_space();
            skip_comment();
            if (peek() == '\n') {
                advance();
                continue;
            }
            return;
        }
    }
    void end_of_line() {
        skip_inline_space();
        skip_comment();
        if (at_end()) return;
        if (peek() != '\n') fail("unexpected trailing characters");
        advance();
    }

    std::string read_key() {
        std::string key;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-' ||
                             peek() == '.')) {
            key += peek();
            advance();
        }
        if (key.empty()) fail("expected a key");
        return key;
    }

    ConfigValue read_value() {
        const char c = peek();
        if (c == '"') return ConfigValue{read_string()};
        if (c == '[') return ConfigValue{read_array()};
        std::string word;
        const std::size_t line = line_, col = col_;
        while (!at_end() && !std::isspace(static_cast<unsigned char>(peek())) && peek() != ',' && peek() != ']' &&
               peek() != '#') {
            word += peek();
            advance();
        }
        if (word == "true") return ConfigValue{true};
        if (word == "false") return ConfigValue{false};
        if (word.empty()) fail_at(line, col, "expected a value");
        try {
            std::size_t used = 0;
            const double v = std::stod(word, &used);
            if (used == word.size()) return ConfigValue{v};
        } catch (const std::exception&) {
        }
        fail_at(line, col, "cannot parse value '" + word + "'");
    }

    std::string read_string() {
        expect('"');
        std::string out;
        while (!at_end() && peek() != '"') {
            if (peek() == '\n') fail("unterminated string");
            if (peek() == '\\') {
                advance();
                if (at_end()) fail("unterminated string");
                const char e = peek();
                out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
                advance();
                continue;
            }
            out += peek();
            advance();
        }
        expect('"');
        return out;
    }

    ConfigValue::Array read_array() {
        expect('[');
        ConfigValue::Array out;
        skip_blank_lines();
        if (peek() == ']') {
            advance();
            return out;
        }
        for (;;) {
            skip_blank_lines();
            out.push_back(read_value());
            skip_blank_lines();
            if (peek() == ',') {
                advance();
                skip_blank_lines();
                if (peek() == ']') {
                    advance();
                    return out;
                }
                continue;
            }
            if (peek() == ']') {
                advance();
                return out;
            }
            fail("expected ',' or ']' in array");
        }
    }
};

}  // namespace detail

inline Config Config::parse(const std::string& text) {
    Config cfg;
    cfg.values_ = detail::ConfigParser(text).run();
    cfg.source_ = text;
    return cfg;
}

/// Map-related settings parsed from a config file.
struct SystemConfig {
    Domain domain;
    std::vector<std::string> map;
    std::vector<std::string> inverse;
    std::vector<std::vector<std::string>> jacobian;
    std::optional<double> lipschitz;
    double padding = 1.0;  // scale on the Lipschitz padding L*diam/2 used by the box graph
};

inline SystemConfig read_system_config(const Config& cfg) {
    SystemConfig out;
    const int d = static_cast<int>(cfg.at("dimension").number("dimension"));
    if (d < 1) throw usage_error("dimension must be a positive integer");

    std::vector<double> lo, hi;
    const auto& dom = cfg.at("domain").array("domain");
    if (static_cast<int>(dom.size()) != d) throw usage_error("domain must list one [lo, hi] pair per axis");
    for (const auto& axis : dom) {
        const auto& pair = axis.array("domain");
        if (pair.size() != 2) throw usage_error("domain entries must be [lo, hi] pairs");
        lo.push_back(pair[0].number("domain"));
        hi.push_back(pair[1].number("domain"));
    }
    std::vector<bool> periodic = cfg.has("periodic") ? cfg.booleans("periodic") : std::vector<bool>(d, false);
    if (static_cast<int>(periodic.size()) != d) throw usage_error("periodic must have one flag per axis");
    out.domain = Domain(lo, hi, periodic);

    out.map = cfg.strings("map");
    if (cfg.has("inverse")) out.inverse = cfg.strings("inverse");
    if (cfg.has("jacobian")) {
        for (const auto& row : cfg.at("jacobian").array("jacobian")) {
            std::vector<std::string> entries;
            for (const auto& e : row.array("jacobian")) entries.push_back(e.string("jacobian"));
            out.jacobian.push_back(std::move(entries));
        }
    }
    if (cfg.has("lipschitz")) out.lipschitz = cfg.at("lipschitz").number("lipschitz");
    out.padding = cfg.number_or("padding", 1.0);
    if (out.padding < 0.0) throw usage_error("padding must be non-negative");
    return out;
}

inline MapSystem make_system(const SystemConfig& sc) {
    return MapSystem::from_expressions(sc.domain, sc.map, sc.inverse, sc.jacobian, sc.lipschitz);
}

}  // namespace mixdec
