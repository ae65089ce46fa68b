#pragma once

// Flat key=value configuration: one entry per line, '#' starts a comment.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "erdlab/errors.hpp"

namespace erdlab::harness {

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

/// Ordered string map with typed accessors. Keys are case-sensitive.
class ParamMap {
public:
    ParamMap() = default;
    ParamMap(std::initializer_list<std::pair<const std::string, std::string>> init) : values_(init) {}

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    const std::string& str(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw SpecError("missing parameter '" + key + "'");
        return it->second;
    }

    double num(const std::string& key) const {
        const std::string& s = str(key);
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw SpecError("");
            return v;
        } catch (const std::exception&) {
            throw SpecError("parameter '" + key + "' is not a number: '" + s + "'");
        }
    }

    int integer(const std::string& key) const {
        const std::string& s = str(key);
        long long v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size())
            throw SpecError("parameter '" + key + "' is not an integer: '" + s + "'");
        return static_cast<int>(v);
    }

    std::uint64_t u64(const std::string& key) const {
        const std::string& s = str(key);
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size())
            throw SpecError("parameter '" + key + "' is not an unsigned integer: '" + s + "'");
        return v;
    }

    bool flag(const std::string& key) const {
        std::string s = str(key);
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
        if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
        if (s == "0" || s == "false" || s == "no" || s == "off") return false;
        throw SpecError("parameter '" + key + "' is not a boolean: '" + s + "'");
    }

    /// Comma-separated numbers.
    std::vector<double> list(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(str(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw SpecError("parameter '" + key + "' has a non-numeric entry '" + item + "'");
            }
        }
        return out;
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

    /// Overwrites existing keys; with `allow_new = false` unknown keys are an error.
    void merge(const ParamMap& other, bool allow_new) {
        for (const auto& [k, v] : other.values_) {
            if (!allow_new && !has(k)) throw SpecError("unknown parameter '" + k + "'");
            values_[k] = v;
        }
    }

private:
    std::map<std::string, std::string> values_;
};

inline ParamMap parse_config(std::istream& in, const std::string& origin = "<config>") {
    ParamMap out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw SpecError(origin + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw SpecError(origin + ":" + std::to_string(lineno) + ": empty key");
        out.set(key, trim(line.substr(eq + 1)));
    }
    return out;
}

inline ParamMap parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline ParamMap load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open config file '" + path + "'");
    return parse_config(in, path);
}

}  // namespace erdlab::harness
