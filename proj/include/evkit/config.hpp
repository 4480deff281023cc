#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "evkit/core.hpp"

namespace evkit {

// Plain `key=value` pipeline configuration. Keys are checked against the
// caller's whitelist at load and every value is range-checked through the
// typed getters, so a typo fails fast instead of silently using a default.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig load(const std::filesystem::path& path,
                               const std::set<std::string>& known_keys) {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open config file " + path.string());
        KeyValueConfig cfg;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::size_t start = line.find_first_not_of(" \t");
            if (start == std::string::npos || line[start] == '#') continue;
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw config_error("config: expected key=value at " + path.string() + ":" +
                                   std::to_string(lineno));
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty() || value.empty())
                throw config_error("config: empty key or value at " + path.string() + ":" +
                                   std::to_string(lineno));
            if (!known_keys.count(key))
                throw config_error("config: unknown key `" + key + "` at " + path.string() + ":" +
                                   std::to_string(lineno));
            if (cfg.values_.count(key))
                throw config_error("config: duplicate key `" + key + "` at " + path.string() +
                                   ":" + std::to_string(lineno));
            cfg.values_[key] = value;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    double get_double(const std::string& key, double lo, double hi) const {
        const std::string& raw = require(key);
        std::istringstream in(raw);
        double v;
        std::string extra;
        if (!(in >> v) || (in >> extra))
            throw config_error("config: `" + key + "` is not a number: " + raw);
        if (!(v >= lo && v <= hi))
            throw config_error("config: `" + key + "` out of range [" + std::to_string(lo) + ", " +
                               std::to_string(hi) + "]: " + raw);
        return v;
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t lo, std::uint64_t hi) const {
        const std::string& raw = require(key);
        std::istringstream in(raw);
        std::uint64_t v;
        std::string extra;
        if (raw.empty() || raw[0] == '-' || !(in >> v) || (in >> extra))
            throw config_error("config: `" + key + "` is not a non-negative integer: " + raw);
        if (v < lo || v > hi)
            throw config_error("config: `" + key + "` out of range [" + std::to_string(lo) + ", " +
                               std::to_string(hi) + "]: " + raw);
        return v;
    }

    std::string get_choice(const std::string& key, const std::set<std::string>& choices) const {
        const std::string& raw = require(key);
        if (!choices.count(raw)) {
            std::string opts;
            for (const std::string& c : choices) opts += (opts.empty() ? "" : "|") + c;
            throw config_error("config: `" + key + "` must be one of " + opts + ": " + raw);
        }
        return raw;
    }

private:
    static std::string trim(const std::string& s) {
        const std::size_t a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        const std::size_t b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    const std::string& require(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw config_error("config: missing key `" + key + "`");
        return it->second;
    }

    std::map<std::string, std::string> values_;
};

}  // namespace evkit
