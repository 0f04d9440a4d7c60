#pragma once

// Flat "key = value" run configuration with a per-key unit table.

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qomsim/core.hpp"

namespace qomsim::cli {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Dim { none, frequency, mass, length, power, temperature, time, angle, density, squeeze, fraction, integer, flag, text };

struct KeySpec {
    std::string name;
    Dim dim;
    std::string help;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Accepted unit spellings and their factor to the SI value used internally.
inline const std::map<std::string, double>& units_for(Dim d) {
    static const std::map<Dim, std::map<std::string, double>> table{
        {Dim::frequency, {{"", 1}, {"rad/s", 1}, {"1/s", 1}, {"Hz", 2 * kPi}, {"kHz", 2e3 * kPi}, {"MHz", 2e6 * kPi}, {"mHz", 2e-3 * kPi}}},
        {Dim::mass, {{"", 1}, {"kg", 1}, {"g", 1e-3}, {"mg", 1e-6}, {"ug", 1e-9}, {"ng", 1e-12}, {"u", 1.66053906660e-27}}},
        {Dim::length, {{"", 1}, {"m", 1}, {"km", 1e3}, {"mm", 1e-3}, {"um", 1e-6}, {"nm", 1e-9}, {"pm", 1e-12}}},
        {Dim::power, {{"", 1}, {"W", 1}, {"mW", 1e-3}, {"kW", 1e3}, {"MW", 1e6}}},
        {Dim::temperature, {{"", 1}, {"K", 1}, {"mK", 1e-3}, {"uK", 1e-6}}},
        {Dim::time, {{"", 1}, {"s", 1}, {"ms", 1e-3}, {"us", 1e-6}}},
        {Dim::angle, {{"", 1}, {"rad", 1}, {"deg", kPi / 180}}},
        {Dim::density, {{"", 1}, {"kg/m^3", 1}, {"g/cm^3", 1e3}}},
        {Dim::none, {{"", 1}}},
        {Dim::fraction, {{"", 1}, {"%", 1e-2}}},
    };
    return table.at(d);
}

}  // namespace detail

class RunConfig {
public:
    std::string subcommand;

    RunConfig(std::string sub, std::vector<KeySpec> specs) : subcommand(std::move(sub)), specs_(std::move(specs)) {
        for (const char* k : {"seed", "format", "out", "threads"}) {
            bool have = false;
            for (const auto& s : specs_) have |= s.name == k;
            if (!have) {
                const Dim d = std::string(k) == "seed" || std::string(k) == "threads" ? Dim::integer : Dim::text;
                specs_.push_back({k, d, "common"});
            }
        }
    }

    // Reads either the flat text dialect or a previously emitted JSON report.
    void load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        const std::string text = ss.str();
        if (detail::trim(text).rfind("{", 0) == 0) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(text);
            } catch (const std::exception& e) {
                throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
            }
            if (!j.contains("config") || !j["config"].is_object()) throw ConfigError("JSON config needs a 'config' object");
            if (j.contains("subcommand") && j["subcommand"] != subcommand)
                throw ConfigError("report was produced by '" + j["subcommand"].get<std::string>() + "', not '" + subcommand + "'");
            for (auto& [k, v] : j["config"].items()) set(k, v.is_string() ? v.get<std::string>() : v.dump());
            return;
        }
        std::istringstream lines(text);
        std::string line;
        int n = 0;
        while (std::getline(lines, line)) {
            ++n;
            if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(n) + ": expected 'key = value'");
            const std::string key = detail::trim(line.substr(0, eq));
            if (raw_.count(key)) throw ConfigError(path + ":" + std::to_string(n) + ": duplicate key '" + key + "'");
            set(key, detail::trim(line.substr(eq + 1)));
        }
    }

    void set(const std::string& key, const std::string& value) {
        if (!spec(key)) throw ConfigError("unknown key '" + key + "' for subcommand " + subcommand);
        if (value.empty()) throw ConfigError("key '" + key + "' has an empty value");
        raw_[key] = value;
        // validate eagerly so the message names the key
        const KeySpec& s = *spec(key);
        if (s.dim == Dim::text) return;
        if (s.dim == Dim::flag) {
            flag(key, false);
            return;
        }
        if (s.dim == Dim::integer) {
            integer(key, 0);
            return;
        }
        number(key, 0);
    }

    bool has(const std::string& key) const { return raw_.count(key) > 0; }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) const {
        const auto it = raw_.find(key);
        if (it == raw_.end()) {
            if (!fallback) throw ConfigError("missing required key '" + key + "'");
            return *fallback;
        }
        const KeySpec& s = *spec(key);
        std::string v = it->second;
        double x = 0;
        std::size_t used = 0;
        if (v == "inf" || v == "+inf") {
            x = std::numeric_limits<double>::infinity();
            used = v.size();
        } else {
            try {
                x = std::stod(v, &used);
            } catch (const std::exception&) {
                throw ConfigError("key '" + key + "': '" + v + "' is not a number");
            }
        }
        const std::string unit = detail::trim(v.substr(used));
        if (s.dim == Dim::squeeze) {
            if (unit == "dB") return x * std::log(10.0) / 20;
            if (!unit.empty()) throw ConfigError("key '" + key + "': unit '" + unit + "' not accepted (use a bare squeeze factor or dB)");
            return x;
        }
        const auto& u = detail::units_for(s.dim);
        const auto f = u.find(unit);
        if (f == u.end()) {
            std::string ok;
            for (const auto& [name, _] : u)
                if (!name.empty()) ok += (ok.empty() ? "" : ", ") + name;
            throw ConfigError("key '" + key + "': unit '" + unit + "' not accepted" + (ok.empty() ? " (dimensionless)" : " (use " + ok + ")"));
        }
        if (std::isnan(x)) throw ConfigError("key '" + key + "' is NaN");
        return x * f->second;
    }

    long long integer(const std::string& key, std::optional<long long> fallback = std::nullopt) const {
        const auto it = raw_.find(key);
        if (it == raw_.end()) {
            if (!fallback) throw ConfigError("missing required key '" + key + "'");
            return *fallback;
        }
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(it->second, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != it->second.size()) throw ConfigError("key '" + key + "': '" + it->second + "' is not an integer");
        return v;
    }

    bool flag(const std::string& key, bool fallback) const {
        const auto it = raw_.find(key);
        if (it == raw_.end()) return fallback;
        if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
        if (it->second == "false" || it->second == "0" || it->second == "no") return false;
        throw ConfigError("key '" + key + "': expected true or false, got '" + it->second + "'");
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        const auto it = raw_.find(key);
        return it == raw_.end() ? fallback : it->second;
    }

    std::string choice(const std::string& key, const std::vector<std::string>& allowed) const {
        const std::string v = text(key, allowed.front());
        for (const auto& a : allowed)
            if (v == a) return v;
        std::string ok;
        for (const auto& a : allowed) ok += (ok.empty() ? "" : "|") + a;
        throw ConfigError("key '" + key + "': '" + v + "' is not one of " + ok);
    }

    // Required and strictly positive.
    double positive(const std::string& key, std::optional<double> fallback = std::nullopt) const {
        const double v = number(key, fallback);
        if (!(v > 0)) throw ConfigError("key '" + key + "' must be positive");
        return v;
    }

    double nonnegative(const std::string& key, std::optional<double> fallback = std::nullopt) const {
        const double v = number(key, fallback);
        if (!(v >= 0)) throw ConfigError("key '" + key + "' must be nonnegative");
        return v;
    }

    // Echo for reports: raw strings, minus the output directory (so reruns elsewhere match).
    nlohmann::json echo() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : raw_)
            if (k != "out") j[k] = v;
        return j;
    }

    const std::vector<KeySpec>& specs() const { return specs_; }

private:
    const KeySpec* spec(const std::string& key) const {
        for (const auto& s : specs_)
            if (s.name == key) return &s;
        return nullptr;
    }

    std::vector<KeySpec> specs_;
    std::map<std::string, std::string> raw_;
};

}  // namespace qomsim::cli
