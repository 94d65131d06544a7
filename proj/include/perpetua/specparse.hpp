#pragma once
// Parser for the canonical "name:key=value,key=value" spec strings used by
// the CLI for laws and b functions.

#include <map>
#include <string>
#include <string_view>

#include "perpetua/errors.hpp"

namespace perpetua::specparse {

struct Parsed {
    std::string name;
    std::map<std::string, std::string> kv;

    bool has(const std::string& key) const { return kv.count(key) != 0; }

    double number(const std::string& key) const {
        const auto it = kv.find(key);
        if (it == kv.end())
            throw ConfigError("missing parameter '" + key + "' in " + name);
        try {
            size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument(it->second);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("not a number: " + it->second);
        }
    }

    double number_or(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }
};

inline Parsed parse(std::string_view text) {
    Parsed p;
    const size_t colon = text.find(':');
    p.name = std::string(text.substr(0, colon));
    if (colon != std::string_view::npos) {
        std::string_view rest = text.substr(colon + 1);
        while (!rest.empty()) {
            const size_t comma = rest.find(',');
            std::string_view item = rest.substr(0, comma);
            const size_t eq = item.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError("malformed spec item: " + std::string(item));
            p.kv.emplace(std::string(item.substr(0, eq)),
                         std::string(item.substr(eq + 1)));
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
    }
    return p;
}

}  // namespace perpetua::specparse
