#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "elastoscan/errors.hpp"

namespace elastoscan {

// One non-comment line of a config document: a keyword followed by
// positional values and/or key=value attributes.
struct ConfigLine {
    std::string key;
    std::vector<std::string> values;      // bare tokens, in order
    std::map<std::string, std::string> attrs;
    int line_no = 0;

    bool has(const std::string& name) const { return attrs.count(name) > 0; }

    const std::string& attr(const std::string& name) const {
        auto it = attrs.find(name);
        if (it == attrs.end())
            throw ConfigError("line " + std::to_string(line_no) + ": missing attribute '" + name + "' for '" + key + "'");
        return it->second;
    }

    double attr_num(const std::string& name) const {
        return parse_number(attr(name), name);
    }

    double attr_num(const std::string& name, double fallback) const {
        auto it = attrs.find(name);
        return it == attrs.end() ? fallback : parse_number(it->second, name);
    }

    double value_num(size_t i) const {
        if (i >= values.size())
            throw ConfigError("line " + std::to_string(line_no) + ": '" + key + "' needs at least " +
                              std::to_string(i + 1) + " value(s)");
        return parse_number(values[i], key);
    }

    static double parse_number(const std::string& s, const std::string& what) {
        try {
            size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("cannot parse number '" + s + "' for '" + what + "'");
        }
    }
};

// Structured text config with a versioned header line of the form
// "elastoscan-<kind> v<version>". Bodies are keyword lines; '#' starts
// a comment.
struct ConfigDoc {
    std::string kind;
    int version = 0;
    std::vector<ConfigLine> lines;
    std::string source;  // path or label, for error messages

    bool has(const std::string& key) const {
        return std::any_of(lines.begin(), lines.end(),
                           [&](const ConfigLine& l) { return l.key == key; });
    }

    const ConfigLine* find(const std::string& key) const {
        for (const auto& l : lines)
            if (l.key == key) return &l;
        return nullptr;
    }

    const ConfigLine& require(const std::string& key) const {
        const ConfigLine* l = find(key);
        if (!l) throw ConfigError(source + ": missing required key '" + key + "'");
        return *l;
    }

    std::vector<ConfigLine> all(const std::string& key) const {
        std::vector<ConfigLine> out;
        for (const auto& l : lines)
            if (l.key == key) out.push_back(l);
        return out;
    }

    double scalar(const std::string& key) const { return require(key).value_num(0); }

    double scalar_or(const std::string& key, double fallback) const {
        const ConfigLine* l = find(key);
        return l ? l->value_num(0) : fallback;
    }

    std::string text(const std::string& key) const {
        const ConfigLine& l = require(key);
        if (l.values.empty())
            throw ConfigError(source + ": '" + key + "' has no value");
        return l.values[0];
    }

    std::string text_or(const std::string& key, const std::string& fallback) const {
        const ConfigLine* l = find(key);
        if (!l || l->values.empty()) return fallback;
        return l->values[0];
    }
};

inline ConfigDoc parse_config(std::istream& in, const std::string& expected_kind,
                              const std::string& source = "<stream>") {
    ConfigDoc doc;
    doc.source = source;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto p = line.find('#'); p != std::string::npos) line.erase(p);
        std::istringstream ls(line);
        std::vector<std::string> tokens;
        for (std::string tok; ls >> tok;) tokens.push_back(tok);
        if (tokens.empty()) continue;

        if (!header_seen) {
            // header: "elastoscan-<kind> v<version>"
            const std::string prefix = "elastoscan-";
            if (tokens.size() != 2 || tokens[0].rfind(prefix, 0) != 0 || tokens[1][0] != 'v')
                throw ConfigError(source + ":" + std::to_string(line_no) +
                                  ": expected header 'elastoscan-<kind> v<N>'");
            doc.kind = tokens[0].substr(prefix.size());
            try {
                doc.version = std::stoi(tokens[1].substr(1));
            } catch (const std::exception&) {
                throw ConfigError(source + ": bad version '" + tokens[1] + "'");
            }
            if (!expected_kind.empty() && doc.kind != expected_kind)
                throw ConfigError(source + ": expected an elastoscan-" + expected_kind +
                                  " file, got elastoscan-" + doc.kind);
            header_seen = true;
            continue;
        }

        ConfigLine cl;
        cl.key = tokens[0];
        cl.line_no = line_no;
        for (size_t i = 1; i < tokens.size(); ++i) {
            auto eq = tokens[i].find('=');
            if (eq == std::string::npos)
                cl.values.push_back(tokens[i]);
            else
                cl.attrs[tokens[i].substr(0, eq)] = tokens[i].substr(eq + 1);
        }
        doc.lines.push_back(std::move(cl));
    }
    if (!header_seen)
        throw ConfigError(source + ": empty config (no header line)");
    return doc;
}

inline ConfigDoc load_config(const std::string& path, const std::string& expected_kind) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    return parse_config(in, expected_kind, path);
}

} // namespace elastoscan
