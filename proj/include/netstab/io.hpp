/*
 Copyright 2026 netstab contributors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace netstab {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Decimal with 12 significant digits; the only non-numeric CSV sentinel
/// is "inf".
inline std::string format_number(double v) {
    if (std::isinf(v)) return "inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

/// Flat key=value config text: one pair per line, '#' comments, blank
/// lines ignored.
using KeyValueMap = std::map<std::string, std::string>;

inline KeyValueMap parse_key_values(std::istream& in) {
    KeyValueMap kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r\n");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r\n");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) +
                              ": expected key=value, got '" + line + "'");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t");
            return s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline KeyValueMap load_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_key_values(in);
}

/// Command manifest written next to every output; it is itself a valid
/// key=value config and replays the run bit-identically.
struct RunManifest {
    std::string command;
    KeyValueMap config;  // fully resolved, defaults materialized
    std::vector<std::string> outputs;
    std::string tool_version;
    double duration_seconds = 0.0;

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw ConfigError("cannot write manifest: " + path);
        out << "command=" << command << "\n";
        out << "tool_version=" << tool_version << "\n";
        for (const auto& [k, v] : config) out << k << "=" << v << "\n";
        for (std::size_t i = 0; i < outputs.size(); ++i)
            out << "output" << i << "=" << outputs[i] << "\n";
        out << "duration_seconds=" << format_number(duration_seconds) << "\n";
    }
};

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw ConfigError("cannot open output file: " + path);
    }
    void header(const std::string& h) { out_ << h << "\n"; }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ",";
            out_ << cells[i];
        }
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

}  // namespace netstab
