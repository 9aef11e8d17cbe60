#pragma once

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace weakdep {

using Json = nlohmann::ordered_json;

/// Formats a double with 17 significant digits; non-finite values become null.
inline std::string format_double(double x) {
    if (!std::isfinite(x)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

inline void dump_json(const Json& j, std::string& out, int indent, int depth) {
    const auto pad = [&](int d) {
        if (indent > 0) out.append(static_cast<std::size_t>(d * indent), ' ');
    };
    const char* nl = indent > 0 ? "\n" : "";
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) { out += "{}"; return; }
            out += "{";
            out += nl;
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) { out += ","; out += nl; }
                first = false;
                pad(depth + 1);
                out += Json(it.key()).dump();
                out += indent > 0 ? ": " : ":";
                dump_json(it.value(), out, indent, depth + 1);
            }
            out += nl;
            pad(depth);
            out += "}";
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) { out += "[]"; return; }
            out += "[";
            bool first = true;
            for (const auto& v : j) {
                if (!first) out += indent > 0 ? ", " : ",";
                first = false;
                dump_json(v, out, indent, depth + 1);
            }
            out += "]";
            return;
        }
        case Json::value_t::number_float:
            out += format_double(j.get<double>());
            return;
        default:
            out += j.dump();
    }
}

}  // namespace detail

/// Serializes JSON with every float at 17 significant digits.
inline std::string dump_json(const Json& j, int indent = 2) {
    std::string out;
    detail::dump_json(j, out, indent, 0);
    return out;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace weakdep
