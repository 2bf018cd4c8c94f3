#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace pointbeam::io {

// Minimal ordered JSON writer. Reals are printed with 9 significant digits,
// which is the precision contract for metrics files and truth sidecars;
// key order is insertion order so outputs are byte-stable.

inline std::string json_number(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c; break;
        }
    }
    return out;
}

class JsonWriter {
public:
    JsonWriter& begin_object() { return raw("{"), *this; }
    JsonWriter& end_object() { return close("}"), *this; }
    JsonWriter& begin_array() { return raw("["), *this; }
    JsonWriter& end_array() { return close("]"), *this; }

    JsonWriter& key(const std::string& k) {
        comma();
        text_ += '"' + json_escape(k) + "\":";
        pending_value_ = true;
        return *this;
    }

    JsonWriter& value(double v) { return item(json_number(v)), *this; }
    JsonWriter& value(std::size_t v) { return item(std::to_string(v)), *this; }
    JsonWriter& value(int v) { return item(std::to_string(v)), *this; }
    JsonWriter& value(bool v) { return item(v ? "true" : "false"), *this; }
    JsonWriter& value(const std::string& s) { return item('"' + json_escape(s) + '"'), *this; }
    JsonWriter& value(const char* s) { return value(std::string(s)); }

    const std::string& str() const { return text_; }

private:
    void comma() {
        if (!text_.empty()) {
            const char last = text_.back();
            if (last != '{' && last != '[' && last != ':') text_ += ',';
        }
    }
    void raw(const char* s) {
        if (!pending_value_) comma();
        pending_value_ = false;
        text_ += s;
    }
    void close(const char* s) { text_ += s; }
    void item(const std::string& s) {
        if (!pending_value_) comma();
        pending_value_ = false;
        text_ += s;
    }

    std::string text_;
    bool pending_value_ = false;
};

// Flat key -> number map, the metrics-file format.
inline std::string flat_metrics_json(const std::vector<std::pair<std::string, double>>& kv) {
    JsonWriter w;
    w.begin_object();
    for (const auto& [k, v] : kv) w.key(k).value(v);
    w.end_object();
    return w.str() + "\n";
}

} // namespace pointbeam::io
