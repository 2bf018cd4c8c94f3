#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "pointbeam/error.hpp"
#include "pointbeam/scene.hpp"

// Scenario files are plain UTF-8 key/value text with [tables],
// [[arrays of tables]] and inline arrays -- a small TOML subset. See the
// README for the full schema. Parsing and serialization round-trip exactly.

namespace pointbeam::io {

namespace toml {

struct Value;
using ValuePtr = std::shared_ptr<Value>;

struct Value {
    enum class Kind { Number, String, Bool, Array, Table, TableArray } kind = Kind::Table;
    double num = 0.0;
    bool boolean = false;
    std::string str;
    std::vector<ValuePtr> items;                 // Array / TableArray
    std::map<std::string, ValuePtr> fields;      // Table
};

inline ValuePtr make(Value::Kind k) {
    auto v = std::make_shared<Value>();
    v->kind = k;
    return v;
}

[[noreturn]] inline void parse_fail(std::size_t line, const std::string& what) {
    fail(Errc::parse_error, "scenario_io", "line " + std::to_string(line) + ": " + what);
}

class Parser {
public:
    explicit Parser(const std::string& text) : text_(text) {}

    ValuePtr parse() {
        root_ = make(Value::Kind::Table);
        current_ = root_;
        std::size_t line_no = 0;
        std::istringstream in(text_);
        std::string line;
        while (std::getline(in, line)) {
            ++line_no;
            std::string t = strip(line);
            if (t.empty() || t[0] == '#') continue;
            if (t[0] == '[') {
                open_section(t, line_no);
            } else {
                key_value(t, line_no);
            }
        }
        return root_;
    }

private:
    static std::string strip(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    void open_section(const std::string& t, std::size_t line_no) {
        bool is_array = t.size() > 1 && t[1] == '[';
        const std::size_t open = is_array ? 2 : 1;
        const std::string closer = is_array ? "]]" : "]";
        const std::size_t close = t.find(closer);
        if (close == std::string::npos || strip(t.substr(close + closer.size())).size() != 0)
            parse_fail(line_no, "malformed table header");
        std::string path = strip(t.substr(open, close - open));
        if (path.empty()) parse_fail(line_no, "empty table name");

        std::vector<std::string> parts;
        std::size_t start = 0;
        while (true) {
            std::size_t dot = path.find('.', start);
            parts.push_back(strip(path.substr(start, dot - start)));
            if (dot == std::string::npos) break;
            start = dot + 1;
        }

        ValuePtr node = root_;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            const bool last = i + 1 == parts.size();
            const std::string& name = parts[i];
            auto it = node->fields.find(name);
            if (last && is_array) {
                if (it == node->fields.end()) {
                    auto arr = make(Value::Kind::TableArray);
                    node->fields[name] = arr;
                    it = node->fields.find(name);
                }
                if (it->second->kind != Value::Kind::TableArray)
                    parse_fail(line_no, "'" + name + "' is not an array of tables");
                auto elem = make(Value::Kind::Table);
                it->second->items.push_back(elem);
                node = elem;
            } else {
                if (it == node->fields.end()) {
                    if (last) {
                        auto tbl = make(Value::Kind::Table);
                        node->fields[name] = tbl;
                        node = tbl;
                        continue;
                    }
                    parse_fail(line_no, "unknown parent table '" + name + "'");
                }
                ValuePtr next = it->second;
                if (next->kind == Value::Kind::TableArray) {
                    if (next->items.empty()) parse_fail(line_no, "'" + name + "' has no elements yet");
                    node = next->items.back();
                } else if (next->kind == Value::Kind::Table) {
                    node = next;
                } else {
                    parse_fail(line_no, "'" + name + "' is not a table");
                }
            }
        }
        current_ = node;
    }

    void key_value(const std::string& t, std::size_t line_no) {
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) parse_fail(line_no, "expected key = value");
        const std::string key = strip(t.substr(0, eq));
        if (key.empty()) parse_fail(line_no, "empty key");
        std::string rest = strip(t.substr(eq + 1));
        if (rest.empty()) parse_fail(line_no, "missing value for '" + key + "'");
        std::size_t pos = 0;
        ValuePtr v = parse_value(rest, pos, line_no);
        if (strip(rest.substr(pos)).size() != 0) parse_fail(line_no, "trailing characters after value for '" + key + "'");
        if (current_->fields.count(key)) parse_fail(line_no, "duplicate key '" + key + "'");
        current_->fields[key] = v;
    }

    ValuePtr parse_value(const std::string& s, std::size_t& pos, std::size_t line_no) {
        skip_ws(s, pos);
        if (pos >= s.size()) parse_fail(line_no, "unexpected end of value");
        const char c = s[pos];
        if (c == '[') {
            ++pos;
            auto arr = make(Value::Kind::Array);
            skip_ws(s, pos);
            if (pos < s.size() && s[pos] == ']') {
                ++pos;
                return arr;
            }
            while (true) {
                arr->items.push_back(parse_value(s, pos, line_no));
                skip_ws(s, pos);
                if (pos >= s.size()) parse_fail(line_no, "unterminated array");
                if (s[pos] == ',') {
                    ++pos;
                    continue;
                }
                if (s[pos] == ']') {
                    ++pos;
                    return arr;
                }
                parse_fail(line_no, "expected ',' or ']' in array");
            }
        }
        if (c == '"') {
            ++pos;
            auto v = make(Value::Kind::String);
            while (pos < s.size() && s[pos] != '"') {
                if (s[pos] == '\\' && pos + 1 < s.size()) {
                    ++pos;
                    switch (s[pos]) {
                        case 'n': v->str.push_back('\n'); break;
                        case 't': v->str.push_back('\t'); break;
                        default: v->str.push_back(s[pos]); break;
                    }
                } else {
                    v->str.push_back(s[pos]);
                }
                ++pos;
            }
            if (pos >= s.size()) parse_fail(line_no, "unterminated string");
            ++pos;
            return v;
        }
        if (s.compare(pos, 4, "true") == 0) {
            pos += 4;
            auto v = make(Value::Kind::Bool);
            v->boolean = true;
            return v;
        }
        if (s.compare(pos, 5, "false") == 0) {
            pos += 5;
            auto v = make(Value::Kind::Bool);
            return v;
        }
        // number
        const char* begin = s.c_str() + pos;
        char* end = nullptr;
        const double d = std::strtod(begin, &end);
        if (end == begin) parse_fail(line_no, "cannot parse value");
        pos += static_cast<std::size_t>(end - begin);
        auto v = make(Value::Kind::Number);
        v->num = d;
        return v;
    }

    static void skip_ws(const std::string& s, std::size_t& pos) {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }

    std::string text_;
    ValuePtr root_;
    ValuePtr current_;
};

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    std::string s(buf);
    if (s.find_first_of(".eEni") == std::string::npos) s += ".0";
    return s;
}

} // namespace toml

// ---------------------------------------------------------------------------
// Tree -> Scenario

namespace detail {

using toml::Value;
using toml::ValuePtr;

[[noreturn]] inline void field_fail(const std::string& field, const std::string& what) {
    fail(Errc::parse_error, "scenario_io", "field '" + field + "': " + what);
}

inline double need_number(const ValuePtr& t, const std::string& field, const ValuePtr& v) {
    (void)t;
    if (!v || v->kind != Value::Kind::Number) field_fail(field, "expected a number");
    return v->num;
}

inline double get_number(const ValuePtr& table, const std::string& field, double fallback) {
    auto it = table->fields.find(field);
    if (it == table->fields.end()) return fallback;
    return need_number(table, field, it->second);
}

inline std::string get_string(const ValuePtr& table, const std::string& field, const std::string& fallback) {
    auto it = table->fields.find(field);
    if (it == table->fields.end()) return fallback;
    if (it->second->kind != Value::Kind::String) field_fail(field, "expected a string");
    return it->second->str;
}

inline Vec3 need_position(const ValuePtr& table, const std::string& key, const std::string& label) {
    auto it = table->fields.find(key);
    if (it == table->fields.end()) field_fail(label, "missing required position");
    const ValuePtr& v = it->second;
    if (v->kind != Value::Kind::Array || v->items.size() < 2 || v->items.size() > 3)
        field_fail(label, "expected [x, y] or [x, y, z]");
    Vec3 p;
    double* coords[3] = {&p.x, &p.y, &p.z};
    for (std::size_t i = 0; i < v->items.size(); ++i) {
        if (v->items[i]->kind != Value::Kind::Number) field_fail(label, "coordinates must be numbers");
        *coords[i] = v->items[i]->num;
    }
    return p;
}

inline sim::SourceSpec parse_source(const ValuePtr& t, const std::string& label, bool is_chirp_device) {
    sim::SourceSpec s;
    s.position = need_position(t, "position", label + ".position");
    s.level = get_number(t, "level", 1.0);

    if (is_chirp_device) {
        s.role = sim::SourceRole::Reference;
    } else {
        const std::string role = get_string(t, "role", "desired");
        if (role == "desired") s.role = sim::SourceRole::Desired;
        else if (role == "interferer") s.role = sim::SourceRole::Interferer;
        else field_fail(label + ".role", "must be \"desired\" or \"interferer\"");
    }

    const std::string wf = get_string(t, "waveform", is_chirp_device ? "chirp" : "band_noise");
    if (wf == "chirp" || is_chirp_device) {
        ChirpSpec cs;
        auto it = t->fields.find("chirp");
        if (it != t->fields.end()) {
            if (it->second->kind != Value::Kind::Table) field_fail(label + ".chirp", "expected a table");
            const ValuePtr& ct = it->second;
            cs.f_start = get_number(ct, "f_start", cs.f_start);
            cs.f_end = get_number(ct, "f_end", cs.f_end);
            cs.duration = get_number(ct, "duration", cs.duration);
            cs.period = get_number(ct, "period", cs.period);
            cs.amplitude = get_number(ct, "amplitude", cs.amplitude);
        }
        s.waveform = sim::ChirpWaveform{cs};
    } else if (wf == "band_noise") {
        sim::BandNoiseWaveform bn;
        auto it = t->fields.find("band");
        if (it != t->fields.end()) {
            const ValuePtr& b = it->second;
            if (b->kind != Value::Kind::Array || b->items.size() != 2 || b->items[0]->kind != Value::Kind::Number ||
                b->items[1]->kind != Value::Kind::Number)
                field_fail(label + ".band", "expected [f_lo, f_hi]");
            bn.f_lo = b->items[0]->num;
            bn.f_hi = b->items[1]->num;
        }
        s.waveform = bn;
    } else if (wf == "file") {
        sim::FileWaveform fw;
        fw.path = get_string(t, "file", "");
        if (fw.path.empty()) field_fail(label + ".file", "file waveform needs a path");
        s.waveform = fw;
    } else {
        field_fail(label + ".waveform", "must be \"band_noise\", \"chirp\" or \"file\"");
    }

    if (auto it = t->fields.find("echoes"); it != t->fields.end()) {
        if (it->second->kind != Value::Kind::Array) field_fail(label + ".echoes", "expected an array");
        for (std::size_t i = 0; i < it->second->items.size(); ++i) {
            const ValuePtr& e = it->second->items[i];
            if (e->kind != Value::Kind::Array || e->items.size() != 2 || e->items[0]->kind != Value::Kind::Number ||
                e->items[1]->kind != Value::Kind::Number)
                field_fail(label + ".echoes[" + std::to_string(i) + "]", "expected [extra_delay, relative_gain]");
            s.echoes.push_back({e->items[0]->num, e->items[1]->num});
        }
    }
    if (auto it = t->fields.find("obstacle_gains"); it != t->fields.end()) {
        if (it->second->kind != Value::Kind::Array) field_fail(label + ".obstacle_gains", "expected an array");
        for (const auto& g : it->second->items) {
            if (g->kind != Value::Kind::Number) field_fail(label + ".obstacle_gains", "entries must be numbers");
            s.obstacle_gains.push_back(g->num);
        }
    }
    return s;
}

} // namespace detail

inline sim::Scenario scenario_from_text(const std::string& text) {
    using detail::field_fail;
    toml::ValuePtr root = toml::Parser(text).parse();

    sim::Scenario scn;
    scn.rate = detail::get_number(root, "rate", 44100.0);
    scn.duration = detail::get_number(root, "duration", scn.duration);
    scn.c_true = detail::get_number(root, "c_true", scn.c_true);
    scn.c_assumed_min = detail::get_number(root, "c_assumed_min", 337.0);
    scn.c_assumed_max = detail::get_number(root, "c_assumed_max", 348.0);
    scn.pos_error_bound = detail::get_number(root, "pos_error_bound", 0.0);
    scn.noise_rms = detail::get_number(root, "noise_rms", 0.0);
    scn.rng_seed = static_cast<std::uint64_t>(detail::get_number(root, "rng_seed", 1.0));

    auto mics_it = root->fields.find("mics");
    if (mics_it == root->fields.end() || mics_it->second->kind != toml::Value::Kind::TableArray)
        field_fail("mics", "need at least one [[mics]] table");
    for (std::size_t i = 0; i < mics_it->second->items.size(); ++i) {
        const auto& t = mics_it->second->items[i];
        sim::MicSpec m;
        m.true_position = detail::need_position(t, "true_position", "mics[" + std::to_string(i) + "].true_position");
        if (t->fields.count("measured_position"))
            m.measured_position = detail::need_position(t, "measured_position", "mics[" + std::to_string(i) + "].measured_position");
        else
            m.measured_position = m.true_position;
        m.clock_offset = detail::get_number(t, "clock_offset", 0.0);
        m.gain = detail::get_number(t, "gain", 1.0);
        scn.mics.push_back(m);
    }

    if (auto it = root->fields.find("sources"); it != root->fields.end()) {
        if (it->second->kind != toml::Value::Kind::TableArray) field_fail("sources", "expected [[sources]] tables");
        for (std::size_t i = 0; i < it->second->items.size(); ++i)
            scn.sources.push_back(detail::parse_source(it->second->items[i], "sources[" + std::to_string(i) + "]", false));
    }

    auto cd = root->fields.find("chirp_device");
    if (cd == root->fields.end() || cd->second->kind != toml::Value::Kind::Table)
        field_fail("chirp_device", "missing [chirp_device] table");
    scn.chirp_device = detail::parse_source(cd->second, "chirp_device", true);

    sim::validate_scenario(scn);
    return scn;
}

inline sim::Scenario scenario_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        fail(Errc::io_error, "scenario_io", "cannot open scenario file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return scenario_from_text(ss.str());
}

// ---------------------------------------------------------------------------
// Scenario -> text

inline std::string serialize_scenario(const sim::Scenario& scn) {
    using toml::format_double;
    std::string out;
    auto kv = [&](const std::string& k, double v) { out += k + " = " + format_double(v) + "\n"; };
    auto pos = [&](const std::string& k, const Vec3& p) {
        out += k + " = [" + format_double(p.x) + ", " + format_double(p.y) + ", " + format_double(p.z) + "]\n";
    };

    kv("rate", scn.rate);
    kv("duration", scn.duration);
    kv("c_true", scn.c_true);
    kv("c_assumed_min", scn.c_assumed_min);
    kv("c_assumed_max", scn.c_assumed_max);
    kv("pos_error_bound", scn.pos_error_bound);
    kv("noise_rms", scn.noise_rms);
    out += "rng_seed = " + std::to_string(scn.rng_seed) + "\n";

    auto emit_source_body = [&](const sim::SourceSpec& s, const std::string& header, bool is_chirp_device) {
        pos("position", s.position);
        kv("level", s.level);
        if (!is_chirp_device)
            out += std::string("role = \"") + (s.role == sim::SourceRole::Desired ? "desired" : "interferer") + "\"\n";
        if (const auto* bn = std::get_if<sim::BandNoiseWaveform>(&s.waveform)) {
            out += "waveform = \"band_noise\"\n";
            out += "band = [" + format_double(bn->f_lo) + ", " + format_double(bn->f_hi) + "]\n";
        } else if (const auto* fw = std::get_if<sim::FileWaveform>(&s.waveform)) {
            out += "waveform = \"file\"\n";
            out += "file = \"" + fw->path + "\"\n";
        } else {
            const auto& cs = std::get<sim::ChirpWaveform>(s.waveform).spec;
            out += "waveform = \"chirp\"\n";
            out += "[" + header + ".chirp]\n";
            kv("f_start", cs.f_start);
            kv("f_end", cs.f_end);
            kv("duration", cs.duration);
            kv("period", cs.period);
            kv("amplitude", cs.amplitude);
        }
        if (!s.echoes.empty()) {
            out += "echoes = [";
            for (std::size_t i = 0; i < s.echoes.size(); ++i) {
                if (i) out += ", ";
                out += "[" + format_double(s.echoes[i].extra_delay) + ", " + format_double(s.echoes[i].relative_gain) + "]";
            }
            out += "]\n";
        }
        if (!s.obstacle_gains.empty()) {
            out += "obstacle_gains = [";
            for (std::size_t i = 0; i < s.obstacle_gains.size(); ++i) {
                if (i) out += ", ";
                out += format_double(s.obstacle_gains[i]);
            }
            out += "]\n";
        }
    };

    out += "\n[chirp_device]\n";
    // waveform/echo keys must precede the nested [chirp_device.chirp] table
    {
        const auto& s = scn.chirp_device;
        pos("position", s.position);
        kv("level", s.level);
        if (!s.echoes.empty()) {
            out += "echoes = [";
            for (std::size_t i = 0; i < s.echoes.size(); ++i) {
                if (i) out += ", ";
                out += "[" + format_double(s.echoes[i].extra_delay) + ", " + format_double(s.echoes[i].relative_gain) + "]";
            }
            out += "]\n";
        }
        if (!s.obstacle_gains.empty()) {
            out += "obstacle_gains = [";
            for (std::size_t i = 0; i < s.obstacle_gains.size(); ++i) {
                if (i) out += ", ";
                out += format_double(s.obstacle_gains[i]);
            }
            out += "]\n";
        }
        const auto& cs = std::get<sim::ChirpWaveform>(s.waveform).spec;
        out += "[chirp_device.chirp]\n";
        kv("f_start", cs.f_start);
        kv("f_end", cs.f_end);
        kv("duration", cs.duration);
        kv("period", cs.period);
        kv("amplitude", cs.amplitude);
    }

    for (const auto& m : scn.mics) {
        out += "\n[[mics]]\n";
        pos("true_position", m.true_position);
        pos("measured_position", m.measured_position);
        kv("clock_offset", m.clock_offset);
        kv("gain", m.gain);
    }

    for (const auto& s : scn.sources) {
        out += "\n[[sources]]\n";
        emit_source_body(s, "sources", false);
    }
    return out;
}

inline void scenario_to_file(const sim::Scenario& scn, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        fail(Errc::io_error, "scenario_io", "cannot write scenario file: " + path);
    out << serialize_scenario(scn);
}

// Field-by-field equality; doubles compared exactly (serialization is
// round-trip exact).
inline bool scenario_equal(const sim::Scenario& a, const sim::Scenario& b) {
    auto src_eq = [](const sim::SourceSpec& x, const sim::SourceSpec& y, bool compare_role) {
        if (!(x.position == y.position) || x.level != y.level) return false;
        if (compare_role && x.role != y.role) return false;
        if (x.echoes.size() != y.echoes.size() || x.obstacle_gains.size() != y.obstacle_gains.size()) return false;
        for (std::size_t i = 0; i < x.echoes.size(); ++i)
            if (x.echoes[i].extra_delay != y.echoes[i].extra_delay || x.echoes[i].relative_gain != y.echoes[i].relative_gain)
                return false;
        for (std::size_t i = 0; i < x.obstacle_gains.size(); ++i)
            if (x.obstacle_gains[i] != y.obstacle_gains[i]) return false;
        if (x.waveform.index() != y.waveform.index()) return false;
        if (const auto* cx = std::get_if<sim::ChirpWaveform>(&x.waveform)) {
            const auto& cy = std::get<sim::ChirpWaveform>(y.waveform);
            return cx->spec.f_start == cy.spec.f_start && cx->spec.f_end == cy.spec.f_end &&
                   cx->spec.duration == cy.spec.duration && cx->spec.period == cy.spec.period &&
                   cx->spec.amplitude == cy.spec.amplitude;
        }
        if (const auto* bx = std::get_if<sim::BandNoiseWaveform>(&x.waveform)) {
            const auto& by = std::get<sim::BandNoiseWaveform>(y.waveform);
            return bx->f_lo == by.f_lo && bx->f_hi == by.f_hi;
        }
        return std::get<sim::FileWaveform>(x.waveform).path == std::get<sim::FileWaveform>(y.waveform).path;
    };

    if (a.mics.size() != b.mics.size() || a.sources.size() != b.sources.size()) return false;
    if (a.c_true != b.c_true || a.c_assumed_min != b.c_assumed_min || a.c_assumed_max != b.c_assumed_max ||
        a.pos_error_bound != b.pos_error_bound || a.noise_rms != b.noise_rms || a.duration != b.duration ||
        a.rate != b.rate || a.rng_seed != b.rng_seed)
        return false;
    for (std::size_t i = 0; i < a.mics.size(); ++i) {
        const auto& x = a.mics[i];
        const auto& y = b.mics[i];
        if (!(x.true_position == y.true_position) || !(x.measured_position == y.measured_position) ||
            x.clock_offset != y.clock_offset || x.gain != y.gain)
            return false;
    }
    for (std::size_t i = 0; i < a.sources.size(); ++i)
        if (!src_eq(a.sources[i], b.sources[i], true)) return false;
    // the chirp device's role is implied by its slot in the schema
    return src_eq(a.chirp_device, b.chirp_device, false);
}

} // namespace pointbeam::io
