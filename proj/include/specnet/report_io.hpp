#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "specnet/errors.hpp"

namespace specnet {

/// All floating-point output goes through this: 17 significant digits so
/// reports are byte-reproducible and round-trip exactly.
inline std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open output file " + path.string());
    os << content;
}

/// Minimal JSON emitter for the flat report schemas; keys stay in insertion
/// order and numbers are 17-digit formatted.
class JsonWriter {
public:
    JsonWriter& begin() { return raw("{"); }
    JsonWriter& end() {
        last_ = false;
        return raw("}");
    }
    JsonWriter& begin_array(const std::string& key) {
        comma();
        out_ << quote(key) << ":[";
        last_ = false;
        return *this;
    }
    JsonWriter& end_array() {
        out_ << "]";
        last_ = true;
        return *this;
    }
    JsonWriter& begin_object() {
        comma();
        out_ << "{";
        last_ = false;
        return *this;
    }
    JsonWriter& end_object() {
        out_ << "}";
        last_ = true;
        return *this;
    }
    JsonWriter& element(double v) {
        comma();
        out_ << fmt17(v);
        return *this;
    }
    JsonWriter& element(long long v) {
        comma();
        out_ << v;
        return *this;
    }
    JsonWriter& field(const std::string& key, double v) { return kv(key, fmt17(v)); }
    JsonWriter& field(const std::string& key, int v) { return kv(key, std::to_string(v)); }
    JsonWriter& field(const std::string& key, long long v) { return kv(key, std::to_string(v)); }
    JsonWriter& field(const std::string& key, bool v) { return kv(key, v ? "true" : "false"); }
    JsonWriter& field(const std::string& key, const std::string& v) { return kv(key, quote(v)); }
    JsonWriter& field(const std::string& key, const char* v) { return kv(key, quote(v)); }

    std::string str() const { return out_.str(); }

private:
    static std::string quote(const std::string& s) {
        std::string r = "\"";
        for (char ch : s) {
            switch (ch) {
                case '"': r += "\\\""; break;
                case '\\': r += "\\\\"; break;
                case '\n': r += "\\n"; break;
                default: r += ch;
            }
        }
        r += "\"";
        return r;
    }
    void comma() {
        if (last_) out_ << ",";
        last_ = true;
    }
    JsonWriter& kv(const std::string& key, const std::string& val) {
        comma();
        out_ << quote(key) << ":" << val;
        return *this;
    }
    JsonWriter& raw(const std::string& s) {
        out_ << s;
        return *this;
    }
    std::ostringstream out_;
    bool last_ = false;
};

}  // namespace specnet
