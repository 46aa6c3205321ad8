#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace masklab {

// Streaming JSON writer with deterministic output: insertion order is kept
// and every float is rendered with %.9g (9 significant digits).
class JsonWriter {
public:
    explicit JsonWriter(std::ostream& os, int indent = 2) : os_(os), indent_(indent) {}

    JsonWriter& begin_object();
    JsonWriter& end_object();
    JsonWriter& begin_array();
    JsonWriter& end_array();

    JsonWriter& key(const std::string& name);

    JsonWriter& value(const std::string& v);
    JsonWriter& value(const char* v) { return value(std::string(v)); }
    JsonWriter& value(double v);
    JsonWriter& value(float v) { return value(static_cast<double>(v)); }
    JsonWriter& value(std::int64_t v);
    JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
    JsonWriter& value(std::size_t v) { return value(static_cast<std::int64_t>(v)); }
    JsonWriter& value(bool v);

    JsonWriter& kv(const std::string& name, const std::string& v) { return key(name).value(v); }
    JsonWriter& kv(const std::string& name, const char* v) { return key(name).value(v); }
    JsonWriter& kv(const std::string& name, double v) { return key(name).value(v); }
    JsonWriter& kv(const std::string& name, float v) { return key(name).value(v); }
    JsonWriter& kv(const std::string& name, std::int64_t v) { return key(name).value(v); }
    JsonWriter& kv(const std::string& name, int v) { return key(name).value(v); }
    JsonWriter& kv(const std::string& name, bool v) { return key(name).value(v); }

private:
    void before_item();
    void newline();
    static std::string escape(const std::string& s);

    struct Frame {
        bool is_object = false;
        int count = 0;
        bool pending_key = false;
    };
    std::ostream& os_;
    int indent_;
    std::vector<Frame> stack_;
};

}  // namespace masklab
