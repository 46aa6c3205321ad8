#include "common/json.hpp"

#include <cmath>
#include <cstdio>

#include "common/error.hpp"

namespace masklab {

void JsonWriter::newline() {
    os_ << "\n";
    for (std::size_t i = 0; i < stack_.size(); ++i)
        for (int s = 0; s < indent_; ++s) os_ << ' ';
}

void JsonWriter::before_item() {
    if (stack_.empty()) return;
    Frame& top = stack_.back();
    if (top.is_object) {
        require(top.pending_key, ErrorCode::Internal, "json: value without key in object");
        top.pending_key = false;
        return;
    }
    if (top.count++ > 0) os_ << ",";
    newline();
}

JsonWriter& JsonWriter::begin_object() {
    before_item();
    os_ << "{";
    stack_.push_back(Frame{true, 0, false});
    return *this;
}

JsonWriter& JsonWriter::end_object() {
    require(!stack_.empty() && stack_.back().is_object, ErrorCode::Internal,
            "json: mismatched end_object");
    const bool empty = stack_.back().count == 0;
    stack_.pop_back();
    if (!empty) newline();
    os_ << "}";
    return *this;
}

JsonWriter& JsonWriter::begin_array() {
    before_item();
    os_ << "[";
    stack_.push_back(Frame{false, 0, false});
    return *this;
}

JsonWriter& JsonWriter::end_array() {
    require(!stack_.empty() && !stack_.back().is_object, ErrorCode::Internal,
            "json: mismatched end_array");
    const bool empty = stack_.back().count == 0;
    stack_.pop_back();
    if (!empty) newline();
    os_ << "]";
    return *this;
}

JsonWriter& JsonWriter::key(const std::string& name) {
    require(!stack_.empty() && stack_.back().is_object, ErrorCode::Internal,
            "json: key outside object");
    Frame& top = stack_.back();
    require(!top.pending_key, ErrorCode::Internal, "json: two keys in a row");
    if (top.count++ > 0) os_ << ",";
    newline();
    os_ << '"' << escape(name) << "\": ";
    top.pending_key = true;
    return *this;
}

JsonWriter& JsonWriter::value(const std::string& v) {
    before_item();
    os_ << '"' << escape(v) << '"';
    return *this;
}

JsonWriter& JsonWriter::value(double v) {
    before_item();
    if (!std::isfinite(v)) {
        os_ << "null";
        return *this;
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    os_ << buf;
    return *this;
}

JsonWriter& JsonWriter::value(std::int64_t v) {
    before_item();
    os_ << v;
    return *this;
}

JsonWriter& JsonWriter::value(bool v) {
    before_item();
    os_ << (v ? "true" : "false");
    return *this;
}

std::string JsonWriter::escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

}  // namespace masklab
