#pragma once

#include <stdexcept>
#include <string>

namespace masklab {

enum class ErrorCode {
    InvalidArgument = 1,  // bad shapes, bad config, usage errors
    Io = 2,
    Numeric = 3,          // NaN/Inf where finite values are required
    NotFound = 4,         // missing checkpoint / dataset
    TrainingFailure = 5,  // expert policy failed to reach agreement floor
    Internal = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
    throw Error(code, msg);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
    if (!cond) fail(code, msg);
}

}  // namespace masklab
