#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qkdike {

enum class ErrorCode {
    unknown_algorithm,
    length_mismatch,
    bad_length,
    invalid_state,
    unknown_ksid,
    session_expired,
    pool_exhausted,
    key_not_found,
    already_consumed,
    backend_unreachable,
    empty_queue,
    insufficient_samples,
    malformed_transcript,
    config_error,
    handshake_failure,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::unknown_algorithm: return "unknown-algorithm";
        case ErrorCode::length_mismatch: return "length-mismatch";
        case ErrorCode::bad_length: return "bad-length";
        case ErrorCode::invalid_state: return "invalid-state";
        case ErrorCode::unknown_ksid: return "unknown-ksid";
        case ErrorCode::session_expired: return "session-expired";
        case ErrorCode::pool_exhausted: return "pool-exhausted";
        case ErrorCode::key_not_found: return "key-not-found";
        case ErrorCode::already_consumed: return "already-consumed";
        case ErrorCode::backend_unreachable: return "backend-unreachable";
        case ErrorCode::empty_queue: return "empty-queue";
        case ErrorCode::insufficient_samples: return "insufficient-samples";
        case ErrorCode::malformed_transcript: return "malformed-transcript";
        case ErrorCode::config_error: return "config-error";
        case ErrorCode::handshake_failure: return "handshake-failure";
    }
    return "unknown";
}

/// Typed error used across the library. Tests match on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace qkdike
